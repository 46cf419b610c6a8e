#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "srtree/treemetric.hpp"

using namespace srtree;

namespace {

GridExcursion tent_grid(int m) {
  GridExcursion g;
  for (int j = 0; j <= m; ++j) g.values.push_back(1.0 - std::abs(2.0 * j / m - 1.0));
  return g;
}

GridExcursion crt_excursion(std::uint64_t seed, int depth, int m) {
  static const DecompositionSpec spec = DecompositionSpec::make(
      StructuralTree::from_parents(std::vector<int>{1, 1}), ScalingLaw::shared_dirichlet({0.5, 0.5, 0.5}),
      std::sqrt(2 * std::numbers::pi));
  ParameterTree pt(spec, seed);
  return sample_excursion(pt, depth, m);
}

double brute_min(const std::vector<double>& f, int a, int b) {
  if (a > b) std::swap(a, b);
  return *std::min_element(f.begin() + a, f.begin() + b + 1);
}

}  // namespace

TEST_CASE("oracle examples") {
  DistanceOracle zero(std::vector<double>(65, 0.0));
  for (int x = 0; x <= 64; x += 7)
    for (int y = 0; y <= 64; y += 5) CHECK(zero.distance(x, y) == 0.0);

  auto tent = build_oracle(tent_grid(64));
  CHECK(tent.distance(0, 32) == 1.0);
  CHECK(tent.distance(16, 48) == 0.0);
  CHECK(tree_distance(tent, 0.0, 0.5) == doctest::Approx(1.0));
  CHECK(tree_distance(tent, 0.25, 0.75) == doctest::Approx(0.0));
  CHECK(tree_distance(tent, 0.3, 0.3) == 0.0);
  CHECK_THROWS(DistanceOracle(std::vector<double>{0.0}));
  CHECK_THROWS(tree_distance(tent, -0.1, 0.5));
}

TEST_CASE("range minimum matches brute force") {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> U(0, 1);
  for (int m : {1, 2, 3, 7, 64, 100, 257}) {
    std::vector<double> f(m + 1);
    for (auto& v : f) v = U(g);
    DistanceOracle o(f);
    for (int a = 0; a <= m; ++a)
      for (int b = 0; b <= m; b += 1 + m / 17) CHECK(o.range_min(a, b) == brute_min(f, a, b));
  }
}

TEST_CASE("pseudo-metric properties on a random excursion") {
  auto f = crt_excursion(3, 10, 4096);
  auto o = build_oracle(f);
  std::mt19937_64 g(9);
  std::uniform_int_distribution<int> J(0, 4096);
  for (int it = 0; it < 10000; ++it) {
    int x = J(g), y = J(g), z = J(g), w = J(g);
    double dxy = o.distance(x, y), dyz = o.distance(y, z), dxz = o.distance(x, z);
    CHECK(dxy == o.distance(y, x));
    CHECK(dxy >= 0.0);
    CHECK(o.distance(x, x) == 0.0);
    CHECK(dxy >= std::abs(f.values[x] - f.values[y]) - 1e-12);
    CHECK(dxz <= dxy + dyz + 1e-12);
    double s[] = {o.distance(w, x) + o.distance(y, z), o.distance(w, y) + o.distance(x, z),
                  o.distance(w, z) + o.distance(x, y)};
    std::sort(s, s + 3);
    CHECK(s[2] - s[1] <= 1e-9);
  }
}

TEST_CASE("distance matrices") {
  DistanceOracle zero(std::vector<double>(17, 0.0));
  auto z = sample_distance_matrix(zero, 1, 1);
  CHECK(z.size == 2);
  for (double v : z.entries) CHECK(v == 0.0);
  CHECK_THROWS(sample_distance_matrix(zero, 0, 1));

  auto o = build_oracle(crt_excursion(4, 10, 2048));
  auto d = sample_distance_matrix(o, 40, 7);
  CHECK(d.points[0] == 0);
  for (int i = 0; i <= 40; ++i) {
    CHECK(d(i, i) == 0.0);
    CHECK(d(0, i) == o.height(d.points[i]));
    for (int j = 0; j <= 40; ++j) {
      CHECK(d(i, j) == d(j, i));
      for (int k = 0; k <= 40; k += 9) CHECK(d(i, j) <= d(i, k) + d(k, j) + 1e-12);
    }
  }
  // the first n points do not depend on how many are drawn, so the row-0 maximum grows with n
  double prev = 0;
  for (int n = 1; n <= 200; n += 11) {
    auto dn = sample_distance_matrix(o, n, 7);
    double mx = 0;
    for (int i = 1; i <= n; ++i) mx = std::max(mx, dn(0, i));
    CHECK(mx >= prev);
    prev = mx;
  }
  CHECK(prev <= o.values()[0] + *std::max_element(o.values().begin(), o.values().end()));

  // exchangeability of indices 1..n for a fixed excursion
  std::vector<double> e01, e02, e12, e23;
  for (int s = 0; s < 4000; ++s) {
    auto m = sample_distance_matrix(o, 3, 1000 + s);
    e01.push_back(m(0, 1));
    e02.push_back(m(0, 2));
    e12.push_back(m(1, 2));
    e23.push_back(m(2, 3));
  }
  CHECK(two_sample_stat(e01, e02).p_value > 0.001);
  CHECK(two_sample_stat(e12, e23).p_value > 0.001);
}

TEST_CASE("exact distance matrices") {
  const DecompositionSpec spec = DecompositionSpec::make(
      StructuralTree::from_parents(std::vector<int>{1, 1}), ScalingLaw::shared_dirichlet({0.5, 0.5, 0.5}), 1.0);
  ParameterTree pt(spec, 3);
  auto d = sample_distance_matrix_exact(pt, 8, 12, 9);
  CHECK(d.size == 13);
  CHECK(d.times[0] == 0.0);
  auto o = build_oracle(sample_excursion(pt, 8, 1 << 15));
  for (int i = 0; i <= 12; ++i) {
    CHECK(d(i, i) == 0.0);
    CHECK(d(0, i) == doctest::Approx(evaluate_lazy(pt, 8, d.times[i])).epsilon(1e-12));
    for (int j = 0; j <= 12; ++j) {
      CHECK(d(i, j) == d(j, i));
      CHECK(d(i, j) >= -1e-12);
      for (int k = 0; k <= 12; ++k) CHECK(d(i, j) <= d(i, k) + d(k, j) + 1e-12);
      // the grid misses part of each dip, so it never sees a longer distance
      if (i > 0 && j > 0) CHECK(tree_distance(o, d.times[i], d.times[j]) <= d(i, j) + 0.05);
    }
  }
  CHECK_THROWS(sample_distance_matrix_exact(pt, 8, 0, 1));
}

TEST_CASE("two-sample KS harness") {
  std::mt19937_64 g(1);
  std::normal_distribution<double> N(0, 1);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = N(g);
  CHECK(two_sample_stat(a, a).statistic == 0.0);
  CHECK(two_sample_stat(a, a).p_value == doctest::Approx(1.0));
  for (auto& v : b) v = N(g) + 1.0;
  CHECK(two_sample_stat(a, b).p_value < 1e-6);
  CHECK(kolmogorov_sf(1.36) == doctest::Approx(0.0494).epsilon(0.01));
  CHECK(kolmogorov_sf(1.63) == doctest::Approx(0.0098).epsilon(0.02));

  auto spec = DecompositionSpec::make(StructuralTree::from_parents(std::vector<int>{1, 1}),
                                      ScalingLaw::shared_dirichlet({0.5, 0.5, 0.5}), 1.0);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto x = sample_height_perpetuity(spec, 10, 500, 2 * trial + 1);
    auto y = sample_height_perpetuity(spec, 10, 500, 2 * trial + 2);
    ok += two_sample_stat(x, y).p_value > 0.01;
  }
  CHECK(ok >= 95);
}
