#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "srtree/fractal.hpp"

using namespace srtree;

namespace {

GridExcursion tent_grid(int m) {
  GridExcursion g;
  for (int j = 0; j <= m; ++j) g.values.push_back(1.0 - std::abs(2.0 * j / m - 1.0));
  return g;
}

// positive random walk bridge lifted to an excursion
GridExcursion random_excursion(int m, std::mt19937_64& g) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  GridExcursion e;
  e.values.assign(m + 1, 0.0);
  for (int j = 1; j < m; ++j) e.values[j] = U(g) + 0.3 * std::sin(3.14159 * j / m);
  return e;
}

// smallest number of time points over all grid subsets; pieces have oscillation <= delta or are single steps
long long divider_bruteforce(const GridExcursion& f, double delta) {
  const int m = f.resolution();
  long long best = m + 1;
  for (unsigned mask = 0; mask < (1u << (m - 1)); ++mask) {
    int count = 2, prev = 0;
    bool ok = true;
    for (int j = 1; j <= m && ok; ++j) {
      if (j < m && !(mask >> (j - 1) & 1u)) continue;
      if (j < m) ++count;
      auto [lo, hi] = std::minmax_element(f.values.begin() + prev, f.values.begin() + j + 1);
      ok = j - prev == 1 || *hi - *lo <= delta;
      prev = j;
    }
    if (ok) best = std::min<long long>(best, count);
  }
  return best;
}

std::vector<std::vector<double>> distances(const DistanceOracle& o) {
  const int n = o.resolution() + 1;
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d[i][j] = o.distance(i, j);
  return d;
}

// largest set of points pairwise more than r apart
int packing_bruteforce(const std::vector<std::vector<double>>& d, double r) {
  const int n = static_cast<int>(d.size());
  int best = 0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    int c = __builtin_popcount(mask);
    if (c <= best) continue;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i)
      for (int j = i + 1; j < n && ok; ++j)
        if ((mask >> i & 1u) && (mask >> j & 1u) && d[i][j] <= r) ok = false;
    if (ok) best = c;
  }
  return best;
}

// fewest closed r-balls centred at points covering every point, searched up to size cap
int cover_bruteforce(const std::vector<std::vector<double>>& d, double r, int cap) {
  const int n = static_cast<int>(d.size());
  std::vector<int> pick;
  auto covers = [&] {
    for (int z = 0; z < n; ++z) {
      bool hit = false;
      for (int i : pick) hit = hit || d[i][z] <= r;
      if (!hit) return false;
    }
    return true;
  };
  std::function<bool(int, int)> search = [&](int from, int size) {
    if (static_cast<int>(pick.size()) == size) return covers();
    for (int i = from; i < n; ++i) {
      pick.push_back(i);
      if (search(i + 1, size)) return true;
      pick.pop_back();
    }
    return false;
  };
  for (int size = 1; size <= cap; ++size)
    if (search(0, size)) return size;
  return cap + 1;
}

DecompositionSpec h_spec() {
  return DecompositionSpec::make(StructuralTree::from_parents(std::vector<int>{1}),
                                 ScalingLaw::product_dirichlet({1.0, 1.0}, {2.0, 1.0}),
                                 1.0 / std::tgamma(4.0 / 3.0));
}

}  // namespace

TEST_CASE("divider count examples") {
  GridExcursion zero{std::vector<double>(33, 0.0)};
  for (double d : {1e-3, 0.5, 10.0}) CHECK(divider_count(zero, d) == 2);
  auto tent = tent_grid(12);
  // [1/4, 3/4] has oscillation exactly 1/2
  CHECK(divider_count(tent, 0.5) == 4);
  CHECK(divider_bruteforce(tent, 0.5) == 4);
  CHECK(divider_count(tent, 0.49) == 6);
  CHECK(divider_bruteforce(tent, 0.49) == 6);
  CHECK(divider_count(tent, 1.0) == 2);
  CHECK(divider_count(tent_grid(1024), 0.5) == 4);
  CHECK_THROWS(divider_count(tent, 0.0));
}

TEST_CASE("divider count equals the brute-force optimum") {
  std::mt19937_64 g(11);
  for (int rep = 0; rep < 40; ++rep) {
    auto f = random_excursion(13, g);
    for (double d : {0.05, 0.2, 0.45, 0.8, 1.5}) CHECK(divider_count(f, d) == divider_bruteforce(f, d));
  }
}

TEST_CASE("divider count: monotone in delta and invariant under reparametrisation") {
  std::mt19937_64 g(12);
  std::uniform_int_distribution<int> rep_len(1, 4);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    GridExcursion a;
    a.values.assign(513, 0.0);
    for (int j = 1; j < 512; ++j) a.values[j] = std::abs(a.values[j - 1] + N(g) / 64);
    double step = 0;
    for (int j = 0; j < 512; ++j) step = std::max(step, std::abs(a.values[j + 1] - a.values[j]));
    // nondecreasing surjective warp: every grid index held for 1..4 steps
    GridExcursion b;
    for (int j = 0; j <= 512; ++j)
      for (int k = rep_len(g); k > 0; --k) b.values.push_back(a.values[j]);
    long long prev = 0;
    for (int k = 0; k <= 12; ++k) {
      double d = std::ldexp(2.0, -k);
      if (d < step) break;
      long long ca = divider_count(a, d);
      CHECK(ca == divider_count(b, d));
      CHECK(ca >= prev);
      prev = ca;
    }
  }
}

TEST_CASE("covering count") {
  DistanceOracle zero(std::vector<double>(65, 0.0));
  CHECK(covering_count(zero, 0.1, 0) == 1);
  auto tent = build_oracle(tent_grid(63));
  CHECK(covering_count(tent, 1.0, 0) == 1);
  CHECK(covering_count(tent, 0.4, 0) == 2);
  CHECK(cover_bruteforce(distances(tent), 0.4, 3) == 2);
  CHECK_THROWS(covering_count(tent, -1.0, 0));
}

TEST_CASE("covering count packing sandwich on brute-forceable instances") {
  std::mt19937_64 g(13);
  for (int rep = 0; rep < 30; ++rep) {
    auto o = build_oracle(random_excursion(11, g));
    auto d = distances(o);
    for (double delta : {0.1, 0.25, 0.5, 0.9}) {
      long long c = covering_count(o, delta, 0);
      INFO("rep " << rep << " delta " << delta);
      CHECK(packing_bruteforce(d, 2 * delta) <= c);
      CHECK(c <= packing_bruteforce(d, delta));
      CHECK(c <= cover_bruteforce(d, delta / 2, 12));
    }
  }
}

TEST_CASE("dimension fit") {
  CountLadder l;
  l.deltas = dyadic_deltas(1.0, 1, 10);
  for (double d : l.deltas) l.counts.push_back(std::pow(d, -2.0));
  auto fit = dimension_fit(l);
  CHECK(std::abs(fit.slope - 2.0) < 1e-12);
  CHECK(fit.stderr_ < 1e-12);
  CHECK_FALSE(fit.degenerate);
  CountLadder flat = l;
  std::fill(flat.counts.begin(), flat.counts.end(), 2.0);
  auto f2 = dimension_fit(flat);
  CHECK(f2.degenerate);
  CHECK(f2.slope == 0.0);
  CHECK_THROWS(dimension_fit(l, 0, 3));

  auto tent = tent_grid(1 << 12);
  auto lad = divider_ladder(tent, dyadic_deltas(1.0, 1, 10));
  for (std::size_t i = 1; i < lad.counts.size(); ++i) CHECK(lad.counts[i] >= lad.counts[i - 1]);
  CHECK(dimension_fit(lad, 2, 10).slope == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("ball masses") {
  auto spec = h_spec();
  ParameterTree pt(spec, 31);
  const int m = 1 << 12;
  auto f = sample_excursion(pt, 12, m);
  auto tc = build_time_change(pt, 12, m);
  auto o = build_oracle(f);
  double diam = 2 * f.sup();
  std::vector<double> radii = {diam / 64, diam / 16, diam / 4, 2 * diam};
  auto masses = ball_masses(o, tc, radii, 300, 5);
  for (std::size_t s = 0; s < 300; ++s) {
    for (std::size_t r = 0; r < radii.size(); ++r) {
      CHECK(masses[r][s] >= 0.0);
      CHECK(masses[r][s] <= 1.0);
      if (r) CHECK(masses[r][s] >= masses[r - 1][s]);
    }
    CHECK(masses.back()[s] == doctest::Approx(1.0));
  }
  BallMassOptions opt;
  opt.radii = radii;
  for (auto& row : ball_mass_profile(o, tc, opt))
    for (double q : row.quantiles) CHECK(q <= 1.0);
  double total = 0;
  for (double p : grid_point_masses(tc)) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ball mass exponent diagnostic on the homogeneous tree") {
  auto spec = h_spec();
  const int m = 1 << 15;
  TimeChange uniform;
  for (int j = 0; j <= m; ++j) uniform.values.push_back(static_cast<double>(j) / m);
  int ok = 0;
  for (int seed = 0; seed < 3; ++seed) {
    ParameterTree pt(spec, 41 + seed);
    auto f = sample_excursion_mass_time(pt, 20, m);
    auto o = build_oracle(f);
    BallMassOptions opt;
    for (int k = 1; k <= 4; ++k) opt.radii.push_back(f.sup() * std::ldexp(1.0, -k));
    opt.gammas = {2.5, 3.5};
    opt.levels = {0.5};
    opt.samples = 300;
    opt.seed = seed;
    std::vector<double> low, high;
    for (auto& r : ball_mass_profile(o, uniform, opt)) (r.gamma == 2.5 ? low : high).push_back(r.quantiles[0]);
    MESSAGE("gamma 2.5 medians " << low.front() << " -> " << low.back() << ", gamma 3.5 " << high.front()
                                 << " -> " << high.back());
    ok += high.back() > 3 * high.front() && low.back() < 2 * low.front();
  }
  CHECK(ok >= 2);
}

TEST_CASE("Holder modulus") {
  GridExcursion zero{std::vector<double>(65, 0.0)};
  CHECK(holder_modulus(zero, 0.5, {1, 2, 4}) == 0.0);
  CHECK(holder_modulus(tent_grid(64), 1.0, {1, 3, 8}) == doctest::Approx(2.0));
  CHECK_THROWS(holder_modulus(zero, 1.5, {1}));

  auto dyadic = [](int m) {
    std::vector<int> lags;
    for (int h = 1; h < m; h *= 2) lags.push_back(h);
    return lags;
  };
  // all dyadic lags: grids share points, so refining can only raise the modulus
  auto growth = [&](const DecompositionSpec& spec, std::uint64_t seed, int depth) {
    ParameterTree pt(spec, seed);
    double prev = 0, first = 0;
    for (int k = 10; k <= 16; k += 2) {
      double v = holder_modulus(sample_excursion(pt, depth, 1 << k), 0.2, dyadic(1 << k));
      CHECK(v >= prev);
      if (k == 10) first = v;
      prev = v;
    }
    return prev / first;
  };
  int grows = 0;
  for (int seed = 0; seed < 10; ++seed) grows += growth(h_spec(), 500 + seed, 24) > 1.25;
  MESSAGE("homogeneous tree modulus grew in " << grows << " of 10 seeds");
  CHECK(grows >= 9);
  auto crt = DecompositionSpec::make(StructuralTree::from_parents(std::vector<int>{1, 1}),
                                     ScalingLaw::shared_dirichlet({0.5, 0.5, 0.5}), 2.5);
  for (int seed = 0; seed < 4; ++seed) CHECK(growth(crt, 500 + seed, 14) < 1.15);
}
