#include "srtree/treemetric.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace srtree {

DistanceOracle::DistanceOracle(const GridExcursion& f) : DistanceOracle(f.values) {}

DistanceOracle::DistanceOracle(std::vector<double> values) : f_(std::move(values)) {
  if (f_.size() < 2) throw std::invalid_argument("DistanceOracle: grid needs two or more points");
  for (double v : f_)
    if (!std::isfinite(v)) throw std::invalid_argument("DistanceOracle: non-finite value");
  table_.push_back(f_);
  for (std::size_t w = 1; 2 * w <= f_.size(); w *= 2) {
    const auto& prev = table_.back();
    std::vector<double> next(f_.size() - 2 * w + 1);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::min(prev[i], prev[i + w]);
    table_.push_back(std::move(next));
  }
}

double DistanceOracle::range_min(int x, int y) const {
  if (x > y) std::swap(x, y);
  if (x < 0 || y > resolution()) throw std::out_of_range("DistanceOracle: index out of range");
  unsigned len = static_cast<unsigned>(y - x + 1);
  int lv = std::bit_width(len) - 1;
  return std::min(table_[lv][x], table_[lv][y - (1 << lv) + 1]);
}

int DistanceOracle::index_of(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("DistanceOracle: t outside [0,1]");
  return static_cast<int>(std::lround(t * resolution()));
}

double tree_distance(const DistanceOracle& o, double t, double s) {
  if (!(t >= 0.0 && t <= 1.0 && s >= 0.0 && s <= 1.0))
    throw std::domain_error("tree_distance: arguments must lie in [0,1]");
  if (t > s) std::swap(t, s);
  const int m = o.resolution();
  auto val = [&](double x) {
    double p = x * m;
    int j = std::min(static_cast<int>(p), m - 1);
    double w = p - j;
    return o.height(j) + w * (o.height(j + 1) - o.height(j));
  };
  double ft = val(t), fs = val(s);
  int a = static_cast<int>(std::ceil(t * m)), b = static_cast<int>(std::floor(s * m));
  double mn = std::min(ft, fs);
  if (a <= b) mn = std::min(mn, o.range_min(a, b));
  return ft + fs - 2.0 * mn;
}

DistanceMatrix sample_distance_matrix(const DistanceOracle& oracle, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_distance_matrix: n must be positive");
  CounterRng g(seed, 0x64697374ULL);
  DistanceMatrix d;
  d.size = n + 1;
  d.points.resize(n + 1, 0);
  for (int i = 1; i <= n; ++i) d.points[i] = oracle.index_of(uniform01(g));
  d.entries.assign(static_cast<std::size_t>(d.size) * d.size, 0.0);
  for (int i = 0; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      double v = oracle.distance(d.points[i], d.points[j]);
      d.entries[static_cast<std::size_t>(i) * d.size + j] = v;
      d.entries[static_cast<std::size_t>(j) * d.size + i] = v;
    }
  return d;
}

DistanceMatrix sample_distance_matrix_exact(const ParameterTree& pt, int depth, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_distance_matrix_exact: n must be positive");
  CounterRng g(seed, 0x64697374ULL);
  DistanceMatrix d;
  d.size = n + 1;
  d.times.resize(n + 1, 0.0);
  for (int i = 1; i <= n; ++i) d.times[i] = uniform01(g);
  std::vector<double> h(n + 1, 0.0);
  for (int i = 1; i <= n; ++i) h[i] = evaluate_lazy(pt, depth, d.times[i]);
  d.entries.assign(static_cast<std::size_t>(d.size) * d.size, 0.0);
  for (int i = 0; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      double m = i == 0 ? 0.0 : range_min_exact(pt, depth, d.times[i], d.times[j]);
      double v = h[i] + h[j] - 2.0 * m;
      d.entries[static_cast<std::size_t>(i) * d.size + j] = v;
      d.entries[static_cast<std::size_t>(j) * d.size + i] = v;
    }
  return d;
}

}  // namespace srtree
