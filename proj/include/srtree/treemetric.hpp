#pragma once

#include <cstdint>
#include <vector>

#include "srtree/excursion.hpp"
#include "srtree/stats.hpp"

namespace srtree {

// d_f(x,y) = f(x) + f(y) - 2 min_[x,y] f on grid indices, via a sparse table.
class DistanceOracle {
 public:
  explicit DistanceOracle(const GridExcursion& f);
  explicit DistanceOracle(std::vector<double> values);

  int resolution() const { return static_cast<int>(f_.size()) - 1; }
  const std::vector<double>& values() const { return f_; }
  double height(int x) const { return f_[x]; }
  double range_min(int x, int y) const;
  double distance(int x, int y) const { return f_[x] + f_[y] - 2.0 * range_min(x, y); }
  // nearest grid index of t
  int index_of(double t) const;

 private:
  std::vector<double> f_;
  std::vector<std::vector<double>> table_;
};

inline DistanceOracle build_oracle(const GridExcursion& f) { return DistanceOracle(f); }

// pseudo-distance for real t, s (grid resolution, linear interpolation of endpoints)
double tree_distance(const DistanceOracle& oracle, double t, double s);

// (n+1) x (n+1) matrix for the root and n uniform points; row-major.
struct DistanceMatrix {
  int size = 0;
  std::vector<double> entries;
  std::vector<int> points;  // grid indices, points[0] = 0
  std::vector<double> times;  // exact sampler only, times[0] = 0
  double operator()(int i, int j) const { return entries[static_cast<std::size_t>(i) * size + j]; }
};
DistanceMatrix sample_distance_matrix(const DistanceOracle& oracle, int n, std::uint64_t seed);
// Same for Q_depth evaluated exactly at uniform times, no grid.
DistanceMatrix sample_distance_matrix_exact(const ParameterTree& pt, int depth, int n, std::uint64_t seed);

inline KsResult two_sample_stat(std::vector<double> a, std::vector<double> b) {
  return ks_two_sample(std::move(a), std::move(b));
}

}  // namespace srtree
