#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srtree/excursion.hpp"
#include "srtree/stats.hpp"
#include "srtree/treemetric.hpp"

namespace srtree {

// 1 + the least number of consecutive grid pieces whose oscillation is at most delta.
// A single grid step is always admissible. Greedy farthest advance is optimal since
// admissible pieces are closed under shrinking.
long long divider_count(const GridExcursion& f, double delta);

// Greedy delta-net size in the tree metric over (sub-sampled) grid points.
// Deepest uncovered point x first; the ball is centred at the ancestor of x at distance delta,
// so the chosen points are pairwise more than delta apart.
long long covering_count(const DistanceOracle& oracle, double delta, int sample_size);

struct CountLadder {
  std::vector<double> deltas;  // decreasing
  std::vector<double> counts;
  std::string kind;
  int resolution = 0;
  std::uint64_t seed = 0;
};

// deltas top / 2^k for k = first..last
std::vector<double> dyadic_deltas(double top, int first, int last);
CountLadder divider_ladder(const GridExcursion& f, const std::vector<double>& deltas,
                           std::uint64_t seed = 0);
CountLadder covering_ladder(const DistanceOracle& oracle, const std::vector<double>& deltas,
                            int sample_size, std::uint64_t seed = 0);

struct DimensionFit {
  double slope = 0.0, stderr_ = 0.0;
  int points = 0;
  bool degenerate = false;
};
// least squares of log count on -log delta over ladder entries [first, last)
DimensionFit dimension_fit(const CountLadder& ladder, std::size_t first = 0,
                           std::size_t last = static_cast<std::size_t>(-1));

struct BallMassRow {
  double radius = 0.0, gamma = 0.0;
  std::vector<double> quantiles;  // of mass / radius^gamma
};
struct BallMassOptions {
  std::vector<double> radii;
  std::vector<double> gammas{0.0};
  std::vector<double> levels{0.1, 0.5, 0.9};
  int samples = 200;
  std::uint64_t seed = 1;
};
// Point masses of the grid under the time-changed measure.
std::vector<double> grid_point_masses(const TimeChange& tc);
// masses of open balls B_r(zeta) for every radius, zeta drawn from the measure
std::vector<std::vector<double>> ball_masses(const DistanceOracle& oracle, const TimeChange& tc,
                                             const std::vector<double>& radii, int samples,
                                             std::uint64_t seed);
std::vector<BallMassRow> ball_mass_profile(const DistanceOracle& oracle, const TimeChange& tc,
                                           const BallMassOptions& opt);

// max over lags h (grid units) of |f(x+h) - f(x)| / (h/m)^gamma
double holder_modulus(const GridExcursion& f, double gamma, const std::vector<int>& lags);

}  // namespace srtree
