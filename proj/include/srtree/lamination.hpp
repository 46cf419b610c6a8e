#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <ext/pb_ds/assoc_container.hpp>
#include <ext/pb_ds/tree_policy.hpp>

#include "srtree/random.hpp"
#include "srtree/stats.hpp"

namespace srtree {

struct Fragment {
  std::vector<std::pair<double, double>> arcs;  // [a, b) pieces of the circle, by position; empty for polygons
  bool essential = true;
  double representative = 0.0;  // midpoint of the first arc; first vertex for polygons
  double trace() const;
};

// State of a disk k-angulation. Circle coordinates live in [0,1).
class CircleConfig {
 public:
  CircleConfig();

  const std::vector<Fragment>& fragments() const { return fragments_; }
  const std::vector<int>& essential() const { return essential_; }
  const std::vector<std::pair<double, double>>& edges() const { return edges_; }
  long long attempts() const { return attempts_; }
  long long insertions() const { return insertions_; }
  long long perturbations() const { return perturbations_; }

  // essential fragment whose trace holds s (right-continuous at boundary points)
  int fragment_at(double s) const;
  // number of edges (p, q) with p <= s < q
  int separating(double s) const;
  // edges separating the fragment from the one holding 0
  int depth(int f) const;
  bool is_boundary_point(double s) const;

  // points must be sorted, distinct and inside the trace of fragment f
  void split_fragment(int f, std::vector<double> points);

  void count_attempt() { ++attempts_; }
  // moves points that hit existing boundary points or each other by one ulp
  void separate(std::vector<double>& points);

 private:
  std::map<double, int> arcs_;  // arc start -> owning fragment
  std::vector<Fragment> fragments_;
  std::vector<int> essential_;
  std::vector<int> slot_;  // position in essential_, -1 if not essential
  std::vector<std::pair<double, double>> edges_;
  using Keys = __gnu_pbds::tree<std::pair<double, long long>, __gnu_pbds::null_type,
                                std::less<std::pair<double, long long>>, __gnu_pbds::rb_tree_tag,
                                __gnu_pbds::tree_order_statistics_node_update>;
  Keys starts_, ends_;
  long long attempts_ = 0, insertions_ = 0, perturbations_ = 0;
};

inline CircleConfig new_disk() { return CircleConfig(); }

// one attempt of the recursive model; true if the k-gon was inserted
bool attempt_recursive(CircleConfig& c, int k, CounterRng& g);
// one insertion of the homogeneous model
void insert_homogeneous(CircleConfig& c, int k, CounterRng& g);

int height_at(const CircleConfig& c, double s);
// edges (p,q) with exactly one of {s, 0} in [p, q)
int height_bruteforce(const CircleConfig& c, double s);
// true if no two edges cross (shared endpoints allowed)
bool non_crossing(const CircleConfig& c);
double essential_trace(const CircleConfig& c);

enum class LaminationModel { recursive, homogeneous };
LaminationModel parse_lamination_model(const std::string& s);
std::string to_string(LaminationModel m);

struct Checkpoint {
  long long n = 0;           // attempts (recursive) or insertions (homogeneous)
  long long polygons = 0;    // N_n
  long long attempts = 0;
  double mean_height = 0.0;  // over the fixed evaluation points
};

struct ScalingRun {
  LaminationModel model = LaminationModel::recursive;
  int k = 2;
  std::uint64_t seed = 0;
  std::vector<Checkpoint> checkpoints;
  std::vector<int> final_profile;  // heights on the profile grid at the last checkpoint
};

// geometric schedule from first to last with per_decade points
std::vector<long long> geometric_checkpoints(long long first, long long last, int per_decade);

ScalingRun run_experiment(LaminationModel model, int k, const std::vector<long long>& checkpoints,
                          std::uint64_t seed, int eval_points = 256, int profile_grid = 0);

struct ExponentFit {
  LineFit height, polygons;
  double height_prefactor = 0.0, polygon_prefactor = 0.0;
};
// log-log fits on replica-averaged checkpoint statistics with n >= fit_from
ExponentFit fit_exponents(const std::vector<ScalingRun>& runs, long long fit_from);

}  // namespace srtree
