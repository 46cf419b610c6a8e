#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <set>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "srtree/random.hpp"

namespace srtree {

// Plane rooted tree on K nodes labelled in depth-first order.
// Nodes are 0-based here; node 0 is the root. The external parent list
// (configs, CLI) is 1-based with the root omitted.
class StructuralTree {
 public:
  // parents[i-2] is the 1-based parent of node i, i = 2..K.
  static StructuralTree from_parents(std::span<const int> one_based_parents);

  int size() const { return static_cast<int>(parent_.size()); }
  int parent(int i) const { return parent_[i]; }
  const std::vector<int>& children(int i) const { return children_[i]; }
  // strict ancestors of i, root first
  const std::vector<int>& ancestors(int i) const { return ancestors_[i]; }
  // descendants of i including i, increasing
  const std::vector<int>& subtree(int i) const { return subtree_[i]; }
  bool is_leaf(int i) const { return children_[i].empty(); }
  bool is_ancestor(int a, int i) const;  // a strictly above i
  int leaf_count() const { return leaf_count_in_subtree(0); }
  int leaf_count_in_subtree(int i) const { return subtree_leaves_[i]; }
  std::vector<int> leaves() const;
  std::vector<int> internal_nodes() const;
  std::vector<int> one_based_parents() const;
  // {1 + #children(i)}
  std::set<int> degree_set() const;

  // Interval layout of the unit interval split (depends only on the shape).
  int interval_count() const { return static_cast<int>(owner_.size()); }
  int interval_owner(int l) const { return owner_[l]; }
  // 0 for the first (or only) piece, 1 for the second piece of an internal node
  int interval_piece(int l) const { return piece_[l]; }
  // 0-based interval indices of node i (one or two)
  const std::vector<int>& index_set(int i) const { return index_set_[i]; }
  // nodes whose intervals all precede interval l
  const std::vector<int>& completed_before(int l) const { return completed_[l]; }

 private:
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_, ancestors_, subtree_;
  std::vector<int> subtree_leaves_;
  std::vector<int> owner_, piece_;
  std::vector<std::vector<int>> index_set_, completed_;
};

// Joint law of the mass vector R and length vector S.
class ScalingLaw {
 public:
  enum class Kind { shared_dirichlet, product_dirichlet, custom };
  using Sampler = std::function<void(CounterRng&, std::span<double> r, std::span<double> s)>;

  // R = S ~ Dirichlet(params)
  static ScalingLaw shared_dirichlet(std::vector<double> params);
  // R ~ Dirichlet(r_params) independent of S ~ Dirichlet(s_params)
  static ScalingLaw product_dirichlet(std::vector<double> r_params, std::vector<double> s_params);
  static ScalingLaw custom(std::string name, int size, Sampler sampler);

  Kind kind() const { return kind_; }
  int size() const { return size_; }
  bool analytic() const { return kind_ != Kind::custom; }
  const std::string& name() const { return name_; }
  const std::vector<double>& r_params() const { return r_params_; }
  const std::vector<double>& s_params() const { return s_params_; }

  void sample(CounterRng& g, std::span<double> r, std::span<double> s) const;

  // E[R_i^a S_j]
  double moment_rs(int i, double a, int j) const;
  // E[R_i^p]
  double moment_r(int i, double p) const;
  // E[S_j]
  double mean_s(int j) const;

 private:
  Kind kind_ = Kind::custom;
  int size_ = 0;
  std::string name_;
  std::vector<double> r_params_, s_params_;
  Sampler sampler_;
};

// E[prod X_i^{q_i}] for X ~ Dirichlet(params).
double dirichlet_moment(std::span<const double> params, std::span<const double> exponents);

struct UnsupportedLaw : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NoRootError : std::domain_error {
  using std::domain_error::domain_error;
};

enum class MomentMode { automatic, analytic, monte_carlo };

struct MonteCarloOptions {
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
};

struct FunctionalValue {
  double value = 0.0;
  double std_error = 0.0;  // zero for closed forms
};

// Common-random-number estimate of the index functional.
class MonteCarloFunctional {
 public:
  MonteCarloFunctional(const StructuralTree& tree, const ScalingLaw& law, MonteCarloOptions opt);
  FunctionalValue operator()(double a) const;

 private:
  const StructuralTree* tree_;
  int k_;
  std::vector<double> r_, s_;
  std::size_t n_;
};

// F(a) = E[sum_j S_j sum_{i in E_j + {j}} R_i^a]; closed form when available.
FunctionalValue mean_alpha_functional(const StructuralTree& tree, const ScalingLaw& law, double a,
                                      MomentMode mode = MomentMode::automatic,
                                      MonteCarloOptions opt = {});

struct AlphaSolution {
  double alpha = 0.0;
  double lo = 0.0, hi = 0.0;  // final bisection bracket
  double residual = 0.0;      // F(alpha) - 1
  double mc_halfwidth = 0.0;  // 95% half-width on alpha from sampling error; 0 if exact
  int iterations = 0;
};

// Root of F(a) = 1 on [1e-6, 1 - 1e-6]. Throws NoRootError if the
// functional does not straddle 1.
AlphaSolution solve_alpha(const StructuralTree& tree, const ScalingLaw& law, double tol = 1e-13,
                          MomentMode mode = MomentMode::automatic, MonteCarloOptions opt = {});

// Root in (0,1) of k! G(x+2)/G(k+x+1) + (k-1) k! G(x+2)/G(k+x+2) = 1.
double solve_alpha_kgon(int k, double tol = 1e-14);

// Smallest m with sum_i E[R_i^{m alpha}] < 1 (falls back to 1 + floor(1/alpha)).
int moment_threshold(const ScalingLaw& law, double alpha);

struct DecompositionSpec {
  StructuralTree tree;
  ScalingLaw law;
  double alpha = 0.5;
  double mean_height = 1.0;  // c
  int m_star = 3;
  double alpha_halfwidth = 0.0;

  // solves alpha and m_star from (tree, law)
  static DecompositionSpec make(StructuralTree tree, ScalingLaw law, double mean_height,
                                MomentMode mode = MomentMode::automatic, MonteCarloOptions opt = {});
};

// Support of the limiting degree distribution.
std::set<int> predict_degree_set(const StructuralTree& tree);

struct ExitState {
  long long count = 0;
  double log_length = 0.0;  // log L
};

// One step with given split vector s and selected child j.
ExitState exit_chain_step(const StructuralTree& tree, const ExitState& state,
                          std::span<const double> s, int j, CounterRng& g);

// Trajectory of length steps+1 starting at (0, 1).
std::vector<ExitState> simulate_exit_chain(const StructuralTree& tree, const ScalingLaw& law,
                                           std::size_t steps, std::uint64_t seed);

}  // namespace srtree
