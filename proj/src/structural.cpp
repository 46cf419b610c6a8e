#include "srtree/structural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace srtree {

StructuralTree StructuralTree::from_parents(std::span<const int> one_based_parents) {
  StructuralTree t;
  const int k = static_cast<int>(one_based_parents.size()) + 1;
  if (k < 2) throw std::invalid_argument("structural tree needs K >= 2 nodes");
  t.parent_.assign(k, -1);
  t.children_.assign(k, {});
  t.ancestors_.assign(k, {});
  for (int i = 1; i < k; ++i) {
    int p = one_based_parents[i - 1] - 1;
    if (p < 0 || p >= i)
      throw std::invalid_argument("parent of node " + std::to_string(i + 1) + " must lie in [1, " +
                                  std::to_string(i) + "], got " +
                                  std::to_string(one_based_parents[i - 1]));
    // depth-first labels: the new node hangs off the path from the root to node i-1
    const auto& path = t.ancestors_[i - 1];
    if (p != i - 1 && std::find(path.begin(), path.end(), p) == path.end())
      throw std::invalid_argument("labels are not depth-first: node " + std::to_string(i + 1) +
                                  " attaches to " + std::to_string(p + 1) +
                                  " which is off the current branch");
    t.parent_[i] = p;
    t.children_[p].push_back(i);
    t.ancestors_[i] = t.ancestors_[p];
    t.ancestors_[i].push_back(p);
  }
  t.subtree_.assign(k, {});
  t.subtree_leaves_.assign(k, 0);
  for (int i = k - 1; i >= 0; --i) {
    auto& sub = t.subtree_[i];
    sub.push_back(i);
    if (t.children_[i].empty()) t.subtree_leaves_[i] = 1;
    for (int c : t.children_[i]) {
      sub.insert(sub.end(), t.subtree_[c].begin(), t.subtree_[c].end());
      t.subtree_leaves_[i] += t.subtree_leaves_[c];
    }
    std::sort(sub.begin(), sub.end());
  }

  // contour order: first piece, children blocks, second piece
  t.index_set_.assign(k, {});
  std::function<void(int)> walk = [&](int i) {
    t.index_set_[i].push_back(static_cast<int>(t.owner_.size()));
    t.owner_.push_back(i);
    t.piece_.push_back(0);
    if (t.children_[i].empty()) return;
    for (int c : t.children_[i]) walk(c);
    t.index_set_[i].push_back(static_cast<int>(t.owner_.size()));
    t.owner_.push_back(i);
    t.piece_.push_back(1);
  };
  walk(0);
  const int len = static_cast<int>(t.owner_.size());
  t.completed_.assign(len, {});
  for (int l = 0; l < len; ++l)
    for (int j = 0; j < k; ++j)
      if (t.index_set_[j].back() < l) t.completed_[l].push_back(j);
  return t;
}

bool StructuralTree::is_ancestor(int a, int i) const {
  const auto& e = ancestors_[i];
  return std::find(e.begin(), e.end(), a) != e.end();
}

std::vector<int> StructuralTree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (is_leaf(i)) out.push_back(i);
  return out;
}

std::vector<int> StructuralTree::internal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!is_leaf(i)) out.push_back(i);
  return out;
}

std::vector<int> StructuralTree::one_based_parents() const {
  std::vector<int> out;
  for (int i = 1; i < size(); ++i) out.push_back(parent_[i] + 1);
  return out;
}

std::set<int> StructuralTree::degree_set() const {
  std::set<int> d;
  for (int i = 0; i < size(); ++i) d.insert(1 + static_cast<int>(children_[i].size()));
  return d;
}

// ---------------------------------------------------------------------------

namespace {
void check_params(const std::vector<double>& p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty parameter vector");
  for (double a : p)
    if (!(a > 0.0) || !std::isfinite(a))
      throw std::invalid_argument(std::string(what) + ": Dirichlet parameters must be positive");
}
}  // namespace

ScalingLaw ScalingLaw::shared_dirichlet(std::vector<double> params) {
  check_params(params, "shared_dirichlet");
  ScalingLaw l;
  l.kind_ = Kind::shared_dirichlet;
  l.size_ = static_cast<int>(params.size());
  l.name_ = "shared_dirichlet";
  l.r_params_ = params;
  l.s_params_ = std::move(params);
  return l;
}

ScalingLaw ScalingLaw::product_dirichlet(std::vector<double> r_params, std::vector<double> s_params) {
  check_params(r_params, "product_dirichlet");
  check_params(s_params, "product_dirichlet");
  if (r_params.size() != s_params.size())
    throw std::invalid_argument("product_dirichlet: R and S parameter lengths differ");
  ScalingLaw l;
  l.kind_ = Kind::product_dirichlet;
  l.size_ = static_cast<int>(r_params.size());
  l.name_ = "product_dirichlet";
  l.r_params_ = std::move(r_params);
  l.s_params_ = std::move(s_params);
  return l;
}

ScalingLaw ScalingLaw::custom(std::string name, int size, Sampler sampler) {
  if (size < 1) throw std::invalid_argument("custom law: size must be positive");
  if (!sampler) throw std::invalid_argument("custom law: empty sampler");
  ScalingLaw l;
  l.kind_ = Kind::custom;
  l.size_ = size;
  l.name_ = std::move(name);
  l.sampler_ = std::move(sampler);
  return l;
}

void ScalingLaw::sample(CounterRng& g, std::span<double> r, std::span<double> s) const {
  switch (kind_) {
    case Kind::shared_dirichlet:
      sample_dirichlet(g, r_params_, r);
      std::copy(r.begin(), r.end(), s.begin());
      break;
    case Kind::product_dirichlet:
      sample_dirichlet(g, r_params_, r);
      sample_dirichlet(g, s_params_, s);
      break;
    case Kind::custom:
      sampler_(g, r, s);
      break;
  }
}

double dirichlet_moment(std::span<const double> params, std::span<const double> exponents) {
  double a = 0.0, q = 0.0, lg = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    a += params[i];
    q += exponents[i];
    if (exponents[i] != 0.0) lg += std::lgamma(params[i] + exponents[i]) - std::lgamma(params[i]);
  }
  return std::exp(lg + std::lgamma(a) - std::lgamma(a + q));
}

double ScalingLaw::moment_rs(int i, double a, int j) const {
  std::vector<double> e(size_, 0.0);
  switch (kind_) {
    case Kind::shared_dirichlet:
      e[i] += a;
      e[j] += 1.0;
      return dirichlet_moment(r_params_, e);
    case Kind::product_dirichlet:
      return moment_r(i, a) * mean_s(j);
    default:
      throw UnsupportedLaw("moment_rs: law '" + name_ + "' has no closed form");
  }
}

double ScalingLaw::moment_r(int i, double p) const {
  if (kind_ == Kind::custom) throw UnsupportedLaw("moment_r: law '" + name_ + "' has no closed form");
  std::vector<double> e(size_, 0.0);
  e[i] = p;
  return dirichlet_moment(r_params_, e);
}

double ScalingLaw::mean_s(int j) const {
  if (kind_ == Kind::custom) throw UnsupportedLaw("mean_s: law '" + name_ + "' has no closed form");
  return s_params_[j] / std::accumulate(s_params_.begin(), s_params_.end(), 0.0);
}

// ---------------------------------------------------------------------------

namespace {
void check_sizes(const StructuralTree& tree, const ScalingLaw& law) {
  if (tree.size() != law.size())
    throw std::invalid_argument("scaling law has " + std::to_string(law.size()) +
                                " components but the tree has " + std::to_string(tree.size()) +
                                " nodes");
}
}  // namespace

MonteCarloFunctional::MonteCarloFunctional(const StructuralTree& tree, const ScalingLaw& law,
                                           MonteCarloOptions opt)
    : tree_(&tree), k_(tree.size()), n_(opt.samples) {
  check_sizes(tree, law);
  if (n_ < 2) throw std::invalid_argument("MonteCarloFunctional: need at least two samples");
  r_.resize(n_ * k_);
  s_.resize(n_ * k_);
  CounterRng g(opt.seed, 0x616c706861ULL);
  for (std::size_t n = 0; n < n_; ++n)
    law.sample(g, std::span(r_).subspan(n * k_, k_), std::span(s_).subspan(n * k_, k_));
}

FunctionalValue MonteCarloFunctional::operator()(double a) const {
  double sum = 0.0, sum2 = 0.0;
  std::vector<double> ra(k_);
  for (std::size_t n = 0; n < n_; ++n) {
    const double* r = &r_[n * k_];
    const double* s = &s_[n * k_];
    for (int i = 0; i < k_; ++i) ra[i] = std::pow(r[i], a);
    double x = 0.0;
    for (int j = 0; j < k_; ++j) {
      double inner = ra[j];
      for (int i : tree_->ancestors(j)) inner += ra[i];
      x += s[j] * inner;
    }
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n_;
  double var = std::max(0.0, (sum2 - n_ * mean * mean) / (n_ - 1));
  return {mean, std::sqrt(var / n_)};
}

namespace {
bool use_monte_carlo(const ScalingLaw& law, MomentMode mode) {
  if (mode == MomentMode::analytic && !law.analytic())
    throw UnsupportedLaw("analytic moments requested for law '" + law.name() + "'");
  return mode == MomentMode::monte_carlo || !law.analytic();
}
}  // namespace

FunctionalValue mean_alpha_functional(const StructuralTree& tree, const ScalingLaw& law, double a,
                                      MomentMode mode, MonteCarloOptions opt) {
  check_sizes(tree, law);
  if (!(a >= 0.0 && a <= 1.0)) throw std::domain_error("mean_alpha_functional: a outside [0,1]");
  if (use_monte_carlo(law, mode)) return MonteCarloFunctional(tree, law, opt)(a);
  double f = 0.0;
  for (int j = 0; j < tree.size(); ++j) {
    f += law.moment_rs(j, a, j);
    for (int i : tree.ancestors(j)) f += law.moment_rs(i, a, j);
  }
  return {f, 0.0};
}

namespace {
template <class F>
AlphaSolution bisect(F&& f, double tol) {
  AlphaSolution sol;
  double lo = 1e-6, hi = 1.0 - 1e-6;
  double flo = f(lo) - 1.0, fhi = f(hi) - 1.0;
  if (!(flo > 0.0 && fhi < 0.0))
    throw NoRootError("no root of the index equation in (0,1): F(1e-6)-1 = " +
                            std::to_string(flo) + ", F(1-1e-6)-1 = " + std::to_string(fhi));
  double mid = 0.5 * (lo + hi), fm = f(mid) - 1.0;
  int it = 1;
  for (; it < 200 && std::abs(fm) > tol && hi - lo > 1e-16; ++it) {
    if (fm > 0.0)
      lo = mid;
    else
      hi = mid;
    mid = 0.5 * (lo + hi);
    fm = f(mid) - 1.0;
  }
  sol.alpha = mid;
  sol.lo = lo;
  sol.hi = hi;
  sol.residual = fm;
  sol.iterations = it;
  return sol;
}
}  // namespace

AlphaSolution solve_alpha(const StructuralTree& tree, const ScalingLaw& law, double tol,
                          MomentMode mode, MonteCarloOptions opt) {
  check_sizes(tree, law);
  if (!(tol > 0.0)) throw std::invalid_argument("solve_alpha: tol must be positive");
  if (!use_monte_carlo(law, mode))
    return bisect([&](double a) { return mean_alpha_functional(tree, law, a).value; }, tol);
  MonteCarloFunctional mc(tree, law, opt);
  AlphaSolution sol = bisect([&](double a) { return mc(a).value; }, tol);
  // delta method: se(F) / |F'(alpha)|
  double h = 1e-4;
  double d = (mc(sol.alpha + h).value - mc(sol.alpha - h).value) / (2 * h);
  sol.mc_halfwidth = 1.96 * mc(sol.alpha).std_error / std::abs(d);
  return sol;
}

double solve_alpha_kgon(int k, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_alpha_kgon: tol must be positive");
  if (k < 2) throw std::invalid_argument("solve_alpha_kgon: k must be at least 2");
  const double lk = std::lgamma(k + 1.0);
  auto g = [&](double x) {
    double a = std::exp(lk + std::lgamma(x + 2) - std::lgamma(k + x + 1));
    double b = (k - 1) * std::exp(lk + std::lgamma(x + 2) - std::lgamma(k + x + 2));
    return a + b;
  };
  return bisect(g, tol).alpha;
}

int moment_threshold(const ScalingLaw& law, double alpha) {
  if (!law.analytic()) return 1 + static_cast<int>(std::floor(1.0 / alpha));
  for (int m = 1; m < 10000; ++m) {
    double s = 0.0;
    for (int i = 0; i < law.size(); ++i) s += law.moment_r(i, m * alpha);
    if (s < 1.0 - 1e-9) return m;
  }
  throw std::domain_error("moment_threshold: no m found");
}

DecompositionSpec DecompositionSpec::make(StructuralTree tree, ScalingLaw law, double mean_height,
                                          MomentMode mode, MonteCarloOptions opt) {
  if (!(mean_height >= 0.0)) throw std::invalid_argument("mean height must be non-negative");
  AlphaSolution a = solve_alpha(tree, law, 1e-13, mode, opt);
  DecompositionSpec d{std::move(tree), std::move(law), a.alpha, mean_height, 0, a.mc_halfwidth};
  d.m_star = moment_threshold(d.law, d.alpha);
  return d;
}

std::set<int> predict_degree_set(const StructuralTree& tree) {
  std::set<int> d = tree.degree_set();
  if (d == std::set<int>{1, 2}) return {1, 2, 3};
  d.insert(2);
  return d;
}

ExitState exit_chain_step(const StructuralTree& tree, const ExitState& state,
                          std::span<const double> s, int j, CounterRng& g) {
  if (j < 0 || j >= tree.size()) throw std::out_of_range("exit_chain_step: bad child index");
  ExitState next;
  std::binomial_distribution<long long> bin(state.count, s[j]);
  next.count = (tree.is_leaf(j) ? 0 : 1) + (state.count > 0 ? bin(g) : 0);
  next.log_length = state.log_length + std::log(s[j]);
  return next;
}

std::vector<ExitState> simulate_exit_chain(const StructuralTree& tree, const ScalingLaw& law,
                                           std::size_t steps, std::uint64_t seed) {
  check_sizes(tree, law);
  CounterRng g(seed, 0x65786974ULL);
  const int k = tree.size();
  std::vector<double> r(k), s(k);
  std::vector<ExitState> path;
  path.reserve(steps + 1);
  path.push_back({});
  for (std::size_t n = 0; n < steps; ++n) {
    law.sample(g, r, s);
    int j = sample_index(g, s);
    path.push_back(exit_chain_step(tree, path.back(), s, j, g));
  }
  return path;
}

}  // namespace srtree
