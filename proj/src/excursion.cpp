#include "srtree/excursion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace srtree {

IntervalDecomposition::IntervalDecomposition(const StructuralTree& tree, std::span<const double> s,
                                             std::span<const double> u)
    : tree_(&tree), s_(s.begin(), s.end()), u_(u.begin(), u.end()) {
  const int k = tree.size();
  if (static_cast<int>(s.size()) != k || static_cast<int>(u.size()) != k)
    throw std::invalid_argument("IntervalDecomposition: s and u need one entry per node");
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    if (!(s[i] > 0.0)) throw std::invalid_argument("IntervalDecomposition: s must be positive");
    total += s[i];
    if (!tree.is_leaf(i) && !(u[i] > 0.0 && u[i] < 1.0))
      throw std::invalid_argument("IntervalDecomposition: split points must lie in (0,1)");
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("IntervalDecomposition: s must sum to 1");
  const int len = tree.interval_count();
  lo_.resize(len);
  hi_.resize(len);
  double acc = 0.0;
  for (int l = 0; l < len; ++l) {
    int i = tree.interval_owner(l);
    double w = tree.is_leaf(i) ? s[i] : (tree.interval_piece(l) == 0 ? u[i] : 1.0 - u[i]) * s[i];
    lo_[l] = acc;
    acc += w;
    hi_[l] = acc;
  }
  hi_[len - 1] = 1.0;
}

int IntervalDecomposition::locate(double t) const {
  auto it = std::lower_bound(hi_.begin(), hi_.end(), t);
  if (it == hi_.end()) return interval_count() - 1;
  return static_cast<int>(it - hi_.begin());
}

std::vector<std::pair<double, double>> IntervalDecomposition::region(int i) const {
  std::vector<std::pair<double, double>> out;
  for (int l : tree_->index_set(i)) out.emplace_back(lo_[l], hi_[l]);
  return out;
}

double IntervalDecomposition::to_local(int l, double t) const {
  int i = owner(l);
  double base = piece(l) == 0 ? 0.0 : u_[i];
  // piece ends map exactly, so the endpoints of [0,1] stay fixed points
  if (t <= lo_[l]) return base;
  if (t >= hi_[l]) return (tree_->is_leaf(i) || piece(l) == 1) ? 1.0 : u_[i];
  double x = base + (t - lo_[l]) / s_[i];
  return std::clamp(x, 0.0, 1.0);
}

double IntervalDecomposition::from_local(int i, double x) const {
  const auto& v = tree_->index_set(i);
  if (v.size() == 1 || x <= u_[i]) return lo_[v[0]] + x * s_[i];
  return lo_[v[1]] + (x - u_[i]) * s_[i];
}

// ---------------------------------------------------------------------------

namespace {
double interp(const std::vector<double>& v, double t) {
  const int m = static_cast<int>(v.size()) - 1;
  if (m <= 0) return v.empty() ? 0.0 : v[0];
  double x = std::clamp(t, 0.0, 1.0) * m;
  int j = std::min(static_cast<int>(x), m - 1);
  double w = x - j;
  return v[j] + w * (v[j + 1] - v[j]);
}
}  // namespace

double GridExcursion::at(double t) const { return interp(values, t); }
double TimeChange::at(double t) const { return interp(values, t); }

double GridExcursion::sup() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

double GridExcursion::integral() const {
  const int m = resolution();
  if (m <= 0) return 0.0;
  double acc = 0.0;
  for (int j = 0; j < m; ++j) acc += values[j] + values[j + 1];
  return acc / (2.0 * m);
}

GridExcursion compose_excursions(const StructuralTree& tree, std::span<const GridExcursion> children,
                                 std::span<const double> r, std::span<const double> s,
                                 std::span<const double> u, double alpha, int m) {
  const int k = tree.size();
  if (static_cast<int>(children.size()) != k || static_cast<int>(r.size()) != k)
    throw std::invalid_argument("compose_excursions: need one child excursion and mass per node");
  if (m < 1) throw std::invalid_argument("compose_excursions: resolution must be positive");
  for (const auto& c : children)
    if (c.resolution() < 1) throw std::invalid_argument("compose_excursions: empty child grid");
  IntervalDecomposition dec(tree, s, u);
  std::vector<double> scale(k), offset(k, 0.0);
  for (int i = 0; i < k; ++i) scale[i] = std::pow(r[i], alpha);
  for (int i = 0; i < k; ++i)
    for (int j : tree.ancestors(i)) offset[i] += scale[j] * children[j].at(u[j]);
  GridExcursion g;
  g.values.resize(m + 1);
  for (int j = 0; j <= m; ++j) {
    double t = static_cast<double>(j) / m;
    int l = dec.locate(t);
    int i = dec.owner(l);
    g.values[j] = scale[i] * children[i].at(dec.to_local(l, t)) + offset[i];
  }
  g.values[0] = 0.0;
  g.values[m] = 0.0;
  return g;
}

BaseProfile parse_base_profile(const std::string& name) {
  if (name == "arch") return BaseProfile::arch;
  if (name == "tent") return BaseProfile::tent;
  if (name == "parabola") return BaseProfile::parabola;
  throw std::invalid_argument("unknown base profile '" + name + "' (arch, tent, parabola)");
}

std::string to_string(BaseProfile p) {
  switch (p) {
    case BaseProfile::arch: return "arch";
    case BaseProfile::tent: return "tent";
    case BaseProfile::parabola: return "parabola";
  }
  return "?";
}

double base_profile(BaseProfile p, double c, double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  switch (p) {
    case BaseProfile::arch: return 8.0 * c / std::numbers::pi * std::sqrt(t * (1.0 - t));
    case BaseProfile::tent: return 4.0 * c * std::min(t, 1.0 - t);
    case BaseProfile::parabola: return 6.0 * c * t * (1.0 - t);
  }
  return 0.0;
}

Address Address::child(int i) const {
  Address a;
  a.path = path;
  a.path.push_back(static_cast<std::uint8_t>(i));
  a.key = child_key(key, i);
  return a;
}

std::string Address::str() const {
  std::string out;
  for (std::size_t d = 0; d < path.size(); ++d) {
    if (d) out += '.';
    out += std::to_string(path[d] + 1);
  }
  return out;
}

ParameterTree::ParameterTree(const DecompositionSpec& spec, std::uint64_t seed, BaseProfile base)
    : spec_(&spec), seed_(seed), base_(base) {
  if (spec.tree.size() != spec.law.size())
    throw std::invalid_argument("ParameterTree: law and tree sizes differ");
  if (spec.tree.size() > 255) throw std::invalid_argument("ParameterTree: at most 255 children");
}

NodeParams ParameterTree::params(std::uint64_t key) const {
  const int k = spec_->tree.size();
  NodeParams p;
  p.r.resize(k);
  p.s.resize(k);
  p.xi.resize(k);
  p.r_pow.resize(k);
  CounterRng g(seed_, key);
  spec_->law.sample(g, p.r, p.s);
  for (int i = 0; i < k; ++i) {
    p.xi[i] = uniform01(g);
    p.r_pow[i] = std::pow(p.r[i], spec_->alpha);
  }
  return p;
}

double ParameterTree::mass_weight(const Address& a) const {
  double w = 1.0;
  std::uint64_t key = Address::root_key();
  for (auto i : a.path) {
    w *= params(key).r[i];
    key = Address::child_key(key, i);
  }
  return w;
}

double ParameterTree::length_weight(const Address& a) const {
  double w = 1.0;
  std::uint64_t key = Address::root_key();
  for (auto i : a.path) {
    w *= params(key).s[i];
    key = Address::child_key(key, i);
  }
  return w;
}

// ---------------------------------------------------------------------------

namespace {

double ipow(double b, int e) {
  double r = 1.0;
  while (e-- > 0) r *= b;
  return r;
}

void check_budget(int k, int n, std::size_t budget) {
  if (n < 0) throw std::invalid_argument("depth must be non-negative");
  if (ipow(k, n) > static_cast<double>(budget))
    throw std::length_error("resource budget exceeded: " + std::to_string(k) + "^" +
                            std::to_string(n) + " nodes > budget " + std::to_string(budget));
}

GridExcursion build_full(const ParameterTree& pt, std::uint64_t key, int n, int m) {
  GridExcursion g;
  if (n == 0) {
    g.values.resize(m + 1);
    for (int j = 0; j <= m; ++j) g.values[j] = pt.base_value(static_cast<double>(j) / m);
    return g;
  }
  const int k = pt.tree().size();
  std::vector<GridExcursion> children;
  children.reserve(k);
  for (int i = 0; i < k; ++i) children.push_back(build_full(pt, Address::child_key(key, i), n - 1, m));
  NodeParams p = pt.params(key);
  return compose_excursions(pt.tree(), children, p.r, p.s, p.xi, pt.spec().alpha, m);
}

// Shared recursion for Q_n and tau_n at a batch of points.
void eval_batch(const ParameterTree& pt, std::uint64_t key, int n, std::span<const double> ts,
                std::span<double> out, bool time_change) {
  if (n == 0) {
    for (std::size_t q = 0; q < ts.size(); ++q) out[q] = time_change ? ts[q] : pt.base_value(ts[q]);
    return;
  }
  const StructuralTree& tree = pt.tree();
  const int k = tree.size();
  NodeParams p = pt.params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  std::vector<std::vector<double>> pts(k);
  std::vector<int> owner(ts.size()), pos(ts.size()), where(ts.size());
  for (std::size_t q = 0; q < ts.size(); ++q) {
    int l = dec.locate(ts[q]);
    int i = dec.owner(l);
    where[q] = l;
    owner[q] = i;
    pos[q] = static_cast<int>(pts[i].size());
    pts[i].push_back(dec.to_local(l, ts[q]));
  }
  std::vector<char> need(k, 0);
  for (int i = 0; i < k; ++i)
    if (!pts[i].empty())
      for (int j : tree.ancestors(i)) need[j] = 1;
  std::vector<int> anchor(k, -1);
  for (int j = 0; j < k; ++j)
    if (need[j]) {
      anchor[j] = static_cast<int>(pts[j].size());
      pts[j].push_back(p.xi[j]);
    }
  std::vector<std::vector<double>> vals(k);
  for (int i = 0; i < k; ++i) {
    if (pts[i].empty()) continue;
    vals[i].resize(pts[i].size());
    eval_batch(pt, Address::child_key(key, i), n - 1, pts[i], vals[i], time_change);
  }
  const SmallVec& scale = time_change ? p.r : p.r_pow;
  std::vector<double> offset(k, 0.0);
  for (int i = 0; i < k; ++i)
    if (!pts[i].empty())
      for (int j : tree.ancestors(i)) offset[i] += scale[j] * vals[j][anchor[j]];
  std::vector<double> completed;
  if (time_change) {
    completed.assign(dec.interval_count(), 0.0);
    for (int l = 0; l < dec.interval_count(); ++l)
      for (int j : tree.completed_before(l)) completed[l] += p.r[j];
  }
  for (std::size_t q = 0; q < ts.size(); ++q) {
    int i = owner[q];
    out[q] = scale[i] * vals[i][pos[q]] + offset[i] + (time_change ? completed[where[q]] : 0.0);
  }
}

std::vector<double> grid_points(int m) {
  if (m < 1) throw std::invalid_argument("grid resolution must be positive");
  std::vector<double> ts(m + 1);
  for (int j = 0; j <= m; ++j) ts[j] = static_cast<double>(j) / m;
  return ts;
}

}  // namespace

GridExcursion iterate_scheme(const ParameterTree& pt, int n, int m, std::size_t node_budget) {
  check_budget(pt.tree().size(), n, node_budget);
  if (m < 1) throw std::invalid_argument("iterate_scheme: resolution must be positive");
  return build_full(pt, Address::root_key(), n, m);
}

std::vector<double> evaluate_points(const ParameterTree& pt, int n, std::span<const double> ts) {
  if (n < 0) throw std::invalid_argument("evaluate_points: negative depth");
  std::vector<double> out(ts.size());
  eval_batch(pt, Address::root_key(), n, ts, out, false);
  return out;
}

GridExcursion sample_excursion(const ParameterTree& pt, int n, int m) {
  auto ts = grid_points(m);
  GridExcursion g{evaluate_points(pt, n, ts)};
  g.values.front() = 0.0;
  g.values.back() = 0.0;
  return g;
}

std::vector<double> evaluate_time_change_points(const ParameterTree& pt, int n,
                                                std::span<const double> ts) {
  if (n < 0) throw std::invalid_argument("evaluate_time_change_points: negative depth");
  std::vector<double> out(ts.size());
  eval_batch(pt, Address::root_key(), n, ts, out, true);
  return out;
}

namespace {

void inverse_batch(const ParameterTree& pt, std::uint64_t key, int n, std::span<const double> ys,
                   std::span<double> out) {
  if (n == 0) {
    std::copy(ys.begin(), ys.end(), out.begin());
    return;
  }
  const StructuralTree& tree = pt.tree();
  const int k = tree.size();
  NodeParams p = pt.params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  // tau of each internal child at its split point
  std::vector<double> split(k, 1.0);
  for (int i = 0; i < k; ++i)
    if (!tree.is_leaf(i)) {
      double x = p.xi[i], v = 0.0;
      eval_batch(pt, Address::child_key(key, i), n - 1, {&x, 1}, {&v, 1}, true);
      split[i] = std::clamp(v, 0.0, 1.0);
    }
  const int len = dec.interval_count();
  std::vector<double> cum(len + 1, 0.0);
  for (int l = 0; l < len; ++l) {
    int i = dec.owner(l);
    double w = tree.is_leaf(i) ? 1.0 : (dec.piece(l) == 0 ? split[i] : 1.0 - split[i]);
    cum[l + 1] = cum[l] + p.r[i] * w;
  }
  std::vector<std::vector<double>> pts(k);
  std::vector<int> where(ys.size()), pos(ys.size());
  for (std::size_t q = 0; q < ys.size(); ++q) {
    double y = ys[q] * cum[len];
    int l = static_cast<int>(std::lower_bound(cum.begin() + 1, cum.end(), y) - (cum.begin() + 1));
    l = std::min(l, len - 1);
    int i = dec.owner(l);
    double local = (y - cum[l]) / p.r[i] + (dec.piece(l) == 1 ? split[i] : 0.0);
    where[q] = l;
    pos[q] = static_cast<int>(pts[i].size());
    pts[i].push_back(std::clamp(local, 0.0, 1.0));
  }
  std::vector<std::vector<double>> xs(k);
  for (int i = 0; i < k; ++i) {
    if (pts[i].empty()) continue;
    xs[i].resize(pts[i].size());
    inverse_batch(pt, Address::child_key(key, i), n - 1, pts[i], xs[i]);
  }
  for (std::size_t q = 0; q < ys.size(); ++q) {
    int l = where[q];
    int i = dec.owner(l);
    double x = xs[i][pos[q]] - (dec.piece(l) == 1 ? p.xi[i] : 0.0);
    out[q] = std::clamp(dec.lo(l) + x * p.s[i], dec.lo(l), dec.hi(l));
  }
}

}  // namespace

std::vector<double> inverse_time_change_points(const ParameterTree& pt, int n,
                                               std::span<const double> ys) {
  if (n < 0) throw std::invalid_argument("inverse_time_change_points: negative depth");
  for (double y : ys)
    if (!(y >= 0.0 && y <= 1.0)) throw std::domain_error("inverse_time_change_points: y outside [0,1]");
  std::vector<double> out(ys.size());
  inverse_batch(pt, Address::root_key(), n, ys, out);
  return out;
}

GridExcursion sample_excursion_mass_time(const ParameterTree& pt, int n, int m) {
  auto ys = grid_points(m);
  auto ts = inverse_time_change_points(pt, n, ys);
  ts.front() = 0.0;
  ts.back() = 1.0;
  GridExcursion g{evaluate_points(pt, n, ts)};
  g.values.front() = 0.0;
  g.values.back() = 0.0;
  return g;
}

TimeChange build_time_change(const ParameterTree& pt, int n, int m) {
  auto ts = grid_points(m);
  TimeChange tc{evaluate_time_change_points(pt, n, ts)};
  tc.values.front() = 0.0;
  tc.values.back() = 1.0;
  return tc;
}

LazyEvaluator::LazyEvaluator(const ParameterTree& pt, std::size_t cache_capacity)
    : pt_(&pt), capacity_(std::max<std::size_t>(cache_capacity, 1)) {}

double LazyEvaluator::operator()(int n, double t) {
  if (n < 0) throw std::invalid_argument("LazyEvaluator: negative depth");
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("LazyEvaluator: t outside [0,1]");
  return eval(Address::root_key(), n, t);
}

double LazyEvaluator::eval(std::uint64_t key, int n, double t) {
  if (n == 0) return pt_->base_value(t);
  const StructuralTree& tree = pt_->tree();
  NodeParams p = pt_->params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  int l = dec.locate(t);
  int i = dec.owner(l);
  double v = p.r_pow[i] * eval(Address::child_key(key, i), n - 1, dec.to_local(l, t));
  for (int j : tree.ancestors(i)) v += p.r_pow[j] * anchor(Address::child_key(key, j), n - 1, p.xi[j]);
  return v;
}

double LazyEvaluator::anchor(std::uint64_t key, int n, double u) {
  const auto id = std::make_pair(key, n);
  {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    if (it != index_.end()) {
      ++hits_;
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
  }
  double v = eval(key, n, u);
  std::lock_guard lock(mu_);
  if (index_.find(id) == index_.end()) {
    lru_.emplace_front(id, v);
    index_[id] = lru_.begin();
    if (lru_.size() > capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
  }
  return v;
}

namespace {

// uncached spine recursion; anchors of a single point never repeat
double eval_direct(const ParameterTree& pt, std::uint64_t key, int n, double t) {
  if (n == 0) return pt.base_value(t);
  const StructuralTree& tree = pt.tree();
  NodeParams p = pt.params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  int l = dec.locate(t);
  int i = dec.owner(l);
  double v = p.r_pow[i] * eval_direct(pt, Address::child_key(key, i), n - 1, dec.to_local(l, t));
  for (int j : tree.ancestors(i)) v += p.r_pow[j] * eval_direct(pt, Address::child_key(key, j), n - 1, p.xi[j]);
  return v;
}

double tc_direct(const ParameterTree& pt, std::uint64_t key, int n, double t) {
  if (n == 0) return t;
  const StructuralTree& tree = pt.tree();
  NodeParams p = pt.params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  int l = dec.locate(t);
  int i = dec.owner(l);
  double v = p.r[i] * tc_direct(pt, Address::child_key(key, i), n - 1, dec.to_local(l, t));
  for (int j : tree.ancestors(i)) v += p.r[j] * tc_direct(pt, Address::child_key(key, j), n - 1, p.xi[j]);
  for (int j : tree.completed_before(l)) v += p.r[j];
  return v;
}

double tc_path(const ParameterTree& pt, std::uint64_t key, int n, std::span<const std::uint8_t> path, double x) {
  if (path.empty()) return tc_direct(pt, key, n, x);
  const StructuralTree& tree = pt.tree();
  NodeParams p = pt.params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  int l = path.front();
  int i = dec.owner(l);
  double v = p.r[i] * tc_path(pt, Address::child_key(key, i), n - 1, path.subspan(1), x);
  for (int j : tree.ancestors(i)) v += p.r[j] * tc_direct(pt, Address::child_key(key, j), n - 1, p.xi[j]);
  for (int j : tree.completed_before(l)) v += p.r[j];
  return v;
}

// the base profiles are unimodal, so the minimum sits at an endpoint
double range_min(const ParameterTree& pt, std::uint64_t key, int n, double a, double b) {
  if (n == 0) return std::min(pt.base_value(a), pt.base_value(b));
  const StructuralTree& tree = pt.tree();
  NodeParams p = pt.params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  std::vector<double> anchor(tree.size(), -1.0);
  auto anchor_value = [&](int j) {
    if (anchor[j] < 0.0) anchor[j] = eval_direct(pt, Address::child_key(key, j), n - 1, p.xi[j]);
    return anchor[j];
  };
  double best = std::numeric_limits<double>::infinity();
  for (int l = dec.locate(a), last = dec.locate(b); l <= last; ++l) {
    double lo = std::max(a, dec.lo(l)), hi = std::min(b, dec.hi(l));
    if (hi < lo) continue;
    int i = dec.owner(l);
    double off = 0.0;
    for (int j : tree.ancestors(i)) off += p.r_pow[j] * anchor_value(j);
    if (lo <= dec.lo(l) && hi >= dec.hi(l)) {
      best = std::min(best, off);
      continue;
    }
    double x = dec.to_local(l, lo), y = dec.to_local(l, hi);
    if (x > y) std::swap(x, y);
    best = std::min(best, off + p.r_pow[i] * range_min(pt, Address::child_key(key, i), n - 1, x, y));
  }
  return best;
}

}  // namespace

double time_change_at(const ParameterTree& pt, int n, std::span<const std::uint8_t> intervals, double x) {
  if (n < static_cast<int>(intervals.size())) throw std::invalid_argument("time_change_at: path deeper than n");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("time_change_at: x outside [0,1]");
  return tc_path(pt, Address::root_key(), n, intervals, x);
}

double SegmentTimeChange::operator()(std::span<const std::uint8_t> intervals, double x) {
  if (n_ < static_cast<int>(intervals.size())) throw std::invalid_argument("time_change_at: path deeper than n");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("time_change_at: x outside [0,1]");
  return at(Address::root_key(), n_, intervals, x);
}

// keyed by node only: its depth below the root fixes the remaining level count
double SegmentTimeChange::anchor(std::uint64_t key, int n, double xi) {
  auto it = anchors_.find(key);
  if (it != anchors_.end()) return it->second;
  double v = tc_direct(*pt_, key, n, xi);
  anchors_.emplace(key, v);
  return v;
}

double SegmentTimeChange::at(std::uint64_t key, int n, std::span<const std::uint8_t> path, double x) {
  if (path.empty()) return tc_direct(*pt_, key, n, x);
  const StructuralTree& tree = pt_->tree();
  NodeParams p = pt_->params(key);
  IntervalDecomposition dec(tree, p.s, p.xi);
  int l = path.front();
  int i = dec.owner(l);
  double v = p.r[i] * at(Address::child_key(key, i), n - 1, path.subspan(1), x);
  for (int j : tree.ancestors(i)) v += p.r[j] * anchor(Address::child_key(key, j), n - 1, p.xi[j]);
  for (int j : tree.completed_before(l)) v += p.r[j];
  return v;
}

double range_min_exact(const ParameterTree& pt, int n, double a, double b) {
  if (n < 0) throw std::invalid_argument("range_min_exact: negative depth");
  if (a > b) std::swap(a, b);
  if (!(a >= 0.0 && b <= 1.0)) throw std::domain_error("range_min_exact: range outside [0,1]");
  return range_min(pt, Address::root_key(), n, a, b);
}

double evaluate_lazy(const ParameterTree& pt, int n, double t) {
  if (n < 0) throw std::invalid_argument("evaluate_lazy: negative depth");
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("evaluate_lazy: t outside [0,1]");
  return eval_direct(pt, Address::root_key(), n, t);
}

NodeLocation locate_node(const ParameterTree& pt, double t, int n) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("locate_node: t outside [0,1]");
  NodeLocation loc;
  loc.local = t;
  for (int d = 0; d < n; ++d) {
    NodeParams p = pt.params(loc.address.key);
    IntervalDecomposition dec(pt.tree(), p.s, p.xi);
    int l = dec.locate(loc.local);
    loc.local = dec.to_local(l, loc.local);
    loc.address = loc.address.child(dec.owner(l));
  }
  return loc;
}

namespace {

using Pieces = std::vector<std::pair<double, double>>;

// preimage of the local interval [a,b] under the affine map of `pieces` onto [0,1]
void pull_back(const Pieces& pieces, double total, double a, double b, Pieces& out) {
  double ca = a * total, cb = b * total, c = 0.0;
  for (const auto& [lo, hi] : pieces) {
    double len = hi - lo;
    double x = std::max(ca, c), y = std::min(cb, c + len);
    if (y > x) {
      double glo = lo + (x - c), ghi = lo + (y - c);
      if (!out.empty() && std::abs(out.back().second - glo) < 1e-15)
        out.back().second = ghi;
      else
        out.emplace_back(glo, ghi);
    }
    c += len;
  }
}

void visit_cells(const ParameterTree& pt, const LevelCell& cell, int remaining,
                 const std::function<void(const LevelCell&)>& visit) {
  if (remaining == 0) {
    visit(cell);
    return;
  }
  NodeParams p = pt.params(cell.address.key);
  IntervalDecomposition dec(pt.tree(), p.s, p.xi);
  double total = 0.0;
  for (const auto& [lo, hi] : cell.pieces) total += hi - lo;
  for (int j = 0; j < pt.tree().size(); ++j) {
    LevelCell child;
    child.address = cell.address.child(j);
    child.mass = cell.mass * p.r[j];
    child.length = cell.length * p.s[j];
    for (const auto& [a, b] : dec.region(j)) pull_back(cell.pieces, total, a, b, child.pieces);
    for (const auto& seg : cell.segments)
      for (int l : pt.tree().index_set(j)) {
        double a = std::max(seg.lo, dec.lo(l)), b = std::min(seg.hi, dec.hi(l));
        if (!(b > a)) continue;
        CellSegment c{seg.intervals, dec.to_local(l, a), dec.to_local(l, b)};
        c.intervals.push_back(static_cast<std::uint8_t>(l));
        child.segments.push_back(std::move(c));
      }
    visit_cells(pt, child, remaining - 1, visit);
  }
}

}  // namespace

void for_each_cell(const ParameterTree& pt, int n, const std::function<void(const LevelCell&)>& visit,
                   std::size_t node_budget) {
  check_budget(pt.tree().size(), n, node_budget);
  LevelCell root;
  root.pieces = {{0.0, 1.0}};
  root.segments = {CellSegment{}};
  visit_cells(pt, root, n, visit);
}

// ---------------------------------------------------------------------------

namespace {
struct Draw {
  std::vector<double> r, s;
};
Draw draw(const DecompositionSpec& spec, CounterRng& g) {
  Draw d{std::vector<double>(spec.tree.size()), std::vector<double>(spec.tree.size())};
  spec.law.sample(g, d.r, d.s);
  return d;
}
}  // namespace

double sample_height_perpetuity(const DecompositionSpec& spec, int n, CounterRng& g) {
  if (n <= 0) return spec.mean_height;
  Draw d = draw(spec, g);
  int j = sample_index(g, d.s);
  double y = std::pow(d.r[j], spec.alpha) * sample_height_perpetuity(spec, n - 1, g);
  for (int a : spec.tree.ancestors(j))
    y += std::pow(d.r[a], spec.alpha) * sample_height_perpetuity(spec, n - 1, g);
  return y;
}

std::vector<double> sample_height_perpetuity(const DecompositionSpec& spec, int n,
                                             std::size_t count, std::uint64_t seed) {
  CounterRng g(seed, 0x686569676874ULL);
  std::vector<double> out(count);
  for (auto& y : out) y = sample_height_perpetuity(spec, n, g);
  return out;
}

PairSample sample_pair_distance(const DecompositionSpec& spec, int n, CounterRng& g) {
  if (n <= 0) return {spec.mean_height, PairCase::same_child};
  const StructuralTree& tree = spec.tree;
  Draw d = draw(spec, g);
  int j1 = sample_index(g, d.s), j2 = sample_index(g, d.s);
  auto w = [&](int k) { return std::pow(d.r[k], spec.alpha); };
  if (j1 == j2) return {w(j1) * sample_pair_distance(spec, n - 1, g).value, PairCase::same_child};
  int i = std::min(j1, j2), j = std::max(j1, j2);
  double v = 0.0;
  if (tree.is_ancestor(i, j)) {
    for (int k : tree.ancestors(j))
      if (k > i) v += w(k) * sample_height_perpetuity(spec, n - 1, g);
    v += w(j) * sample_height_perpetuity(spec, n - 1, g);
    v += w(i) * sample_pair_distance(spec, n - 1, g).value;
    return {v, PairCase::nested};
  }
  const auto& ei = tree.ancestors(i);
  const auto& ej = tree.ancestors(j);
  int q = -1;
  for (std::size_t a = 0; a < std::min(ei.size(), ej.size()) && ei[a] == ej[a]; ++a) q = ei[a];
  for (int k : ei)
    if (k > q) v += w(k) * sample_height_perpetuity(spec, n - 1, g);
  v += w(i) * sample_height_perpetuity(spec, n - 1, g);
  for (int k : ej)
    if (k > q) v += w(k) * sample_height_perpetuity(spec, n - 1, g);
  v += w(j) * sample_height_perpetuity(spec, n - 1, g);
  return {v, PairCase::disjoint};
}

std::vector<double> sample_pair_distance(const DecompositionSpec& spec, int n, std::size_t count,
                                         std::uint64_t seed) {
  CounterRng g(seed, 0x70616972ULL);
  std::vector<double> out(count);
  for (auto& y : out) y = sample_pair_distance(spec, n, g).value;
  return out;
}

}  // namespace srtree
