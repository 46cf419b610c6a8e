#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iterator>
#include <functional>
#include <list>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "srtree/structural.hpp"

namespace srtree {

// Doubles stored inline up to 8 entries, on the heap beyond.
class SmallVec {
 public:
  SmallVec() = default;
  template <class It>
  SmallVec(It first, It last) {
    resize(static_cast<std::size_t>(std::distance(first, last)));
    std::copy(first, last, data());
  }
  SmallVec(const SmallVec& o) : SmallVec(o.begin(), o.end()) {}
  SmallVec& operator=(const SmallVec& o) {
    if (this != &o) {
      resize(o.size());
      std::copy(o.begin(), o.end(), data());
    }
    return *this;
  }

  void resize(std::size_t n) {
    if (n > kInline && n_ <= kInline) heap_.assign(buf_.begin(), buf_.begin() + n_);
    if (n <= kInline && n_ > kInline) std::copy(heap_.begin(), heap_.begin() + n, buf_.begin());
    if (n > kInline) heap_.resize(n);
    n_ = n;
  }
  std::size_t size() const { return n_; }
  bool empty() const { return n_ == 0; }
  double* data() { return n_ > kInline ? heap_.data() : buf_.data(); }
  const double* data() const { return n_ > kInline ? heap_.data() : buf_.data(); }
  double& operator[](std::size_t i) { return data()[i]; }
  double operator[](std::size_t i) const { return data()[i]; }
  double* begin() { return data(); }
  double* end() { return data() + n_; }
  const double* begin() const { return data(); }
  const double* end() const { return data() + n_; }
  operator std::span<double>() { return {data(), n_}; }
  operator std::span<const double>() const { return {data(), n_}; }
  friend bool operator==(const SmallVec& a, const SmallVec& b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
  }

 private:
  static constexpr std::size_t kInline = 8;
  std::array<double, kInline> buf_{};
  std::vector<double> heap_;
  std::size_t n_ = 0;
};

// Split of [0,1] into the regions of the K children of one node.
// Interval 0 is closed, every other interval is (lo, hi].
class IntervalDecomposition {
 public:
  IntervalDecomposition(const StructuralTree& tree, std::span<const double> s,
                        std::span<const double> u);

  int interval_count() const { return static_cast<int>(lo_.size()); }
  double lo(int l) const { return lo_[l]; }
  double hi(int l) const { return hi_[l]; }
  int owner(int l) const { return tree_->interval_owner(l); }
  int piece(int l) const { return tree_->interval_piece(l); }
  // interval holding t
  int locate(double t) const;
  // the region of node i as a list of (lo, hi)
  std::vector<std::pair<double, double>> region(int i) const;
  double length(int i) const { return s_[i]; }
  double split(int i) const { return u_[i]; }
  // affine map of the region of i onto [0,1]
  double to_local(int l, double t) const;
  double to_local(double t) const { return to_local(locate(t), t); }
  double from_local(int i, double x) const;

 private:
  const StructuralTree* tree_;
  SmallVec s_, u_, lo_, hi_;
};

inline IntervalDecomposition decompose_interval(const StructuralTree& tree, std::span<const double> s,
                                                std::span<const double> u) {
  return IntervalDecomposition(tree, s, u);
}

// Excursion sampled on the uniform grid j/m, j = 0..m.
struct GridExcursion {
  std::vector<double> values;

  int resolution() const { return static_cast<int>(values.size()) - 1; }
  // linear interpolation
  double at(double t) const;
  double sup() const;
  double integral() const;  // trapezoid rule
};

// Time change on the same grid; values are a CDF on [0,1].
struct TimeChange {
  std::vector<double> values;
  int resolution() const { return static_cast<int>(values.size()) - 1; }
  double at(double t) const;
};

GridExcursion compose_excursions(const StructuralTree& tree, std::span<const GridExcursion> children,
                                 std::span<const double> r, std::span<const double> s,
                                 std::span<const double> u, double alpha, int m);

enum class BaseProfile { arch, tent, parabola };
BaseProfile parse_base_profile(const std::string& name);
std::string to_string(BaseProfile p);
// base excursion with integral c
double base_profile(BaseProfile p, double c, double t);

// A finite word over {0..K-1}.
struct Address {
  std::vector<std::uint8_t> path;
  std::uint64_t key = root_key();

  static constexpr std::uint64_t root_key() { return 0x5eed0fadd2e55ULL; }
  static std::uint64_t child_key(std::uint64_t key, int i) {
    return mix64(key ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1)));
  }
  Address child(int i) const;
  int depth() const { return static_cast<int>(path.size()); }
  std::string str() const;  // 1-based labels, "" for the root
};

struct NodeParams {
  SmallVec r, s, xi, r_pow;  // r_pow = r^alpha
};

// Lazily materialised i.i.d. parameters (R, S, Xi) indexed by address.
class ParameterTree {
 public:
  ParameterTree(const DecompositionSpec& spec, std::uint64_t seed,
                BaseProfile base = BaseProfile::arch);

  const DecompositionSpec& spec() const { return *spec_; }
  const StructuralTree& tree() const { return spec_->tree; }
  std::uint64_t seed() const { return seed_; }
  BaseProfile base() const { return base_; }
  double base_value(double t) const { return base_profile(base_, spec_->mean_height, t); }

  NodeParams params(std::uint64_t key) const;
  NodeParams params(const Address& a) const { return params(a.key); }
  // product of R along the path (mass weight)
  double mass_weight(const Address& a) const;
  // product of S along the path (length weight)
  double length_weight(const Address& a) const;

 private:
  const DecompositionSpec* spec_;
  std::uint64_t seed_;
  BaseProfile base_;
};

// Q_n on a grid, built bottom-up over the full K-ary tree with interpolation.
GridExcursion iterate_scheme(const ParameterTree& pt, int n, int m,
                             std::size_t node_budget = std::size_t(1) << 22);

// Exact values Q_n(t) for many t at once.
std::vector<double> evaluate_points(const ParameterTree& pt, int n, std::span<const double> ts);
// Exact Q_n on the grid j/m.
GridExcursion sample_excursion(const ParameterTree& pt, int n, int m);

// Single point evaluation with memoised anchor values.
class LazyEvaluator {
 public:
  explicit LazyEvaluator(const ParameterTree& pt, std::size_t cache_capacity = 1 << 16);
  double operator()(int n, double t);
  std::size_t cache_hits() const { return hits_; }

 private:
  double eval(std::uint64_t key, int n, double t);
  double anchor(std::uint64_t key, int n, double u);

  const ParameterTree* pt_;
  std::size_t capacity_;
  using Entry = std::pair<std::pair<std::uint64_t, int>, double>;
  std::list<Entry> lru_;
  struct KeyHash {
    std::size_t operator()(const std::pair<std::uint64_t, int>& k) const {
      return static_cast<std::size_t>(mix64(k.first + static_cast<std::uint64_t>(k.second)));
    }
  };
  std::unordered_map<std::pair<std::uint64_t, int>, std::list<Entry>::iterator, KeyHash> index_;
  std::mutex mu_;
  std::size_t hits_ = 0;
};

double evaluate_lazy(const ParameterTree& pt, int n, double t);

struct NodeLocation {
  Address address;
  double local = 0.0;  // coordinate inside the cell
};
NodeLocation locate_node(const ParameterTree& pt, double t, int n);

// A piece of a cell in symbolic form: the interval indices chosen at each level
// and the range [lo, hi] it covers in the frame of the cell's own node.
struct CellSegment {
  std::vector<std::uint8_t> intervals;
  double lo = 0.0, hi = 1.0;
};

// A level-n cell: Lambda_sigma with its mass and length weights.
struct LevelCell {
  Address address;
  std::vector<std::pair<double, double>> pieces;
  std::vector<CellSegment> segments;  // same pieces, free of global rounding
  double mass = 1.0;    // product of R
  double length = 1.0;  // product of S
};
// Visits every level-n cell in address order.
void for_each_cell(const ParameterTree& pt, int n, const std::function<void(const LevelCell&)>& visit,
                   std::size_t node_budget = std::size_t(1) << 24);

// Exact tau_n(t) for many t.
std::vector<double> evaluate_time_change_points(const ParameterTree& pt, int n,
                                                std::span<const double> ts);
TimeChange build_time_change(const ParameterTree& pt, int n, int m);
// tau_n at the point with interval path `intervals` and frame coordinate x.
double time_change_at(const ParameterTree& pt, int n, std::span<const std::uint8_t> intervals, double x);

// Same, keeping the anchor values tau^{child}(xi) between calls.
class SegmentTimeChange {
 public:
  SegmentTimeChange(const ParameterTree& pt, int n) : pt_(&pt), n_(n) {}
  double operator()(std::span<const std::uint8_t> intervals, double x);

 private:
  double at(std::uint64_t key, int n, std::span<const std::uint8_t> path, double x);
  double anchor(std::uint64_t key, int n, double xi);
  const ParameterTree* pt_;
  int n_;
  std::unordered_map<std::uint64_t, double> anchors_;
};
// Exact minimum of Q_n over [a, b].
double range_min_exact(const ParameterTree& pt, int n, double a, double b);
// Exact tau_n^{-1}(y) for many y.
std::vector<double> inverse_time_change_points(const ParameterTree& pt, int n,
                                               std::span<const double> ys);
// Q_n composed with tau_n^{-1} on the grid j/m: the same tree, parametrised by its mass measure.
GridExcursion sample_excursion_mass_time(const ParameterTree& pt, int n, int m);

// Height of a uniform point: truncated perpetuity with leaves set to c.
double sample_height_perpetuity(const DecompositionSpec& spec, int n, CounterRng& g);
std::vector<double> sample_height_perpetuity(const DecompositionSpec& spec, int n,
                                             std::size_t count, std::uint64_t seed);

enum class PairCase { same_child, nested, disjoint };
struct PairSample {
  double value = 0.0;
  PairCase top = PairCase::same_child;
};
// Distance between two independent uniform points, truncated at depth n.
PairSample sample_pair_distance(const DecompositionSpec& spec, int n, CounterRng& g);
std::vector<double> sample_pair_distance(const DecompositionSpec& spec, int n, std::size_t count,
                                         std::uint64_t seed);

}  // namespace srtree
