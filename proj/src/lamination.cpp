#include "srtree/lamination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace srtree {

double Fragment::trace() const {
  double t = 0.0;
  for (const auto& [a, b] : arcs) t += b - a;
  return t;
}

CircleConfig::CircleConfig() {
  Fragment f;
  f.arcs = {{0.0, 1.0}};
  f.representative = 0.0;
  fragments_.push_back(f);
  essential_.push_back(0);
  slot_.push_back(0);
  arcs_[0.0] = 0;
}

int CircleConfig::fragment_at(double s) const {
  if (!(s >= 0.0 && s < 1.0)) throw std::domain_error("fragment_at: s outside [0,1)");
  auto it = arcs_.upper_bound(s);
  --it;
  return it->second;
}

int CircleConfig::separating(double s) const {
  const std::pair<double, long long> key{s, std::numeric_limits<long long>::max()};
  return static_cast<int>(starts_.order_of_key(key)) - static_cast<int>(ends_.order_of_key(key));
}

int CircleConfig::depth(int f) const {
  const Fragment& fr = fragments_.at(f);
  // right of its first vertex a polygon sees its own two edges
  return fr.arcs.empty() ? separating(fr.representative) - 1 : separating(fr.representative);
}

bool CircleConfig::is_boundary_point(double s) const { return arcs_.count(s) > 0; }

void CircleConfig::separate(std::vector<double>& points) {
  std::sort(points.begin(), points.end());
  for (std::size_t i = 0; i < points.size(); ++i) {
    while (arcs_.count(points[i]) || (i > 0 && points[i] <= points[i - 1])) {
      points[i] = std::nextafter(std::max(points[i], i > 0 ? points[i - 1] : 0.0), 1.0);
      ++perturbations_;
    }
  }
}

void CircleConfig::split_fragment(int f, std::vector<double> u) {
  const int k = static_cast<int>(u.size());
  if (k < 2) throw std::invalid_argument("split_fragment: need at least two points");
  if (f < 0 || f >= static_cast<int>(fragments_.size()) || !fragments_[f].essential)
    throw std::invalid_argument("split_fragment: not an essential fragment");
  for (int i = 0; i < k; ++i) {
    if (i > 0 && !(u[i] > u[i - 1])) throw std::invalid_argument("split_fragment: points must increase");
    if (arcs_.count(u[i])) throw std::invalid_argument("split_fragment: point on a boundary point");
    if (fragment_at(u[i]) != f) throw std::invalid_argument("split_fragment: point outside fragment");
  }
  // cut the arcs of f at the new points
  std::vector<std::pair<double, double>> pieces;
  for (const auto& [a, b] : fragments_[f].arcs) {
    double lo = a;
    for (double x : u)
      if (x > lo && x < b) {
        pieces.emplace_back(lo, x);
        lo = x;
      }
    pieces.emplace_back(lo, b);
  }

  // sub-fragment i < k-1 holds [u_i, u_{i+1}); the last one wraps through 0
  const int base = static_cast<int>(fragments_.size());
  std::vector<Fragment> sub(k);
  for (const auto& pc : pieces) {
    int idx = k - 1;
    for (int i = 0; i + 1 < k; ++i)
      if (pc.first >= u[i] && pc.first < u[i + 1]) idx = i;
    sub[idx].arcs.push_back(pc);
  }
  for (int i = 0; i < k; ++i) {
    auto& s = sub[i];
    s.essential = true;
    s.representative = 0.5 * (s.arcs.front().first + s.arcs.front().second);
  }

  // retire f (swap-remove from the essential list)
  int pos = slot_[f];
  essential_[pos] = essential_.back();
  slot_[essential_[pos]] = pos;
  essential_.pop_back();
  slot_[f] = -1;
  fragments_[f].essential = false;

  for (int i = 0; i < k; ++i) {
    int id = base + i;
    for (const auto& pc : sub[i].arcs) arcs_[pc.first] = id;
    fragments_.push_back(std::move(sub[i]));
    slot_.push_back(static_cast<int>(essential_.size()));
    essential_.push_back(id);
  }
  if (k >= 3) {
    Fragment poly;
    poly.essential = false;
    poly.representative = u[0];
    fragments_.push_back(poly);
    slot_.push_back(-1);
  }
  auto add_edge = [&](double p, double q) {
    const long long id = static_cast<long long>(edges_.size());
    edges_.emplace_back(p, q);
    starts_.insert({p, id});
    ends_.insert({q, id});
  };
  for (int i = 0; i + 1 < k; ++i) add_edge(u[i], u[i + 1]);
  if (k >= 3) add_edge(u[0], u[k - 1]);
  ++insertions_;
}

bool attempt_recursive(CircleConfig& c, int k, CounterRng& g) {
  if (k < 2) throw std::invalid_argument("attempt_recursive: k must be at least 2");
  c.count_attempt();
  std::vector<double> pts(k);
  for (auto& x : pts) x = uniform01(g);
  int f = c.fragment_at(pts[0]);
  for (int i = 1; i < k; ++i)
    if (c.fragment_at(pts[i]) != f) return false;
  c.separate(pts);
  for (double x : pts)
    if (c.fragment_at(x) != f) return false;
  c.split_fragment(f, std::move(pts));
  return true;
}

void insert_homogeneous(CircleConfig& c, int k, CounterRng& g) {
  if (k < 2) throw std::invalid_argument("insert_homogeneous: k must be at least 2");
  c.count_attempt();
  const auto& ess = c.essential();
  int f = ess[static_cast<std::size_t>(uniform01(g) * ess.size()) % ess.size()];
  const Fragment& fr = c.fragments()[f];
  const double total = fr.trace();
  std::vector<double> pts(k);
  for (int tries = 0;; ++tries) {
    if (tries == 1000)
      throw std::range_error("insert_homogeneous: fragment below floating point resolution");
    for (auto& x : pts) {
      double w = uniform01(g) * total;
      x = fr.arcs.back().first;
      for (const auto& [a, b] : fr.arcs) {
        if (w < b - a) {
          x = a + w;
          break;
        }
        w -= b - a;
      }
    }
    std::sort(pts.begin(), pts.end());
    bool ok = std::adjacent_find(pts.begin(), pts.end()) == pts.end();
    for (double x : pts) ok = ok && !c.is_boundary_point(x) && c.fragment_at(x) == f;
    if (ok) break;
  }
  c.split_fragment(f, std::move(pts));
}

int height_at(const CircleConfig& c, double s) {
  if (!(s >= 0.0 && s < 1.0)) throw std::domain_error("height_at: s outside [0,1)");
  return c.separating(s);
}

int height_bruteforce(const CircleConfig& c, double s) {
  int h = 0;
  for (const auto& [p, q] : c.edges()) {
    bool in_s = p <= s && s < q;
    bool in_0 = p <= 0.0 && 0.0 < q;
    if (in_s != in_0) ++h;
  }
  return h;
}

bool non_crossing(const CircleConfig& c) {
  const auto& e = c.edges();
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = i + 1; j < e.size(); ++j) {
      auto [a, b] = e[i];
      auto [x, y] = e[j];
      if (a == x || a == y || b == x || b == y) continue;
      bool xin = a < x && x < b, yin = a < y && y < b;
      if (xin != yin) return false;
    }
  return true;
}

double essential_trace(const CircleConfig& c) {
  double t = 0.0;
  for (int f : c.essential()) t += c.fragments()[f].trace();
  return t;
}

LaminationModel parse_lamination_model(const std::string& s) {
  if (s == "recursive") return LaminationModel::recursive;
  if (s == "homogeneous") return LaminationModel::homogeneous;
  throw std::invalid_argument("unknown lamination model '" + s + "' (recursive, homogeneous)");
}

std::string to_string(LaminationModel m) {
  return m == LaminationModel::recursive ? "recursive" : "homogeneous";
}

std::vector<long long> geometric_checkpoints(long long first, long long last, int per_decade) {
  if (first < 1 || last < first || per_decade < 1)
    throw std::invalid_argument("geometric_checkpoints: bad schedule");
  std::vector<long long> out;
  for (int j = 0;; ++j) {
    long long n = std::llround(first * std::pow(10.0, static_cast<double>(j) / per_decade));
    if (n > last) break;
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  if (out.back() != last) out.push_back(last);
  return out;
}

namespace {

// Homogeneous model on the dual tree. Every fragment carries its own unit coordinate along its
// trace (circle order, starting next to its parent chord), so repeated splitting never runs out of
// floating point resolution. Children hang off gaps of that coordinate; tracked circle points sit
// at coordinates too. The piece next to the parent keeps the node id.
class DualTree {
 public:
  DualTree(int k, std::span<const double> tracked) : k_(k), where_(tracked.size()) {
    nodes_.emplace_back();
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      nodes_[0].points.push_back({tracked[i], static_cast<int>(i)});
      where_[i] = 0;
    }
  }

  void insert(CounterRng& g) {
    const int f = static_cast<int>(uniform01(g) * nodes_.size()) % static_cast<int>(nodes_.size());
    std::vector<double> u(k_);
    for (auto& x : u) x = uniform01(g);
    std::sort(u.begin(), u.end());
    const int first = static_cast<int>(nodes_.size());
    for (int i = 0; i + 1 < k_; ++i) {
      Node n;
      n.parent = f;
      n.link = k_ == 2 ? 1 : 2;
      nodes_.push_back(std::move(n));
    }
    // region of a coordinate: i < k-1 for [u_i, u_{i+1}), k-1 for the piece next to the parent
    auto move = [&](double x, int& id) {
      for (int i = 0; i + 1 < k_; ++i)
        if (x >= u[i] && x < u[i + 1]) {
          id = first + i;
          return (x - u[i]) / (u[i + 1] - u[i]);
        }
      id = f;
      double wrap = 1.0 - (u[k_ - 1] - u[0]);
      return std::min((x < u[0] ? x : x - (u[k_ - 1] - u[0])) / wrap, std::nextafter(1.0, 0.0));
    };
    Node& old = nodes_[f];
    auto children = std::move(old.children);
    auto points = std::move(old.points);
    old.children.clear();
    old.points.clear();
    for (auto [x, c] : children) {
      int id;
      double y = move(x, id);
      nodes_[c].parent = id;
      nodes_[id].children.push_back({y, c});
    }
    for (auto [x, p] : points) {
      int id;
      double y = move(x, id);
      where_[p] = id;
      nodes_[id].points.push_back({y, p});
    }
    // the new pieces hang off the parent-side piece at the polygon
    double gap = u[0] / (1.0 - (u[k_ - 1] - u[0]));
    for (int i = 0; i + 1 < k_; ++i) nodes_[f].children.push_back({gap, first + i});
  }

  int depth_of_point(int p) const {
    int d = 0;
    for (int v = where_[p]; v != 0; v = nodes_[v].parent) d += nodes_[v].link;
    return d;
  }

 private:
  struct Node {
    int parent = -1, link = 0;
    std::vector<std::pair<double, int>> children, points;
  };
  int k_;
  std::vector<Node> nodes_;
  std::vector<int> where_;
};

}  // namespace

ScalingRun run_experiment(LaminationModel model, int k, const std::vector<long long>& checkpoints,
                          std::uint64_t seed, int eval_points, int profile_grid) {
  if (k < 2) throw std::invalid_argument("run_experiment: k must be at least 2");
  if (checkpoints.empty() || !std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      checkpoints.front() < 1)
    throw std::invalid_argument("run_experiment: checkpoints must be increasing and positive");
  ScalingRun run;
  run.model = model;
  run.k = k;
  run.seed = seed;
  CounterRng eval_rng(seed, 0x6576616cULL);
  std::vector<double> tracked(eval_points);
  for (auto& s : tracked) s = uniform01(eval_rng);
  for (int j = 0; j < profile_grid; ++j) tracked.push_back((j + 0.5) / profile_grid);
  CounterRng g(seed, model == LaminationModel::recursive ? 0x726563ULL : 0x686f6dULL);
  const bool recursive = model == LaminationModel::recursive;
  CircleConfig c;
  DualTree tree(k, recursive ? std::span<const double>() : std::span<const double>(tracked));
  auto height = [&](int i) { return recursive ? height_at(c, tracked[i]) : tree.depth_of_point(i); };
  long long clock = 0;
  for (long long target : checkpoints) {
    for (; clock < target; ++clock) {
      if (recursive)
        attempt_recursive(c, k, g);
      else
        tree.insert(g);
    }
    Checkpoint cp;
    cp.n = clock;
    cp.polygons = recursive ? c.insertions() : clock;
    cp.attempts = recursive ? c.attempts() : clock;
    double h = 0.0;
    for (int i = 0; i < eval_points; ++i) h += height(i);
    cp.mean_height = eval_points > 0 ? h / eval_points : 0.0;
    run.checkpoints.push_back(cp);
  }
  for (int j = 0; j < profile_grid; ++j) run.final_profile.push_back(height(eval_points + j));
  return run;
}

ExponentFit fit_exponents(const std::vector<ScalingRun>& runs, long long fit_from) {
  if (runs.empty()) throw std::invalid_argument("fit_exponents: no runs");
  const auto& ref = runs.front().checkpoints;
  std::vector<double> x, yh, yn;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].n < fit_from) continue;
    double h = 0.0, p = 0.0;
    for (const auto& r : runs) {
      if (r.checkpoints.size() != ref.size() || r.checkpoints[i].n != ref[i].n)
        throw std::invalid_argument("fit_exponents: runs use different checkpoints");
      h += r.checkpoints[i].mean_height;
      p += static_cast<double>(r.checkpoints[i].polygons);
    }
    if (h <= 0.0 || p <= 0.0) continue;
    x.push_back(std::log(static_cast<double>(ref[i].n)));
    yh.push_back(std::log(h / runs.size()));
    yn.push_back(std::log(p / runs.size()));
  }
  if (x.size() < 3) throw std::invalid_argument("fit_exponents: fewer than 3 usable checkpoints");
  ExponentFit f;
  f.height = fit_line(x, yh);
  f.polygons = fit_line(x, yn);
  f.height_prefactor = std::exp(f.height.intercept);
  f.polygon_prefactor = std::exp(f.polygons.intercept);
  return f;
}

}  // namespace srtree
