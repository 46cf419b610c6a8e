#include "srtree/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace srtree {

long long divider_count(const GridExcursion& f, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("divider_count: delta must be positive");
  const auto& v = f.values;
  const int m = f.resolution();
  if (m < 1) throw std::invalid_argument("divider_count: empty grid");
  long long count = 1;
  int i = 0;
  while (i < m) {
    double lo = v[i], hi = v[i];
    int j = i;
    while (j < m) {
      double x = v[j + 1];
      double nlo = std::min(lo, x), nhi = std::max(hi, x);
      if (nhi - nlo > delta) break;
      lo = nlo;
      hi = nhi;
      ++j;
    }
    i = std::max(j, i + 1);
    ++count;
  }
  return count;
}

namespace {
std::vector<int> subsample(int m, int n) {
  std::vector<int> idx;
  if (n <= 0 || n >= m + 1) {
    idx.resize(m + 1);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  if (n == 1) return {0};
  for (int k = 0; k < n; ++k)
    idx.push_back(static_cast<int>(std::llround(static_cast<double>(k) * m / (n - 1))));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}
}  // namespace

long long covering_count(const DistanceOracle& oracle, double delta, int sample_size) {
  if (!(delta > 0.0)) throw std::invalid_argument("covering_count: delta must be positive");
  std::vector<int> pts = subsample(oracle.resolution(), sample_size);
  const std::size_t n = pts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return oracle.height(pts[a]) > oracle.height(pts[b]);
  });
  std::vector<char> covered(n, 0);
  long long centres = 0;
  for (std::size_t x : order) {
    if (covered[x]) continue;
    // centre: the point on the path from x to the root at height f(x) - delta (or the root)
    const double h = std::max(oracle.height(pts[x]) - delta, 0.0);
    for (std::size_t z = 0; z < n; ++z) {
      if (covered[z]) continue;
      double low = std::min(h, oracle.range_min(pts[x], pts[z]));
      if (oracle.height(pts[z]) + h - 2.0 * low <= delta) covered[z] = 1;
    }
    covered[x] = 1;
    ++centres;
  }
  return centres;
}

std::vector<double> dyadic_deltas(double top, int first, int last) {
  if (!(top > 0.0)) throw std::invalid_argument("dyadic_deltas: top must be positive");
  std::vector<double> d;
  for (int k = first; k <= last; ++k) d.push_back(std::ldexp(top, -k));
  return d;
}

CountLadder divider_ladder(const GridExcursion& f, const std::vector<double>& deltas,
                           std::uint64_t seed) {
  CountLadder l{deltas, {}, "divider", f.resolution(), seed};
  for (double d : deltas) l.counts.push_back(static_cast<double>(divider_count(f, d)));
  return l;
}

CountLadder covering_ladder(const DistanceOracle& oracle, const std::vector<double>& deltas,
                            int sample_size, std::uint64_t seed) {
  CountLadder l{deltas, {}, "covering", oracle.resolution(), seed};
  for (double d : deltas) l.counts.push_back(static_cast<double>(covering_count(oracle, d, sample_size)));
  return l;
}

DimensionFit dimension_fit(const CountLadder& ladder, std::size_t first, std::size_t last) {
  last = std::min(last, ladder.deltas.size());
  if (last < first + 4 || ladder.counts.size() != ladder.deltas.size())
    throw std::invalid_argument("dimension_fit: need at least 4 ladder points");
  std::vector<double> x, y;
  for (std::size_t i = first; i < last; ++i) {
    x.push_back(-std::log(ladder.deltas[i]));
    y.push_back(std::log(ladder.counts[i]));
  }
  DimensionFit fit;
  fit.points = static_cast<int>(x.size());
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); })) {
    fit.degenerate = true;
    return fit;
  }
  LineFit lf = fit_line(x, y);
  fit.slope = lf.slope;
  fit.stderr_ = lf.slope_stderr;
  return fit;
}

std::vector<double> grid_point_masses(const TimeChange& tc) {
  const int m = tc.resolution();
  if (m < 1) throw std::invalid_argument("grid_point_masses: empty time change");
  std::vector<double> p(m + 1, 0.0);
  for (int j = 0; j < m; ++j) {
    double w = std::max(0.0, tc.values[j + 1] - tc.values[j]);
    p[j] += 0.5 * w;
    p[j + 1] += 0.5 * w;
  }
  return p;
}

std::vector<std::vector<double>> ball_masses(const DistanceOracle& oracle, const TimeChange& tc,
                                             const std::vector<double>& radii, int samples,
                                             std::uint64_t seed) {
  const int m = oracle.resolution();
  if (tc.resolution() != m)
    throw std::invalid_argument("ball_masses: time change and excursion grids differ");
  for (double r : radii)
    if (!(r > 0.0)) throw std::invalid_argument("ball_masses: radii must be positive");
  std::vector<double> p = grid_point_masses(tc);
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  const double total = cdf.back();
  CounterRng g(seed, 0x62616c6cULL);
  std::vector<std::vector<double>> out(radii.size());
  std::vector<double> dist(m + 1);
  for (int k = 0; k < samples; ++k) {
    double u = uniform01(g) * total;
    int z = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    z = std::min(z, m);
    const auto& f = oracle.values();
    double mn = f[z];
    for (int y = z; y >= 0; --y) {
      mn = std::min(mn, f[y]);
      dist[y] = f[z] + f[y] - 2.0 * mn;
    }
    mn = f[z];
    for (int y = z; y <= m; ++y) {
      mn = std::min(mn, f[y]);
      dist[y] = f[z] + f[y] - 2.0 * mn;
    }
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
      double mass = 0.0;
      for (int y = 0; y <= m; ++y)
        if (dist[y] < radii[ri]) mass += p[y];
      out[ri].push_back(std::min(1.0, mass / total));
    }
  }
  return out;
}

std::vector<BallMassRow> ball_mass_profile(const DistanceOracle& oracle, const TimeChange& tc,
                                           const BallMassOptions& opt) {
  auto masses = ball_masses(oracle, tc, opt.radii, opt.samples, opt.seed);
  std::vector<BallMassRow> rows;
  for (std::size_t ri = 0; ri < opt.radii.size(); ++ri)
    for (double gam : opt.gammas) {
      BallMassRow row{opt.radii[ri], gam, {}};
      std::vector<double> ratio;
      for (double mass : masses[ri]) ratio.push_back(mass / std::pow(opt.radii[ri], gam));
      for (double q : opt.levels) row.quantiles.push_back(quantile(ratio, q));
      rows.push_back(std::move(row));
    }
  return rows;
}

double holder_modulus(const GridExcursion& f, double gamma, const std::vector<int>& lags) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::domain_error("holder_modulus: gamma outside (0,1]");
  const int m = f.resolution();
  double best = 0.0;
  for (int h : lags) {
    if (h < 1 || h > m) continue;
    double scale = std::pow(static_cast<double>(h) / m, gamma);
    for (int x = 0; x + h <= m; ++x)
      best = std::max(best, std::abs(f.values[x + h] - f.values[x]) / scale);
  }
  return best;
}

}  // namespace srtree
