#include "srtree/commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "srtree/fractal.hpp"
#include "srtree/lamination.hpp"
#include "srtree/stats.hpp"
#include "srtree/treemetric.hpp"

namespace srtree {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

namespace {

std::string num(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json hashed_view(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("jobs");  // worker count never changes results
  return j;
}

std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

json provenance(const ExperimentConfig& c) {
  return {{"version", kVersion},
          {"config_hash", hex(config_hash(c))},
          {"seed", c.seed},
          {"config", hashed_view(c)}};
}

class Csv {
 public:
  Csv(const fs::path& path, const ExperimentConfig& c, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << provenance_header(c) << header << '\n';
  }
  template <class... T>
  void row(const T&... cols) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cols), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double x) { return num(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I x) {
    return std::to_string(x);
  }
  std::ofstream out_;
};

void write_json(const fs::path& path, const ExperimentConfig& c, json body) {
  body["provenance"] = provenance(c);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body.dump(2) << '\n';
}

std::uint64_t spec_hash(const ExperimentConfig& c) {
  json j{{"parents", c.parents}, {"law", to_json(c).at("law")}, {"c", c.c},
         {"alpha", c.alpha ? json(*c.alpha) : json(nullptr)}, {"base_profile", c.base_profile}};
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

GridExcursion make_excursion(const ParameterTree& pt, const ExperimentConfig& c, int depth, int grid) {
  return c.method == "scheme" ? iterate_scheme(pt, depth, grid) : sample_excursion(pt, depth, grid);
}

std::string set_string(const std::set<int>& s) {
  std::string out = "{";
  for (int v : s) out += (out.size() > 1 ? "," : "") + std::to_string(v);
  return out + "}";
}

int cmd_alpha(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  StructuralTree tree = StructuralTree::from_parents(c.parents);
  ScalingLaw law = make_law(c.law, tree.size());
  MonteCarloOptions opt{c.mc_samples, c.seed};
  AlphaSolution a = solve_alpha(tree, law, 1e-13, MomentMode::automatic, opt);
  int m_star = moment_threshold(law, a.alpha);
  log.precision(12);
  log << a.alpha << '\n';
  Csv curve(dir / "alpha_curve.csv", c, "a,F,stderr");
  std::unique_ptr<MonteCarloFunctional> mc;
  if (!law.analytic()) mc = std::make_unique<MonteCarloFunctional>(tree, law, opt);
  for (int i = 0; i <= 100; ++i) {
    double x = i / 100.0;
    FunctionalValue v = mc ? (*mc)(x) : mean_alpha_functional(tree, law, x);
    curve.row(x, v.value, v.std_error);
  }
  write_json(dir / "alpha.json", c,
             {{"alpha", a.alpha},
              {"bracket", {a.lo, a.hi}},
              {"residual", a.residual},
              {"mc_halfwidth", a.mc_halfwidth},
              {"analytic", law.analytic()},
              {"m_star", m_star},
              {"iterations", a.iterations}});
  return 0;
}

int cmd_excursion(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  DecompositionSpec spec = make_spec(c);
  BaseProfile base = parse_base_profile(c.base_profile);
  std::vector<GridExcursion> ex(c.replicas);
  parallel_for(c.replicas, c.jobs, [&](int r) {
    ParameterTree pt(spec, replica_seed(c.seed, r), base);
    ex[r] = make_excursion(pt, c, c.depth, c.grid);
  });
  Csv summary(dir / "excursions.csv", c, "replica,seed,sup,integral");
  for (int r = 0; r < c.replicas; ++r) {
    std::uint64_t s = replica_seed(c.seed, r);
    Csv csv(dir / ("excursion_" + std::to_string(r) + ".csv"), c, "t,value");
    const int m = ex[r].resolution();
    for (int j = 0; j <= m; ++j) csv.row(static_cast<double>(j) / m, ex[r].values[j]);
    write_excursion_binary((dir / ("excursion_" + std::to_string(r) + ".bin")).string(), ex[r], c.c, s,
                           spec_hash(c));
    summary.row(r, s, ex[r].sup(), ex[r].integral());
  }
  log << "alpha " << spec.alpha << ", wrote " << c.replicas << " excursion(s)\n";
  return 0;
}

int cmd_dimension(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  DecompositionSpec spec = make_spec(c);
  BaseProfile base = parse_base_profile(c.base_profile);
  struct Result {
    CountLadder ladder;
    DimensionFit fit;
    std::vector<BallMassRow> balls;
    std::vector<double> holder;
  };
  std::vector<Result> res(c.replicas);
  parallel_for(c.replicas, c.jobs, [&](int r) {
    std::uint64_t s = replica_seed(c.seed, r);
    ParameterTree pt(spec, s, base);
    const bool mass = c.dimension.parametrization == "mass";
    GridExcursion f = mass ? sample_excursion_mass_time(pt, c.depth, c.grid) : make_excursion(pt, c, c.depth, c.grid);
    double top = std::max(f.sup(), 1e-300);
    auto deltas = dyadic_deltas(top, c.dimension.delta_first, c.dimension.delta_last);
    Result& out = res[r];
    if (c.dimension.estimator == "divider")
      out.ladder = divider_ladder(f, deltas, s);
    else
      out.ladder = covering_ladder(DistanceOracle(f), deltas, c.dimension.sample_size, s);
    out.fit = dimension_fit(out.ladder, c.dimension.fit_first, c.dimension.fit_last);
    if (!c.ball_mass.radii.empty()) {
      TimeChange tc;
      if (mass)
        for (int j = 0; j <= c.grid; ++j) tc.values.push_back(static_cast<double>(j) / c.grid);
      else
        tc = build_time_change(pt, c.depth, c.grid);
      BallMassOptions bo;
      bo.radii = c.ball_mass.radii;
      bo.gammas = c.ball_mass.gammas;
      bo.samples = c.ball_mass.samples;
      bo.seed = s;
      out.balls = ball_mass_profile(DistanceOracle(f), tc, bo);
    }
    for (double g : c.holder.gammas) out.holder.push_back(holder_modulus(f, g, c.holder.lags));
  });
  Csv ladders(dir / "ladders.csv", c, "replica,rung,delta,count");
  Csv fits(dir / "fits.csv", c, "replica,slope,stderr,points,degenerate");
  std::vector<double> slopes;
  for (int r = 0; r < c.replicas; ++r) {
    const auto& l = res[r].ladder;
    for (std::size_t i = 0; i < l.deltas.size(); ++i)
      ladders.row(r, static_cast<int>(i), l.deltas[i], l.counts[i]);
    const auto& f = res[r].fit;
    fits.row(r, f.slope, f.stderr_, f.points, f.degenerate ? 1 : 0);
    slopes.push_back(f.slope);
  }
  double ms = mean(slopes);
  double se = slopes.size() > 1 ? std::sqrt(variance(slopes) / slopes.size()) : 0.0;
  fits.row(std::string("mean"), ms, se, static_cast<int>(slopes.size()), 0);
  if (!c.ball_mass.radii.empty()) {
    Csv balls(dir / "ball_mass.csv", c, "replica,radius,gamma,q10,q50,q90");
    for (int r = 0; r < c.replicas; ++r)
      for (const auto& row : res[r].balls)
        balls.row(r, row.radius, row.gamma, row.quantiles[0], row.quantiles[1], row.quantiles[2]);
  }
  if (!c.holder.gammas.empty()) {
    Csv hold(dir / "holder.csv", c, "replica,gamma,modulus");
    for (int r = 0; r < c.replicas; ++r)
      for (std::size_t g = 0; g < c.holder.gammas.size(); ++g)
        hold.row(r, c.holder.gammas[g], res[r].holder[g]);
  }
  log << c.dimension.estimator << " slope " << ms << " +- " << se << " over " << c.replicas
      << " replica(s)\n";
  return 0;
}

int cmd_timechange(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  DecompositionSpec spec = make_spec(c);
  std::vector<TimeChange> tcs(c.replicas);
  parallel_for(c.replicas, c.jobs, [&](int r) {
    ParameterTree pt(spec, replica_seed(c.seed, r));
    tcs[r] = build_time_change(pt, c.depth, c.grid);
  });
  for (int r = 0; r < c.replicas; ++r) {
    Csv csv(dir / ("timechange_" + std::to_string(r) + ".csv"), c, "t,tau");
    const int m = tcs[r].resolution();
    for (int j = 0; j <= m; ++j) csv.row(static_cast<double>(j) / m, tcs[r].values[j]);
  }
  log << "wrote " << c.replicas << " time change(s)\n";
  return 0;
}

int cmd_heights(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  DecompositionSpec spec = make_spec(c);
  BaseProfile base = parse_base_profile(c.base_profile);
  const int n = c.heights.samples;
  auto y = sample_height_perpetuity(spec, c.depth, n, replica_seed(c.seed, -1));
  auto d = sample_pair_distance(spec, c.depth, n, replica_seed(c.seed, -2));
  std::vector<double> e01(n), e12(n);
  parallel_for(n, c.jobs, [&](int i) {
    std::uint64_t s = replica_seed(c.seed, i);
    ParameterTree pt(spec, s, base);
    DistanceOracle o(sample_excursion(pt, c.depth, c.heights.grid));
    DistanceMatrix m = sample_distance_matrix(o, 2, hash_combine(s, 0x6d6174ULL));
    e01[i] = m(0, 1);
    e12[i] = m(1, 2);
  });
  Csv csv(dir / "heights.csv", c, "source,value");
  for (double v : y) csv.row(std::string("perpetuity_height"), v);
  for (double v : d) csv.row(std::string("perpetuity_pair"), v);
  for (double v : e01) csv.row(std::string("matrix_01"), v);
  for (double v : e12) csv.row(std::string("matrix_12"), v);
  KsResult kh = ks_two_sample(y, e01), kp = ks_two_sample(d, e12);
  write_json(dir / "heights_ks.json", c,
             {{"height_vs_matrix_01", {{"statistic", kh.statistic}, {"p_value", kh.p_value}}},
              {"pair_vs_matrix_12", {{"statistic", kp.statistic}, {"p_value", kp.p_value}}},
              {"mean_perpetuity_height", mean(y)},
              {"mean_matrix_01", mean(e01)}});
  log << "KS height " << kh.statistic << " (p " << kh.p_value << "), pair " << kp.statistic << " (p "
      << kp.p_value << ")\n";
  return 0;
}

int cmd_lamination(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  const auto& l = c.lamination;
  LaminationModel model = parse_lamination_model(l.model);
  auto cps = geometric_checkpoints(l.first_checkpoint, l.n, l.per_decade);
  std::vector<ScalingRun> runs(c.replicas);
  parallel_for(c.replicas, c.jobs, [&](int r) {
    runs[r] = run_experiment(model, l.k, cps, replica_seed(c.seed, r), l.eval_points, l.profile_grid);
  });
  ExponentFit fit = fit_exponents(runs, l.fit_from);
  Csv csv(dir / "lamination.csv", c,
          "model,k,seed,replica,n,N_n,attempts,mean_height,height_exponent,height_stderr,"
          "polygon_exponent,polygon_stderr");
  for (int r = 0; r < c.replicas; ++r)
    for (const auto& cp : runs[r].checkpoints)
      csv.row(l.model, l.k, runs[r].seed, r, cp.n, cp.polygons, cp.attempts, cp.mean_height,
              std::string(), std::string(), std::string(), std::string());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    double h = 0.0, p = 0.0, a = 0.0;
    for (const auto& run : runs) {
      h += run.checkpoints[i].mean_height;
      p += static_cast<double>(run.checkpoints[i].polygons);
      a += static_cast<double>(run.checkpoints[i].attempts);
    }
    double k = static_cast<double>(runs.size());
    bool last = i + 1 == cps.size();
    csv.row(l.model, l.k, c.seed, std::string("mean"), cps[i], p / k, a / k, h / k,
            last ? num(fit.height.slope) : std::string(), last ? num(fit.height.slope_stderr) : std::string(),
            last ? num(fit.polygons.slope) : std::string(),
            last ? num(fit.polygons.slope_stderr) : std::string());
  }
  if (l.profile_grid > 0) {
    Csv prof(dir / "lamination_profile.csv", c, "replica,s,height");
    for (int r = 0; r < c.replicas; ++r)
      for (int j = 0; j < l.profile_grid; ++j)
        prof.row(r, (j + 0.5) / l.profile_grid, runs[r].final_profile[j]);
  }
  log << l.model << " k=" << l.k << ": height exponent " << fit.height.slope << " +- "
      << fit.height.slope_stderr << ", N_n exponent " << fit.polygons.slope << " +- "
      << fit.polygons.slope_stderr << '\n';
  return 0;
}

int cmd_chain(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  StructuralTree tree = StructuralTree::from_parents(c.parents);
  ScalingLaw law = make_law(c.law, tree.size());
  auto path = simulate_exit_chain(tree, law, static_cast<std::size_t>(c.chain_steps), c.seed);
  Csv csv(dir / "chain.csv", c, "step,M,log_L");
  long long zeros = 0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    csv.row(static_cast<long long>(i), path[i].count, path[i].log_length);
    if (i > 0 && path[i].count == 0) ++zeros;
  }
  log << "fraction of steps with M = 0: " << static_cast<double>(zeros) / c.chain_steps << '\n';
  return 0;
}

int cmd_degrees(const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  StructuralTree tree = StructuralTree::from_parents(c.parents);
  auto d = tree.degree_set();
  auto p = predict_degree_set(tree);
  write_json(dir / "degrees.json", c,
             {{"structural_degrees", std::vector<int>(d.begin(), d.end())},
              {"predicted", std::vector<int>(p.begin(), p.end())}});
  log << set_string(p) << '\n';
  return 0;
}

}  // namespace

std::string provenance_header(const ExperimentConfig& c) {
  std::string s = "# srtree " + std::string(kVersion) + " config_hash=" + hex(config_hash(c)) +
                  " seed=" + std::to_string(c.seed) + "\n";
  s += "# config=" + hashed_view(c).dump() + "\n";
  return s;
}

void write_excursion_binary(const std::string& path, const GridExcursion& f, double c,
                            std::uint64_t seed, std::uint64_t spec_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write("SRTX", 4);
  put(std::uint32_t{1});
  put(static_cast<std::uint64_t>(f.resolution()));
  put(c);
  put(seed);
  put(spec_hash);
  for (double v : f.values) put(v);
}

GridExcursion read_excursion_binary(const std::string& path, double* c, std::uint64_t* seed,
                                    std::uint64_t* spec_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  auto get = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error(path + ": truncated excursion dump");
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SRTX", 4) != 0) throw std::runtime_error(path + ": bad magic");
  std::uint32_t version;
  std::uint64_t m, sd, sh;
  double cc;
  get(version);
  get(m);
  get(cc);
  get(sd);
  get(sh);
  GridExcursion f;
  f.values.resize(m + 1);
  for (auto& v : f.values) get(v);
  if (c) *c = cc;
  if (seed) *seed = sd;
  if (spec_hash) *spec_hash = sh;
  return f;
}

int run(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
  validate(c);
  fs::path dir(out_dir);
  fs::create_directories(dir);
  const std::string& cmd = c.command;
  if (cmd == "alpha") return cmd_alpha(c, dir, log);
  if (cmd == "excursion") return cmd_excursion(c, dir, log);
  if (cmd == "dimension") return cmd_dimension(c, dir, log);
  if (cmd == "timechange") return cmd_timechange(c, dir, log);
  if (cmd == "heights") return cmd_heights(c, dir, log);
  if (cmd == "lamination") return cmd_lamination(c, dir, log);
  if (cmd == "chain") return cmd_chain(c, dir, log);
  if (cmd == "degrees") return cmd_degrees(c, dir, log);
  throw ConfigError("command", "unknown command '" + cmd + "'");
}

}  // namespace srtree
