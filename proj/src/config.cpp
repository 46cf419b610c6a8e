#include "srtree/config.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <regex>
#include <set>

namespace srtree {

using nlohmann::json;

namespace {

const std::set<std::string> kCommands{"alpha",     "excursion", "dimension", "timechange",
                                      "heights",   "lamination", "chain",    "degrees"};

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), std::string("wrong type (") + it->type_name() + ")");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> repeat(double first, double rest, int k) {
  std::vector<double> v(k, rest);
  v[0] = first;
  return v;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"crt", "lamination-z", "homogeneous-h", "kgon-recursive(k)", "kgon-homogeneous(k)"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "crt") {
    c.parents = {1, 1};
    c.law.kind = "shared_dirichlet";
    c.law.params = {0.5, 0.5, 0.5};
    c.c = std::sqrt(2.0 * std::numbers::pi);
    return c;
  }
  if (name == "lamination-z") {
    c.parents = {1};
    c.law.kind = "shared_dirichlet";
    c.law.params = {2.0, 1.0};
    c.lamination.model = "recursive";
    c.lamination.k = 2;
    return c;
  }
  if (name == "homogeneous-h") {
    c.parents = {1};
    c.law.kind = "product_dirichlet";
    c.law.r_params = {1.0, 1.0};
    c.law.s_params = {2.0, 1.0};
    c.c = 1.0 / std::tgamma(4.0 / 3.0);
    c.lamination.model = "homogeneous";
    c.lamination.k = 2;
    return c;
  }
  static const std::regex kgon(R"(kgon-(recursive|homogeneous)(?:\((\d+)\)|-(\d+)))");
  std::smatch m;
  if (std::regex_match(name, m, kgon)) {
    int k = std::stoi(m[2].matched ? m[2].str() : m[3].str());
    if (k < 2 || k > 64) throw ConfigError("preset", "k-gon size must lie in [2, 64]");
    c.parents.assign(k - 1, 1);
    c.lamination.k = k;
    if (m[1] == "recursive") {
      c.law.kind = "shared_dirichlet";
      c.law.params = repeat(2.0, 1.0, k);
      c.lamination.model = "recursive";
    } else {
      c.law.kind = "product_dirichlet";
      c.law.r_params = std::vector<double>(k, 1.0 / (k - 1));
      c.law.s_params = repeat(2.0, 1.0, k);
      c.lamination.model = "homogeneous";
    }
    return c;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  std::string preset;
  root.get("preset", preset);
  if (!preset.empty()) c = preset_config(preset);

  root.get("command", c.command);
  root.get("parents", c.parents);
  if (const json* law = root.child("law")) {
    LawConfig l;
    Section s(*law, "law");
    s.get("kind", l.kind);
    s.get("params", l.params);
    s.get("r_params", l.r_params);
    s.get("s_params", l.s_params);
    s.get("name", l.name);
    s.finish();
    c.law = l;
  }
  if (const json* a = root.child("alpha")) {
    if (a->is_null())
      c.alpha.reset();
    else if (a->is_number())
      c.alpha = a->get<double>();
    else
      throw ConfigError("alpha", "expected a number or null");
  }
  root.get("c", c.c);
  root.get("base_profile", c.base_profile);
  root.get("depth", c.depth);
  root.get("grid", c.grid);
  root.get("method", c.method);
  root.get("seed", c.seed);
  root.get("replicas", c.replicas);
  root.get("jobs", c.jobs);
  root.get("mc_samples", c.mc_samples);
  root.get("chain_steps", c.chain_steps);
  if (const json* d = root.child("dimension")) {
    Section s(*d, "dimension");
    s.get("estimator", c.dimension.estimator);
    s.get("delta_first", c.dimension.delta_first);
    s.get("delta_last", c.dimension.delta_last);
    s.get("fit_first", c.dimension.fit_first);
    s.get("fit_last", c.dimension.fit_last);
    s.get("sample_size", c.dimension.sample_size);
    s.get("parametrization", c.dimension.parametrization);
    s.finish();
  }
  if (const json* d = root.child("ball_mass")) {
    Section s(*d, "ball_mass");
    s.get("radii", c.ball_mass.radii);
    s.get("gammas", c.ball_mass.gammas);
    s.get("samples", c.ball_mass.samples);
    s.finish();
  }
  if (const json* d = root.child("holder")) {
    Section s(*d, "holder");
    s.get("gammas", c.holder.gammas);
    s.get("lags", c.holder.lags);
    s.finish();
  }
  if (const json* d = root.child("heights")) {
    Section s(*d, "heights");
    s.get("samples", c.heights.samples);
    s.get("grid", c.heights.grid);
    s.finish();
  }
  if (const json* d = root.child("lamination")) {
    Section s(*d, "lamination");
    s.get("model", c.lamination.model);
    s.get("k", c.lamination.k);
    s.get("n", c.lamination.n);
    s.get("first_checkpoint", c.lamination.first_checkpoint);
    s.get("per_decade", c.lamination.per_decade);
    s.get("fit_from", c.lamination.fit_from);
    s.get("eval_points", c.lamination.eval_points);
    s.get("profile_grid", c.lamination.profile_grid);
    s.finish();
  }
  root.finish();
  validate(c);
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["command"] = c.command;
  if (!c.preset.empty()) j["preset"] = c.preset;
  j["parents"] = c.parents;
  json law;
  law["kind"] = c.law.kind;
  if (!c.law.params.empty()) law["params"] = c.law.params;
  if (!c.law.r_params.empty()) law["r_params"] = c.law.r_params;
  if (!c.law.s_params.empty()) law["s_params"] = c.law.s_params;
  if (!c.law.name.empty()) law["name"] = c.law.name;
  j["law"] = law;
  j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
  j["c"] = c.c;
  j["base_profile"] = c.base_profile;
  j["depth"] = c.depth;
  j["grid"] = c.grid;
  j["method"] = c.method;
  j["seed"] = c.seed;
  j["replicas"] = c.replicas;
  j["jobs"] = c.jobs;
  j["mc_samples"] = c.mc_samples;
  j["chain_steps"] = c.chain_steps;
  j["dimension"] = {{"estimator", c.dimension.estimator},     {"delta_first", c.dimension.delta_first},
                    {"delta_last", c.dimension.delta_last},   {"fit_first", c.dimension.fit_first},
                    {"fit_last", c.dimension.fit_last},       {"sample_size", c.dimension.sample_size},
                    {"parametrization", c.dimension.parametrization}};
  j["ball_mass"] = {{"radii", c.ball_mass.radii},
                    {"gammas", c.ball_mass.gammas},
                    {"samples", c.ball_mass.samples}};
  j["holder"] = {{"gammas", c.holder.gammas}, {"lags", c.holder.lags}};
  j["heights"] = {{"samples", c.heights.samples}, {"grid", c.heights.grid}};
  j["lamination"] = {{"model", c.lamination.model},
                     {"k", c.lamination.k},
                     {"n", c.lamination.n},
                     {"first_checkpoint", c.lamination.first_checkpoint},
                     {"per_decade", c.lamination.per_decade},
                     {"fit_from", c.lamination.fit_from},
                     {"eval_points", c.lamination.eval_points},
                     {"profile_grid", c.lamination.profile_grid}};
  return j;
}

void validate(const ExperimentConfig& c) {
  if (!kCommands.count(c.command)) throw ConfigError("command", "unknown command '" + c.command + "'");
  try {
    (void)StructuralTree::from_parents(c.parents);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("parents", e.what());
  }
  try {
    (void)make_law(c.law, static_cast<int>(c.parents.size()) + 1);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("law", e.what());
  }
  if (c.alpha && !(*c.alpha > 0.0 && *c.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0,1)");
  if (!(c.c > 0.0)) throw ConfigError("c", "must be positive");
  if (c.base_profile != "arch" && c.base_profile != "tent" && c.base_profile != "parabola")
    throw ConfigError("base_profile", "expected arch, tent or parabola");
  if (c.depth < 0 || c.depth > 60) throw ConfigError("depth", "must lie in [0, 60]");
  if (c.grid < 2 || (c.grid & (c.grid - 1)) != 0)
    throw ConfigError("grid", "must be a power of two >= 2");
  if (c.method != "exact" && c.method != "scheme") throw ConfigError("method", "expected exact or scheme");
  if (c.replicas < 1) throw ConfigError("replicas", "must be positive");
  if (c.jobs < 1) throw ConfigError("jobs", "must be positive");
  if (c.mc_samples < 2) throw ConfigError("mc_samples", "must be at least 2");
  if (c.chain_steps < 1) throw ConfigError("chain_steps", "must be positive");
  const auto& d = c.dimension;
  if (d.estimator != "divider" && d.estimator != "covering")
    throw ConfigError("dimension.estimator", "expected divider or covering");
  if (d.delta_first < 0 || d.delta_last < d.delta_first)
    throw ConfigError("dimension.delta_last", "ladder must satisfy 0 <= delta_first <= delta_last");
  int rungs = d.delta_last - d.delta_first + 1;
  if (d.fit_first < 0 || d.fit_last > rungs || d.fit_last - d.fit_first < 4)
    throw ConfigError("dimension.fit_last", "fit window needs at least 4 ladder points");
  if (d.parametrization != "mass" && d.parametrization != "lebesgue")
    throw ConfigError("dimension.parametrization", "expected mass or lebesgue");
  if (c.command == "dimension" && d.parametrization == "mass" && c.method != "exact")
    throw ConfigError("dimension.parametrization", "mass parametrization needs method exact");
  if (d.sample_size < 2) throw ConfigError("dimension.sample_size", "must be at least 2");
  for (double r : c.ball_mass.radii)
    if (!(r > 0.0)) throw ConfigError("ball_mass.radii", "radii must be positive");
  if (c.ball_mass.samples < 1) throw ConfigError("ball_mass.samples", "must be positive");
  for (double g : c.holder.gammas)
    if (!(g > 0.0 && g <= 1.0)) throw ConfigError("holder.gammas", "gamma must lie in (0,1]");
  for (int h : c.holder.lags)
    if (h < 1) throw ConfigError("holder.lags", "lags must be positive");
  if (c.heights.samples < 1) throw ConfigError("heights.samples", "must be positive");
  if (c.heights.grid < 2 || (c.heights.grid & (c.heights.grid - 1)) != 0)
    throw ConfigError("heights.grid", "must be a power of two >= 2");
  const auto& l = c.lamination;
  if (l.model != "recursive" && l.model != "homogeneous")
    throw ConfigError("lamination.model", "expected recursive or homogeneous");
  if (l.k < 2) throw ConfigError("lamination.k", "must be at least 2");
  if (l.first_checkpoint < 1 || l.n < l.first_checkpoint)
    throw ConfigError("lamination.n", "must be at least first_checkpoint");
  if (l.per_decade < 1) throw ConfigError("lamination.per_decade", "must be positive");
  if (l.eval_points < 1) throw ConfigError("lamination.eval_points", "must be positive");
  if (l.profile_grid < 0) throw ConfigError("lamination.profile_grid", "must be non-negative");
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("jobs");
  std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

ScalingLaw make_law(const LawConfig& l, int k) {
  auto check_len = [&](const std::vector<double>& v, const std::string& field) {
    if (static_cast<int>(v.size()) != k)
      throw ConfigError(field, "expected " + std::to_string(k) + " entries, got " +
                                   std::to_string(v.size()));
    for (double x : v)
      if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(field, "entries must be positive");
  };
  if (l.kind == "shared_dirichlet") {
    check_len(l.params, "law.params");
    return ScalingLaw::shared_dirichlet(l.params);
  }
  if (l.kind == "product_dirichlet") {
    check_len(l.r_params, "law.r_params");
    check_len(l.s_params, "law.s_params");
    return ScalingLaw::product_dirichlet(l.r_params, l.s_params);
  }
  if (l.kind == "custom") {
    if (l.name == "sorted-uniform") {
      // R = S = spacings of K-1 sorted uniforms
      return ScalingLaw::custom(l.name, k, [k](CounterRng& g, std::span<double> r, std::span<double> s) {
        std::vector<double> u(k + 1, 0.0);
        u[k] = 1.0;
        for (int i = 1; i < k; ++i) u[i] = uniform01(g);
        std::sort(u.begin(), u.end());
        for (int i = 0; i < k; ++i) r[i] = s[i] = std::max(u[i + 1] - u[i], 1e-300);
      });
    }
    if (l.name == "sampled-shared-dirichlet") {
      check_len(l.params, "law.params");
      auto p = l.params;
      return ScalingLaw::custom(l.name, k, [p](CounterRng& g, std::span<double> r, std::span<double> s) {
        sample_dirichlet(g, p, r);
        std::copy(r.begin(), r.end(), s.begin());
      });
    }
    throw ConfigError("law.name",
                      "unknown custom sampler '" + l.name +
                          "' (sorted-uniform, sampled-shared-dirichlet)");
  }
  throw ConfigError("law.kind", "expected shared_dirichlet, product_dirichlet or custom");
}

DecompositionSpec make_spec(const ExperimentConfig& c) {
  StructuralTree tree = StructuralTree::from_parents(c.parents);
  ScalingLaw law = make_law(c.law, tree.size());
  MonteCarloOptions opt{c.mc_samples, c.seed};
  if (c.alpha) {
    DecompositionSpec d{std::move(tree), std::move(law), *c.alpha, c.c, 0, 0.0};
    d.m_star = moment_threshold(d.law, d.alpha);
    return d;
  }
  return DecompositionSpec::make(std::move(tree), std::move(law), c.c, MomentMode::automatic, opt);
}

}  // namespace srtree
