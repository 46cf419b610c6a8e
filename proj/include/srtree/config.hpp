#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "srtree/structural.hpp"

namespace srtree {

// Config error carrying the offending field path.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), field(path) {}
  std::string field;
};

struct LawConfig {
  std::string kind = "shared_dirichlet";  // shared_dirichlet | product_dirichlet | custom
  std::vector<double> params;             // shared / custom
  std::vector<double> r_params, s_params; // product
  std::string name;                       // custom sampler id
};

struct DimensionConfig {
  std::string estimator = "divider";  // divider | covering
  int delta_first = 1, delta_last = 10;
  int fit_first = 2, fit_last = 6;  // ladder index window [first, last)
  int sample_size = 2048;           // covering only
  std::string parametrization = "mass";  // mass | lebesgue
};

struct BallMassConfig {
  std::vector<double> radii;
  std::vector<double> gammas{0.0};
  int samples = 200;
};

struct HolderConfig {
  std::vector<double> gammas;
  std::vector<int> lags{1};
};

struct HeightsConfig {
  int samples = 10000;
  int grid = 4096;
};

struct LaminationConfig {
  std::string model = "recursive";
  int k = 2;
  long long n = 100000;
  long long first_checkpoint = 100;
  int per_decade = 4;
  long long fit_from = 1000;
  int eval_points = 256;
  int profile_grid = 0;
};

struct ExperimentConfig {
  std::string command = "alpha";
  std::string preset;
  std::vector<int> parents{1, 1};
  LawConfig law;
  std::optional<double> alpha;
  double c = 1.0;
  std::string base_profile = "arch";
  int depth = 10;
  int grid = 16384;
  std::string method = "exact";  // exact | scheme
  std::uint64_t seed = 1;
  int replicas = 1;
  int jobs = 1;
  std::size_t mc_samples = 1000000;
  DimensionConfig dimension;
  BallMassConfig ball_mass;
  HolderConfig holder;
  HeightsConfig heights;
  LaminationConfig lamination;
  long long chain_steps = 1000;
};

// preset names: crt, lamination-z, homogeneous-h, kgon-recursive(k), kgon-homogeneous(k)
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// Strict parse: unknown keys and type errors raise ConfigError with the field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
nlohmann::json to_json(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);

// FNV-1a of the canonical JSON dump
std::uint64_t config_hash(const ExperimentConfig& c);

ScalingLaw make_law(const LawConfig& l, int k);
DecompositionSpec make_spec(const ExperimentConfig& c);

}  // namespace srtree
