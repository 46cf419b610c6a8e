#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "srtree/commands.hpp"
#include "srtree/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Self-similar random trees: index solver, excursion scheme, dimensions, laminations"};
  std::string command, config_path, preset, out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas, jobs;
  bool list = false;
  app.add_option("command", command,
                 "alpha | excursion | dimension | timechange | heights | lamination | chain | degrees");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--preset", preset, "crt, lamination-z, homogeneous-h, kgon-recursive(k), kgon-homogeneous(k)");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--replicas", replicas, "number of replicas");
  app.add_option("--jobs", jobs, "worker threads");
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_flag("--list-presets", list, "print preset names and exit");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& p : srtree::preset_names()) std::cout << p << '\n';
    return 0;
  }
  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw srtree::ConfigError("--config", "cannot open " + config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      try {
        j = nlohmann::json::parse(ss.str());
      } catch (const nlohmann::json::parse_error& e) {
        throw srtree::ConfigError("<root>", std::string("invalid JSON: ") + e.what());
      }
      if (!j.is_object()) throw srtree::ConfigError("<root>", "expected an object");
    }
    if (!preset.empty()) j["preset"] = preset;
    if (!command.empty()) j["command"] = command;
    if (seed) j["seed"] = *seed;
    if (replicas) j["replicas"] = *replicas;
    if (jobs) j["jobs"] = *jobs;
    srtree::ExperimentConfig cfg = srtree::parse_config(j);
    return srtree::run(cfg, out, std::cout);
  } catch (const srtree::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
