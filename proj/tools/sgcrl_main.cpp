// sgcrl: run experiment recipes, summarize and validate sweep directories.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgcrl/common.hpp"
#include "sgcrl/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

sgcrl::ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sgcrl::ConfigError("cannot read config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw sgcrl::ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw sgcrl::ConfigError("config file must hold a JSON object");
  sgcrl::ConfigMap out;
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) out[k] = v.get<std::string>();
    else if (v.is_boolean()) out[k] = v.get<bool>() ? "true" : "false";
    else if (v.is_number_integer()) out[k] = std::to_string(v.get<long long>());
    else if (v.is_number()) out[k] = v.dump();
    else throw sgcrl::ConfigError("config key '" + k + "' must be a scalar");
  }
  return out;
}

std::string key_help() {
  std::ostringstream os;
  os << "Config keys (set with --set key=value or a JSON object via --config):\n";
  for (const auto& k : sgcrl::config_keys()) os << "  " << k.name << ": " << k.help << "\n";
  os << "Recipes:\n";
  for (const auto& r : sgcrl::recipes()) os << "  " << r.name << ": " << r.summary << "\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular single-goal contrastive RL lab"};
  app.footer(key_help());
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a recipe over seeds");
  std::string recipe;
  std::string env_name;
  int grid = 0;
  int disks = 0;
  int seeds = 1;
  std::uint64_t first_seed = 0;
  std::string out_dir;
  std::vector<std::string> sets;
  std::string config_file;
  int workers = 1;
  run->add_option("recipe", recipe, "Recipe name")->required();
  run->add_option("--env", env_name, "Environment (fourrooms, hanoi, lwall, spiral, layout)");
  run->add_option("--grid", grid, "Four-rooms side length");
  run->add_option("--disks", disks, "Hanoi disk count");
  run->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  run->add_option("--first-seed", first_seed, "Seed of the first run");
  run->add_option("--out", out_dir, "Output directory (default runs/<recipe>)");
  run->add_option("--set", sets, "Config override key=value (repeatable)");
  run->add_option("--config", config_file, "JSON object of config keys");
  run->add_option("--workers", workers, "Seeds run concurrently")->check(CLI::PositiveNumber);

  auto* summarize = app.add_subcommand("summarize", "Summarize a sweep directory");
  std::string summarize_dir;
  summarize->add_option("dir", summarize_dir, "Sweep directory")->required();

  auto* validate = app.add_subcommand("validate", "Check run artifacts against the schema");
  std::string validate_dir;
  validate->add_option("dir", validate_dir, "Directory holding run artifacts")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*run) {
    sgcrl::SweepOptions opts;
    try {
      sgcrl::ConfigMap overrides;
      if (!config_file.empty()) {
        overrides = read_config_file(config_file);
        if (const auto it = overrides.find("seeds"); it != overrides.end()) {
          if (run->count("--seeds") == 0) seeds = std::stoi(it->second);
          overrides.erase(it);
        }
      }
      if (!env_name.empty()) overrides["env"] = env_name;
      if (grid > 0) overrides["grid"] = std::to_string(grid);
      if (disks > 0) overrides["disks"] = std::to_string(disks);
      for (const auto& s : sets) {
        const auto [k, v] = sgcrl::parse_assignment(s);
        overrides[k] = v;
      }
      opts.recipe = recipe;
      opts.config = sgcrl::resolve_config(recipe, overrides);
      for (int i = 0; i < seeds; ++i) opts.seeds.push_back(first_seed + static_cast<std::uint64_t>(i));
      opts.out_dir = out_dir.empty() ? "runs/" + recipe : out_dir;
      opts.workers = workers;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    }
    try {
      const auto res = sgcrl::run_sweep(opts, &std::cerr);
      for (const auto& p : res.invalid) std::cerr << "invalid: " << p << "\n";
      if (res.failed > 0) return kExitRuntime;
      if (!res.invalid.empty()) return kExitValidation;
      return kExitOk;
    } catch (const sgcrl::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }

  if (*summarize) {
    try {
      const auto rows = sgcrl::summarize_runs(summarize_dir);
      std::cout << sgcrl::format_summary(rows);
      int excluded = 0;
      for (const auto& r : rows) excluded += r.excluded;
      if (excluded > 0) {
        std::cerr << excluded << " run(s) incomplete or unreadable and excluded\n";
        return kExitValidation;
      }
      return kExitOk;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    }
  }

  if (*validate) {
    try {
      const auto problems = sgcrl::validate_tree(validate_dir);
      for (const auto& p : problems) std::cout << p << "\n";
      if (problems.empty()) std::cout << "ok\n";
      return problems.empty() ? kExitOk : kExitValidation;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    }
  }
  return kExitOk;
}
