#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sgcrl/agent.hpp"
#include "sgcrl/baselines.hpp"
#include "sgcrl/envs.hpp"
#include "sgcrl/metrics.hpp"
#include "sgcrl/theory.hpp"

namespace sgcrl {

/// Flat experiment configuration: key -> value text. Every recipe starts
/// from its own defaults (recipe_defaults) and accepts overrides of any
/// known key; see config_keys() for the documented set.
using ConfigMap = std::map<std::string, std::string>;

struct ConfigKey {
  std::string name;
  std::string help;
};
const std::vector<ConfigKey>& config_keys();

struct RecipeInfo {
  std::string name;
  std::string summary;
  /// Dynamics simulation rather than an environment run.
  bool theory = false;
};
const std::vector<RecipeInfo>& recipes();
const RecipeInfo& find_recipe(const std::string& name);

ConfigMap recipe_defaults(const std::string& recipe);
/// Defaults with `overrides` applied. Throws ConfigError on an unknown recipe
/// or key.
ConfigMap resolve_config(const std::string& recipe, const ConfigMap& overrides = {});

/// Parses "key=value". Throws ConfigError when '=' is missing.
std::pair<std::string, std::string> parse_assignment(const std::string& text);

TabularEnv make_env(const ConfigMap& cfg);

/// States named by a region spec: "" (none), "room:<k>" (four-rooms room
/// 0-3), "rect:<r0>,<c0>,<r1>,<c1>" (inclusive cell rectangle) or
/// "ids:<s>;<s>;..." (state ids).
std::vector<StateId> parse_region(const TabularEnv& env, const std::string& spec);

/// Goal state from "default", a state id, or "<row>,<col>".
StateId parse_state(const TabularEnv& env, const std::string& spec);

SgcrlConfig make_sgcrl_config(const TabularEnv& env, const ConfigMap& cfg);
GoalSpec make_goal_spec(const TabularEnv& env, const ConfigMap& cfg);
RmaxConfig make_rmax_config(const ConfigMap& cfg);
PsrlConfig make_psrl_config(const ConfigMap& cfg);

/// One seed of an environment recipe. The manifest carries the recipe name,
/// the config, and run-level scalars (see run_scalars). `on_checkpoint` sees
/// every checkpoint as it is produced.
RunArtifact run_recipe(const std::string& recipe, const ConfigMap& cfg, std::uint64_t seed,
                       const CheckpointFn& on_checkpoint = {});

/// Run-level readouts stored in manifest.scalars:
///   first_success_episode, first_success_transitions, first_majority_episode
///   (nan when absent), terminal_rate, coverage, pearson_pre (last checkpoint
///   before the first training success), pearson_final, pearson_final_window,
///   post_success_train_rate, sim_visited_initial / sim_visited_final,
///   share_room0..3 (four-rooms layouts), share_pinned, goal_reach_rate_<i>.
std::map<std::string, double> run_scalars(const RunArtifact& art, const TabularEnv& env,
                                          const std::vector<StateId>& pinned);

struct TheoryRun {
  DynamicsRun run;
  EquilibriumReport report;
  std::map<std::string, std::string> params;
};
TheoryRun run_theory(const std::string& recipe, const ConfigMap& cfg, std::uint64_t seed);
EquilibriumTolerances make_tolerances(const ConfigMap& cfg);
/// Every claim the recipe checks (lemma: alpha, beta; theorem: the three
/// theorem claims) passed.
bool theory_claims_pass(const std::string& recipe, const EquilibriumReport& rep);

struct SweepOptions {
  std::string recipe;
  ConfigMap config;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  int workers = 1;
};

struct SweepResult {
  int completed = 0;
  int failed = 0;
  /// Schema or invariant problems in the written artifacts.
  std::vector<std::string> invalid;
  std::vector<std::string> errors;
};

/// Runs every seed into out_dir/seed_<k>/ (theory recipes: out_dir/seed_<k>.csv
/// and .json), then writes the sweep summary. A seed that throws leaves an
/// artifact marked incomplete. Progress lines go to `log` when non-null.
SweepResult run_sweep(const SweepOptions& opts, std::ostream* log = nullptr);

struct SummaryRow {
  std::string recipe;
  std::string env;
  int runs = 0;
  /// Incomplete or unreadable runs, excluded from the statistics.
  int excluded = 0;
  /// Runs with a first success / first majority success.
  int succeeded = 0;
  int majority = 0;
  MeanSe first_success;
  MeanSe first_majority;
  MeanSe terminal_rate;
  MeanSe coverage;
};

/// Groups every run directory below `dir` by (recipe, env). Throws SchemaError
/// when no run directory is found.
std::vector<SummaryRow> summarize_runs(const std::string& dir);
std::string format_summary(const std::vector<SummaryRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Problems found by validate_artifact in every run directory below `dir`.
std::vector<std::string> validate_tree(const std::string& dir);

}  // namespace sgcrl
