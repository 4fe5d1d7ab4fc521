#include "sgcrl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sgcrl/artifact.hpp"
#include "sgcrl/io_util.hpp"

#ifndef SGCRL_VERSION
#define SGCRL_VERSION "unknown"
#endif

namespace sgcrl {

namespace fs = std::filesystem;

namespace {

const std::vector<ConfigKey> kEnvKeys = {
    {"env", "fourrooms | hanoi | lwall | spiral | layout"},
    {"grid", "four-rooms side length (odd, >= 5)"},
    {"disks", "Hanoi disk count"},
    {"layout_file", "text maze for env=layout"},
    {"goal", "goal state: default, a state id, or row,col"},
    {"max_steps", "episode length; auto = 40 for Hanoi, 100 otherwise"},
    {"terminate_on_goal", "end episodes once every goal is reached"},
    {"goal_spec", "real | imaginary | multi"},
    {"goals", "multi-goal states, ';'-separated (default, id or row,col)"},
    {"goal_weights", "multi-goal weights, ';'-separated; empty = equal"},
    {"dim", "embedding dimension"},
    {"common_scale", "weight of the shared Gaussian vector x at init"},
    {"noise_scale", "per-state noise scale at init"},
    {"learning_rate", "InfoNCE step size"},
    {"batch_size", "triplets per update"},
    {"normalize", "renormalize rows after each update"},
    {"loss_direction", "backward | forward"},
    {"anchor_stop_gradient", "freeze anchor slots during updates"},
    {"discount", "gamma for future sampling and baselines"},
    {"episodes", "training episodes"},
    {"updates_per_episode", "InfoNCE steps after each episode"},
    {"eval_every", "episodes between checkpoints"},
    {"eval_runs", "evaluation rollouts per checkpoint"},
    {"buffer_capacity", "replay capacity in transitions"},
    {"snapshot_every", "keep an embedding dump every this many checkpoints (0 = never)"},
    {"dense_until_success", "checkpoint every episode until the first success"},
    {"temperature", "softmax temperature of the actor"},
    {"skip_noops", "never pick actions that leave the state unchanged"},
    {"representation", "vector | scalar"},
    {"collection", "single_goal | random_goal"},
    {"pin_goal", "region pinned to psi(g)"},
    {"pin_neg_goal", "region pinned to -psi(g)"},
    {"orthogonal_init", "region initialized orthogonal to the goal embedding"},
    {"goal_pin", "goal-relative pins: track (follow the learned psi(g)) | frozen (hold psi(g) and the goal row at init)"},
    {"known_threshold", "R-MAX visits before a pair is known"},
    {"r_max", "R-MAX optimistic reward"},
    {"vi_tol", "R-MAX value-iteration tolerance"},
    {"psrl_prior", "PSRL symmetric Dirichlet pseudo-count"},
    {"psrl_tol", "PSRL value-iteration tolerance"},
    {"collector", "yoked data source: rmax | psrl | sgcrl"},
    {"collector_seed_offset", "seed offset of a yoked SGCRL collector (0 = identical copy)"},
};

const std::vector<ConfigKey> kTheoryKeys = {
    {"n", "pairs"},
    {"d", "dimension"},
    {"c", "initial projection onto z (theorem3)"},
    {"k", "positives per anchor (lemma1)"},
    {"eta", "learning rate"},
    {"dyn_max_steps", "step cap"},
    {"dyn_tol", "convergence threshold on row displacement"},
    {"loss_direction", "backward | forward"},
    {"record_every", "steps between recorded stats"},
    {"tol_c", "terminal |c| bound"},
    {"tol_c_equal", "per-step projection spread bound"},
    {"tol_alignment", "matched-pair u.v lower bound"},
    {"tol_cross", "unmatched |u.v| upper bound"},
    {"tol_alpha", "matched residual alignment lower bound"},
    {"tol_beta", "bundle residual alignment lower bound"},
};

ConfigMap env_defaults() {
  return {
      {"env", "fourrooms"},
      {"grid", "11"},
      {"disks", "3"},
      {"layout_file", ""},
      {"goal", "default"},
      {"max_steps", "auto"},
      {"terminate_on_goal", "true"},
      {"goal_spec", "real"},
      {"goals", ""},
      {"goal_weights", ""},
      {"dim", "16"},
      {"common_scale", "1"},
      {"noise_scale", "0.1"},
      {"learning_rate", "0.01"},
      {"batch_size", "128"},
      {"normalize", "true"},
      {"loss_direction", "backward"},
      {"anchor_stop_gradient", "false"},
      {"discount", "0.99"},
      {"episodes", "2000"},
      {"updates_per_episode", "10"},
      {"eval_every", "10"},
      {"eval_runs", "5"},
      {"buffer_capacity", "1000"},
      {"snapshot_every", "0"},
      {"dense_until_success", "true"},
      {"temperature", "0.1"},
      {"skip_noops", "true"},
      {"representation", "vector"},
      {"collection", "single_goal"},
      {"pin_goal", ""},
      {"pin_neg_goal", ""},
      {"orthogonal_init", ""},
      {"goal_pin", "track"},
      {"known_threshold", "1"},
      {"r_max", "1"},
      {"vi_tol", "1e-8"},
      {"psrl_prior", "0.01"},
      {"psrl_tol", "1e-6"},
      {"collector", "rmax"},
      {"collector_seed_offset", "1000"},
  };
}

ConfigMap theory_defaults() {
  return {
      {"n", "128"},          {"d", "128"},           {"c", "0.6"},
      {"k", "1"},            {"eta", "0.01"},        {"dyn_max_steps", "200000"},
      {"dyn_tol", "1e-7"},   {"loss_direction", "backward"},
      {"record_every", "100"},
      {"tol_c", "0.01"},     {"tol_c_equal", "1e-6"}, {"tol_alignment", "0.99"},
      {"tol_cross", "0.05"}, {"tol_alpha", "0.99"},  {"tol_beta", "0.99"},
  };
}

const std::string& get(const ConfigMap& cfg, const std::string& key) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

double get_double(const ConfigMap& cfg, const std::string& key) {
  try {
    const double v = io::parse_double(get(cfg, key));
    if (std::isnan(v)) throw SchemaError("nan");
    return v;
  } catch (const SchemaError&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + get(cfg, key) + "'");
  }
}

long get_long(const ConfigMap& cfg, const std::string& key) {
  try {
    return io::parse_long(get(cfg, key));
  } catch (const SchemaError&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + get(cfg, key) + "'");
  }
}

int get_int(const ConfigMap& cfg, const std::string& key) {
  const long v = get_long(cfg, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + key + "' is out of range");
  return static_cast<int>(v);
}

bool get_bool(const ConfigMap& cfg, const std::string& key) {
  const std::string& v = get(cfg, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

LossDirection get_direction(const ConfigMap& cfg) {
  const std::string& v = get(cfg, "loss_direction");
  if (v == "backward") return LossDirection::Backward;
  if (v == "forward") return LossDirection::Forward;
  throw ConfigError("loss_direction must be backward or forward");
}

std::vector<int> parse_ints(const std::string& text, char sep) {
  std::vector<int> out;
  for (const auto& part : io::split(text, sep)) {
    try {
      out.push_back(static_cast<int>(io::parse_long(part)));
    } catch (const SchemaError&) {
      throw ConfigError("expected integers in '" + text + "'");
    }
  }
  return out;
}

double nan_or(const std::optional<double>& v) { return v.value_or(std::nan("")); }

double nan_or_long(const std::optional<long>& v) {
  return v ? static_cast<double>(*v) : std::nan("");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> all = [] {
    std::vector<ConfigKey> keys = kEnvKeys;
    for (const auto& k : kTheoryKeys)
      if (k.name != "loss_direction") keys.push_back(k);
    return keys;
  }();
  return all;
}

const std::vector<RecipeInfo>& recipes() {
  static const std::vector<RecipeInfo> list = {
      {"sgcrl", "tabular SGCRL towards the environment goal", false},
      {"sgcrl_imaginary_goal", "single-goal collection towards an unreachable goal embedding", false},
      {"sgcrl_random_goal", "imaginary goal, episodes collected under random goal embeddings",
       false},
      {"sgcrl_multi_goal", "two equal-weight goals in the top-right room", false},
      {"sgcrl_pinned_patch", "top-right patch pinned to psi(g)", false},
      {"sgcrl_safety", "top-left room pinned to -psi(g)", false},
      {"ablation_scalar", "scalar similarity table instead of embeddings", false},
      {"rmax", "R-MAX baseline", false},
      {"psrl", "posterior sampling baseline", false},
      {"yoked", "SGCRL learner trained on another agent's episodes", false},
      {"theorem3", "equilibrium dynamics from a shared-component start", true},
      {"lemma1", "alignment dynamics from a pure-noise start", true},
  };
  return list;
}

const RecipeInfo& find_recipe(const std::string& name) {
  for (const auto& r : recipes())
    if (r.name == name) return r;
  std::string known;
  for (const auto& r : recipes()) known += (known.empty() ? "" : ", ") + r.name;
  throw ConfigError("unknown recipe '" + name + "' (known: " + known + ")");
}

ConfigMap recipe_defaults(const std::string& recipe) {
  const RecipeInfo& info = find_recipe(recipe);
  if (info.theory) return theory_defaults();
  ConfigMap cfg = env_defaults();
  if (recipe == "sgcrl_imaginary_goal") {
    cfg["goal_spec"] = "imaginary";
  } else if (recipe == "sgcrl_random_goal") {
    cfg["goal_spec"] = "imaginary";
    cfg["collection"] = "random_goal";
  } else if (recipe == "sgcrl_multi_goal") {
    cfg["goal_spec"] = "multi";
    cfg["goals"] = "default;4,6";
  } else if (recipe == "sgcrl_pinned_patch") {
    cfg["pin_goal"] = "rect:3,9,4,10";
  } else if (recipe == "sgcrl_safety") {
    cfg["pin_neg_goal"] = "room:0";
  } else if (recipe == "ablation_scalar") {
    cfg["representation"] = "scalar";
  }
  return cfg;
}

ConfigMap resolve_config(const std::string& recipe, const ConfigMap& overrides) {
  ConfigMap cfg = recipe_defaults(recipe);
  for (const auto& [k, v] : overrides) {
    if (!cfg.count(k))
      throw ConfigError("config key '" + k + "' does not apply to recipe '" + recipe + "'");
    cfg[k] = v;
  }
  return cfg;
}

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
  const auto pos = text.find('=');
  if (pos == std::string::npos || pos == 0)
    throw ConfigError("expected key=value, got '" + text + "'");
  return {text.substr(0, pos), text.substr(pos + 1)};
}

StateId parse_state(const TabularEnv& env, const std::string& spec) {
  if (spec == "default") return env.goal();
  if (spec.find(',') != std::string::npos) {
    const auto rc = parse_ints(spec, ',');
    if (rc.size() != 2) throw ConfigError("cell must be row,col: '" + spec + "'");
    const auto s = env.state_at({rc[0], rc[1]});
    if (!s) throw ConfigError("cell " + spec + " is not a free cell of " + env.name());
    return *s;
  }
  const auto ids = parse_ints(spec, ';');
  if (ids.size() != 1 || ids[0] < 0 || ids[0] >= env.num_states())
    throw ConfigError("bad state '" + spec + "'");
  return ids[0];
}

std::vector<StateId> parse_region(const TabularEnv& env, const std::string& spec) {
  std::set<StateId> out;
  if (spec.empty()) return {};
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("region must be kind:args, got '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string args = spec.substr(colon + 1);
  if (kind == "room") {
    const auto r = parse_ints(args, ',');
    if (r.size() != 1 || r[0] < 0 || r[0] > 3) throw ConfigError("room index must be 0-3");
    for (StateId s = 0; s < env.num_states(); ++s)
      if (fourrooms_room(env, s) == r[0]) out.insert(s);
  } else if (kind == "rect") {
    const auto r = parse_ints(args, ',');
    if (r.size() != 4) throw ConfigError("rect needs r0,c0,r1,c1");
    for (int row = std::min(r[0], r[2]); row <= std::max(r[0], r[2]); ++row)
      for (int col = std::min(r[1], r[3]); col <= std::max(r[1], r[3]); ++col)
        if (const auto s = env.state_at({row, col})) out.insert(*s);
  } else if (kind == "ids") {
    for (int s : parse_ints(args, ';')) {
      if (s < 0 || s >= env.num_states()) throw ConfigError("state id out of range in region");
      out.insert(s);
    }
  } else {
    throw ConfigError("unknown region kind '" + kind + "'");
  }
  if (out.empty()) throw ConfigError("region '" + spec + "' contains no states");
  return {out.begin(), out.end()};
}

TabularEnv make_env(const ConfigMap& cfg) {
  const std::string& name = get(cfg, "env");
  TabularEnv env = [&] {
    if (name == "fourrooms") return make_fourrooms(get_int(cfg, "grid"));
    if (name == "hanoi") return make_hanoi(get_int(cfg, "disks"));
    if (name == "lwall") return make_lwall();
    if (name == "spiral") return make_spiral();
    if (name == "layout") {
      if (get(cfg, "layout_file").empty()) throw ConfigError("env=layout needs layout_file");
      return load_layout_file(get(cfg, "layout_file"));
    }
    throw ConfigError("unknown env '" + name + "'");
  }();
  const std::string& goal = get(cfg, "goal");
  if (goal != "default") env = env.with_endpoints(env.start(), parse_state(env, goal));
  return env;
}

namespace {

EpisodeSpec make_episode(const ConfigMap& cfg) {
  EpisodeSpec ep;
  const std::string& ms = get(cfg, "max_steps");
  ep.max_steps = ms == "auto" ? (get(cfg, "env") == "hanoi" ? 40 : 100) : get_int(cfg, "max_steps");
  ep.terminate_on_goal = get_bool(cfg, "terminate_on_goal");
  ep.validate();
  return ep;
}

TrainLoopConfig make_loop(const ConfigMap& cfg) {
  TrainLoopConfig loop;
  loop.discount = get_double(cfg, "discount");
  loop.episodes = get_long(cfg, "episodes");
  loop.updates_per_episode = get_int(cfg, "updates_per_episode");
  loop.eval_every = get_long(cfg, "eval_every");
  loop.eval_runs = get_int(cfg, "eval_runs");
  const long cap = get_long(cfg, "buffer_capacity");
  if (cap < 1) throw ConfigError("buffer_capacity must be >= 1");
  loop.buffer_capacity = static_cast<std::size_t>(cap);
  loop.snapshot_every = get_long(cfg, "snapshot_every");
  loop.dense_until_success = get_bool(cfg, "dense_until_success");
  loop.validate();
  return loop;
}

}  // namespace

SgcrlConfig make_sgcrl_config(const TabularEnv& env, const ConfigMap& cfg) {
  SgcrlConfig sc;
  sc.init.dim = get_int(cfg, "dim");
  sc.init.common_scale = get_double(cfg, "common_scale");
  sc.init.noise_scale = get_double(cfg, "noise_scale");
  sc.update.learning_rate = get_double(cfg, "learning_rate");
  sc.update.batch_size = get_int(cfg, "batch_size");
  sc.update.normalize = get_bool(cfg, "normalize");
  sc.update.direction = get_direction(cfg);
  sc.update.anchor_stop_gradient = get_bool(cfg, "anchor_stop_gradient");
  sc.loop = make_loop(cfg);
  sc.episode = make_episode(cfg);
  sc.temperature = get_double(cfg, "temperature");
  sc.skip_noops = get_bool(cfg, "skip_noops");
  const std::string& gp = get(cfg, "goal_pin");
  if (gp == "track") sc.goal_pin = GoalPinMode::Track;
  else if (gp == "frozen") sc.goal_pin = GoalPinMode::Frozen;
  else throw ConfigError("goal_pin must be track or frozen");

  const std::string& rep = get(cfg, "representation");
  if (rep == "vector") sc.representation = Representation::Vector;
  else if (rep == "scalar") sc.representation = Representation::Scalar;
  else throw ConfigError("representation must be vector or scalar");

  const std::string& col = get(cfg, "collection");
  if (col == "single_goal") sc.collection = Collection::SingleGoal;
  else if (col == "random_goal") sc.collection = Collection::RandomGoal;
  else throw ConfigError("collection must be single_goal or random_goal");

  const std::pair<const char*, InterventionKind> kinds[] = {
      {"pin_goal", InterventionKind::PinToGoal},
      {"pin_neg_goal", InterventionKind::PinToNegGoal},
      {"orthogonal_init", InterventionKind::OrthogonalInit}};
  for (const auto& [key, kind] : kinds) {
    auto states = parse_region(env, get(cfg, key));
    if (!states.empty()) sc.interventions.push_back({kind, std::move(states)});
  }
  sc.validate();
  return sc;
}

GoalSpec make_goal_spec(const TabularEnv& env, const ConfigMap& cfg) {
  const std::string& kind = get(cfg, "goal_spec");
  if (kind == "real") return RealGoal{env.goal()};
  if (kind == "imaginary") return ImaginaryGoal{};
  if (kind != "multi") throw ConfigError("goal_spec must be real, imaginary or multi");
  MultiGoal mg;
  const auto names = io::split(get(cfg, "goals"), ';');
  std::vector<double> weights;
  if (!get(cfg, "goal_weights").empty())
    for (const auto& w : io::split(get(cfg, "goal_weights"), ';')) {
      try {
        weights.push_back(io::parse_double(w));
      } catch (const SchemaError&) {
        throw ConfigError("goal_weights must be numbers");
      }
    }
  if (names.size() < 2 || names[0].empty()) throw ConfigError("multi goal needs >= 2 goals");
  if (!weights.empty() && weights.size() != names.size())
    throw ConfigError("goal_weights must match goals in length");
  for (std::size_t i = 0; i < names.size(); ++i)
    mg.goals.emplace_back(parse_state(env, names[i]),
                          weights.empty() ? 1.0 / static_cast<double>(names.size()) : weights[i]);
  return mg;
}

RmaxConfig make_rmax_config(const ConfigMap& cfg) {
  RmaxConfig rc;
  rc.known_threshold = get_int(cfg, "known_threshold");
  rc.r_max = get_double(cfg, "r_max");
  rc.discount = get_double(cfg, "discount");
  rc.tol = get_double(cfg, "vi_tol");
  rc.episode = make_episode(cfg);
  rc.validate();
  return rc;
}

PsrlConfig make_psrl_config(const ConfigMap& cfg) {
  PsrlConfig pc;
  pc.prior = get_double(cfg, "psrl_prior");
  pc.discount = get_double(cfg, "discount");
  pc.tol = get_double(cfg, "psrl_tol");
  pc.episode = make_episode(cfg);
  pc.validate();
  return pc;
}

std::map<std::string, double> run_scalars(const RunArtifact& art, const TabularEnv& env,
                                          const std::vector<StateId>& pinned) {
  std::map<std::string, double> sc;
  const auto& ev = art.events;
  sc["first_success_episode"] = nan_or_long(ev.first_success_episode);
  sc["first_success_transitions"] = nan_or_long(ev.first_success_transitions);
  sc["first_majority_episode"] = nan_or_long(ev.first_majority_success_episode);
  if (art.checkpoints.empty()) return sc;

  sc["terminal_rate"] = success_summary(art).terminal_rate;
  const Checkpoint& last = art.checkpoints.back();
  sc["coverage"] = coverage(last.visitation, env.num_states());

  const auto cumulative = correlation_series(art, VisitWindow::Cumulative);
  const auto window = correlation_series(art, VisitWindow::PerCheckpoint);
  sc["pearson_final"] = nan_or(cumulative.back().pearson_r);
  sc["pearson_final_window"] = nan_or(window.back().pearson_r);
  sc["pearson_pre"] = std::nan("");
  if (ev.first_success_episode) {
    for (std::size_t i = 0; i < art.checkpoints.size(); ++i)
      if (art.checkpoints[i].episode < *ev.first_success_episode)
        sc["pearson_pre"] = nan_or(cumulative[i].pearson_r);

    long eps = 0, wins = 0;
    for (std::size_t i = 1; i < art.checkpoints.size(); ++i) {
      if (art.checkpoints[i - 1].episode < *ev.first_success_episode) continue;
      eps += art.checkpoints[i].window_episodes;
      wins += art.checkpoints[i].window_successes;
    }
    sc["post_success_train_rate"] =
        eps > 0 ? static_cast<double>(wins) / static_cast<double>(eps) : std::nan("");
  }

  for (const auto& cp : art.checkpoints) {
    if (const auto m = mean_similarity_of_visited(cp)) {
      sc["sim_visited_initial"] = *m;
      break;
    }
  }
  sc["sim_visited_final"] = nan_or(mean_similarity_of_visited(last));

  if (env.has_layout() && env.name().rfind("fourrooms", 0) == 0) {
    for (int room = 0; room < 4; ++room) {
      std::vector<StateId> states;
      for (StateId s = 0; s < env.num_states(); ++s)
        if (fourrooms_room(env, s) == room) states.push_back(s);
      sc["share_room" + std::to_string(room)] = visitation_share(last.visitation, states);
    }
  }
  if (!pinned.empty()) sc["share_pinned"] = visitation_share(last.visitation, pinned);

  const auto terminal = terminal_window(art);
  const std::size_t goals = last.goal_reach_k.size();
  for (std::size_t g = 0; g < goals; ++g) {
    long k = 0, n = 0;
    for (const Checkpoint* cp : terminal) {
      if (cp->goal_reach_k.size() != goals) continue;
      k += cp->goal_reach_k[g];
      n += cp->eval_success_n;
    }
    sc["goal_reach_rate_" + std::to_string(g)] =
        n > 0 ? static_cast<double>(k) / static_cast<double>(n) : std::nan("");
  }
  return sc;
}

RunArtifact run_recipe(const std::string& recipe, const ConfigMap& cfg, std::uint64_t seed,
                       const CheckpointFn& on_checkpoint) {
  if (find_recipe(recipe).theory)
    throw ConfigError("recipe '" + recipe + "' is a dynamics simulation; use run_theory");
  const TabularEnv env = make_env(cfg);
  const SgcrlConfig sc = make_sgcrl_config(env, cfg);
  std::vector<StateId> pinned;
  for (const auto& iv : sc.interventions)
    if (iv.kind != InterventionKind::OrthogonalInit)
      pinned.insert(pinned.end(), iv.states.begin(), iv.states.end());

  RunArtifact art;
  if (recipe == "rmax") {
    RmaxAgent agent(env, make_rmax_config(cfg));
    art = run_loop(env, agent, agent, sc.loop, on_checkpoint);
  } else if (recipe == "psrl") {
    PsrlAgent agent(env, make_psrl_config(cfg), seed);
    art = run_loop(env, agent, agent, sc.loop, on_checkpoint);
  } else if (recipe == "yoked") {
    SgcrlAgent learner(env, make_goal_spec(env, cfg), sc, seed);
    const std::string& source = get(cfg, "collector");
    std::unique_ptr<Agent> collector;
    if (source == "rmax") {
      collector = std::make_unique<RmaxAgent>(env, make_rmax_config(cfg));
    } else if (source == "psrl") {
      collector = std::make_unique<PsrlAgent>(env, make_psrl_config(cfg), seed);
    } else if (source == "sgcrl") {
      const auto offset = static_cast<std::uint64_t>(get_long(cfg, "collector_seed_offset"));
      collector = std::make_unique<SgcrlAgent>(env, make_goal_spec(env, cfg), sc, seed + offset);
    } else {
      throw ConfigError("collector must be rmax, psrl or sgcrl");
    }
    art = run_loop(env, *collector, learner, sc.loop, on_checkpoint);
  } else {
    art = train(env, make_goal_spec(env, cfg), sc, seed, on_checkpoint);
  }
  art.manifest.recipe = recipe;
  art.manifest.seed = seed;
  art.manifest.config = cfg;
  art.manifest.code_version = SGCRL_VERSION;
  art.manifest.scalars = run_scalars(art, env, pinned);
  return art;
}

EquilibriumTolerances make_tolerances(const ConfigMap& cfg) {
  EquilibriumTolerances tol;
  tol.c_terminal = get_double(cfg, "tol_c");
  tol.c_equal = get_double(cfg, "tol_c_equal");
  tol.alignment = get_double(cfg, "tol_alignment");
  tol.cross = get_double(cfg, "tol_cross");
  tol.alpha = get_double(cfg, "tol_alpha");
  tol.beta = get_double(cfg, "tol_beta");
  return tol;
}

TheoryRun run_theory(const std::string& recipe, const ConfigMap& cfg, std::uint64_t seed) {
  if (!find_recipe(recipe).theory)
    throw ConfigError("recipe '" + recipe + "' is not a dynamics simulation");
  const int n = get_int(cfg, "n");
  const int d = get_int(cfg, "d");
  DynamicsState st = recipe == "theorem3" ? init_theorem3(n, d, get_double(cfg, "c"), seed)
                                          : init_lemma1(n, d, get_int(cfg, "k"), seed);
  DynamicsConfig dc;
  dc.learning_rate = get_double(cfg, "eta");
  dc.max_steps = get_long(cfg, "dyn_max_steps");
  dc.tol = get_double(cfg, "dyn_tol");
  dc.direction = get_direction(cfg);
  dc.record_every = get_long(cfg, "record_every");
  TheoryRun out;
  out.run = run_dynamics(st, dc);
  out.report = equilibrium_report(out.run, make_tolerances(cfg));
  out.params = cfg;
  out.params["recipe"] = recipe;
  out.params["seed"] = std::to_string(seed);
  out.params["code_version"] = SGCRL_VERSION;
  return out;
}

bool theory_claims_pass(const std::string& recipe, const EquilibriumReport& rep) {
  if (recipe == "theorem3")
    return rep.equal_projection == Verdict::Pass && rep.aligned == Verdict::Pass &&
           rep.decayed == Verdict::Pass;
  return rep.lemma_alpha == Verdict::Pass && (!rep.lemma_beta || *rep.lemma_beta == Verdict::Pass);
}

namespace {

std::vector<fs::path> run_dirs(const std::string& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw SchemaError(dir + " is not a directory");
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
      out.push_back(entry.path().parent_path());
  std::sort(out.begin(), out.end());
  return out;
}

void run_env_seed(const SweepOptions& opts, std::uint64_t seed, const fs::path& dir) {
  RunArtifact partial;
  partial.manifest.recipe = opts.recipe;
  partial.manifest.seed = seed;
  partial.manifest.config = opts.config;
  partial.manifest.code_version = SGCRL_VERSION;
  try {
    RunArtifact art = run_recipe(opts.recipe, opts.config, seed, [&](const Checkpoint& cp) {
      partial.checkpoints.push_back(cp);
    });
    emit_artifact(art, dir.string());
  } catch (...) {
    partial.manifest.complete = false;
    try {
      emit_artifact(partial, dir.string());
    } catch (...) {
      // The original error is the one worth reporting.
    }
    throw;
  }
}

void run_theory_seed(const SweepOptions& opts, std::uint64_t seed, const fs::path& stem,
                     nlohmann::json& record) {
  const TheoryRun tr = run_theory(opts.recipe, opts.config, seed);
  write_dynamics(tr.run, tr.report, tr.params, stem.string());
  record = {{"seed", seed},
            {"steps", tr.report.steps},
            {"converged", tr.report.converged},
            {"claims_pass", theory_claims_pass(opts.recipe, tr.report)}};
}

}  // namespace

SweepResult run_sweep(const SweepOptions& opts, std::ostream* log) {
  const RecipeInfo& info = find_recipe(opts.recipe);
  if (opts.seeds.empty()) throw ConfigError("no seeds given");
  if (opts.workers < 1) throw ConfigError("workers must be >= 1");
  // Validate the configuration once before any output is written.
  if (info.theory) {
    make_tolerances(opts.config);
  } else {
    const TabularEnv env = make_env(opts.config);
    make_sgcrl_config(env, opts.config);
  }
  const fs::path root(opts.out_dir);
  fs::create_directories(root);

  SweepResult result;
  std::vector<nlohmann::json> records(opts.seeds.size());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < opts.seeds.size(); i = next++) {
      const std::uint64_t seed = opts.seeds[i];
      const std::string name = "seed_" + std::to_string(seed);
      try {
        if (info.theory) {
          run_theory_seed(opts, seed, root / name, records[i]);
        } else {
          fs::remove_all(root / name);
          run_env_seed(opts, seed, root / name);
        }
        std::lock_guard lock(mu);
        ++result.completed;
        if (log) *log << opts.recipe << " " << name << ": done\n" << std::flush;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        ++result.failed;
        result.errors.push_back(name + ": " + e.what());
        records[i] = {{"seed", seed}, {"error", e.what()}};
        if (log) *log << opts.recipe << " " << name << ": failed: " << e.what() << "\n" << std::flush;
      }
    }
  };
  const int n_threads = std::min<int>(opts.workers, static_cast<int>(opts.seeds.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (info.theory) {
    int passing = 0;
    for (const auto& r : records)
      if (r.contains("claims_pass") && r.at("claims_pass").get<bool>()) ++passing;
    nlohmann::json summary = {{"recipe", opts.recipe},
                              {"params", opts.config},
                              {"runs", records},
                              {"claims_pass", passing},
                              {"seeds", opts.seeds.size()}};
    io::write_file((root / "summary.json").string(), summary.dump(2) + "\n");
    if (log) *log << opts.recipe << ": claims hold in " << passing << " of " << opts.seeds.size() << " seeds\n";
    return result;
  }

  result.invalid = validate_tree(opts.out_dir);
  const auto rows = summarize_runs(opts.out_dir);
  io::write_file((root / "summary.txt").string(), format_summary(rows));
  io::write_file((root / "summary.csv").string(), summary_csv(rows));
  if (log) *log << format_summary(rows);
  return result;
}

std::vector<SummaryRow> summarize_runs(const std::string& dir) {
  const auto dirs = run_dirs(dir);
  if (dirs.empty()) throw SchemaError("no run directories below " + dir);
  std::map<std::pair<std::string, std::string>, std::vector<RunArtifact>> groups;
  std::map<std::pair<std::string, std::string>, int> excluded;
  for (const auto& d : dirs) {
    RunArtifact art;
    try {
      art = load_artifact(d.string());
    } catch (const std::exception&) {
      ++excluded[{"(unreadable)", ""}];
      continue;
    }
    const std::pair key{art.manifest.recipe, art.manifest.env};
    if (!art.manifest.complete || art.checkpoints.empty()) {
      ++excluded[key];
      continue;
    }
    groups[key].push_back(std::move(art));
  }
  for (const auto& [key, n] : excluded) groups[key];

  std::vector<SummaryRow> rows;
  for (const auto& [key, arts] : groups) {
    SummaryRow row;
    row.recipe = key.first;
    row.env = key.second;
    row.runs = static_cast<int>(arts.size());
    row.excluded = excluded.count(key) ? excluded.at(key) : 0;
    std::vector<double> fs_ep, fm_ep, term, cov;
    for (const auto& art : arts) {
      if (art.events.first_success_episode)
        fs_ep.push_back(static_cast<double>(*art.events.first_success_episode));
      if (art.events.first_majority_success_episode)
        fm_ep.push_back(static_cast<double>(*art.events.first_majority_success_episode));
      term.push_back(success_summary(art).terminal_rate);
      const auto& last = art.checkpoints.back();
      cov.push_back(coverage(last.visitation, static_cast<int>(last.visitation.size())));
    }
    row.succeeded = static_cast<int>(fs_ep.size());
    row.majority = static_cast<int>(fm_ep.size());
    row.first_success = mean_se(fs_ep);
    row.first_majority = mean_se(fm_ep);
    row.terminal_rate = mean_se(term);
    row.coverage = mean_se(cov);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt_mean_se(const MeanSe& m, int precision) {
  if (m.n == 0) return "-";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << m.mean << " +- " << m.se;
  return os.str();
}

}  // namespace

std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  auto pad = [&](const std::string& s, std::size_t w) {
    os << s;
    for (std::size_t i = s.size(); i < w; ++i) os << ' ';
  };
  const std::size_t w = 22;
  pad("recipe", w);
  pad("env", 13);
  pad("runs", 6);
  pad("excl", 6);
  pad("first_success", w + 8);
  pad("first_majority", w + 8);
  pad("terminal_rate", w);
  os << "coverage\n";
  for (const auto& r : rows) {
    pad(r.recipe, w);
    pad(r.env, 13);
    pad(std::to_string(r.runs), 6);
    pad(std::to_string(r.excluded), 6);
    pad(fmt_mean_se(r.first_success, 1) + " (" + std::to_string(r.succeeded) + "/" +
            std::to_string(r.runs) + ")",
        w + 8);
    pad(fmt_mean_se(r.first_majority, 1) + " (" + std::to_string(r.majority) + "/" +
            std::to_string(r.runs) + ")",
        w + 8);
    pad(fmt_mean_se(r.terminal_rate, 3), w);
    os << fmt_mean_se(r.coverage, 3) << "\n";
  }
  return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "recipe,env,runs,excluded,succeeded,first_success_mean,first_success_se,majority,"
      "first_majority_mean,first_majority_se,terminal_rate_mean,terminal_rate_se,coverage_mean,"
      "coverage_se\n";
  auto num = [](const MeanSe& m, double v) { return m.n == 0 ? std::string("nan") : io::format_double(v); };
  for (const auto& r : rows) {
    out += r.recipe + "," + r.env + "," + std::to_string(r.runs) + "," +
           std::to_string(r.excluded) + "," + std::to_string(r.succeeded) + "," +
           num(r.first_success, r.first_success.mean) + "," +
           num(r.first_success, r.first_success.se) + "," + std::to_string(r.majority) + "," +
           num(r.first_majority, r.first_majority.mean) + "," +
           num(r.first_majority, r.first_majority.se) + "," +
           num(r.terminal_rate, r.terminal_rate.mean) + "," +
           num(r.terminal_rate, r.terminal_rate.se) + "," + num(r.coverage, r.coverage.mean) +
           "," + num(r.coverage, r.coverage.se) + "\n";
  }
  return out;
}

std::vector<std::string> validate_tree(const std::string& dir) {
  std::vector<std::string> problems;
  const auto dirs = run_dirs(dir);
  if (dirs.empty()) problems.push_back(dir + ": no run directories found");
  for (const auto& d : dirs)
    for (const auto& p : validate_artifact(d.string())) problems.push_back(d.string() + ": " + p);
  return problems;
}

}  // namespace sgcrl
