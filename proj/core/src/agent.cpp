#include "sgcrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sgcrl {

namespace {

constexpr std::uint64_t kCollectStream = 1;
constexpr std::uint64_t kUpdateStream = 2;
constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kInterventionStream = 4;

void softmax_inplace(std::vector<double>& logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - hi);
    sum += l;
  }
  for (double& l : logits) l /= sum;
}

}  // namespace

void mask_noops(const TabularEnv& env, StateId s, std::vector<double>& logits) {
  bool any_move = false;
  for (ActionId a = 0; a < env.num_actions(); ++a) any_move |= env.next(s, a) != s;
  if (!any_move) return;
  for (ActionId a = 0; a < env.num_actions(); ++a)
    if (env.next(s, a) == s) logits[a] = -std::numeric_limits<double>::infinity();
}

void PolicyConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (std::abs(goal_embedding.norm() - 1.0) > 1e-6)
    throw ConfigError("goal embedding must have unit norm");
}

Vector combined_goal(const EmbeddingTable& table,
                     const std::vector<std::pair<StateId, double>>& goals) {
  if (goals.empty()) throw ConfigError("combined goal needs at least one goal");
  Vector sum = Vector::Zero(table.dim());
  for (const auto& [g, w] : goals) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("goal weights must be positive");
    if (g < 0 || g >= table.num_states()) throw ConfigError("goal state out of range");
    sum += w * table.row(g);
  }
  const double n = sum.norm();
  if (!(n > 1e-12)) throw NumericalError("weighted goal embeddings cancel out");
  return sum / n;
}

std::vector<double> action_probabilities(const TabularEnv& env, const EmbeddingTable& table,
                                         StateId s, const PolicyConfig& policy) {
  if (s < 0 || s >= env.num_states()) throw ConfigError("state id out of range");
  std::vector<double> logits(env.num_actions());
  for (ActionId a = 0; a < env.num_actions(); ++a)
    logits[a] = table.dot(env.next(s, a), policy.goal_embedding) / policy.temperature;
  if (policy.skip_noops) mask_noops(env, s, logits);
  softmax_inplace(logits);
  return logits;
}

ActionId sample_index(const std::vector<double>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<ActionId>(i);
  }
  return static_cast<ActionId>(probs.size() - 1);
}

ActionId select_action(const TabularEnv& env, const EmbeddingTable& table, StateId s,
                       const PolicyConfig& policy, Rng& rng) {
  return sample_index(action_probabilities(env, table, s, policy), rng);
}

Trajectory rollout(const TabularEnv& env, const ActionFn& act, const EpisodeSpec& spec,
                   const std::vector<StateId>& targets) {
  spec.validate();
  Trajectory traj;
  traj.reached.assign(targets.size(), false);
  std::size_t remaining = targets.size();
  auto mark = [&](StateId s) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (!traj.reached[i] && targets[i] == s) {
        traj.reached[i] = true;
        --remaining;
      }
    }
  };
  StateId s = env.start();
  traj.states.push_back(s);
  mark(s);
  const bool has_targets = !targets.empty();
  for (int t = 0; t < spec.max_steps; ++t) {
    if (has_targets && remaining == 0 && spec.terminate_on_goal) break;
    const ActionId a = act(s);
    s = env.next(s, a);
    traj.actions.push_back(a);
    traj.states.push_back(s);
    mark(s);
  }
  traj.success = has_targets && remaining == 0;
  return traj;
}

Trajectory collect_episode(const TabularEnv& env, const EmbeddingTable& table,
                           const PolicyConfig& policy, const EpisodeSpec& spec, Rng& rng) {
  policy.validate();
  return rollout(
      env, [&](StateId s) { return select_action(env, table, s, policy, rng); }, spec,
      {env.goal()});
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_transitions) : capacity_(capacity_transitions) {
  if (capacity_ < 1) throw ConfigError("buffer capacity must be >= 1");
}

void ReplayBuffer::add(Trajectory traj) {
  if (traj.actions.empty()) return;
  if (traj.actions.size() > capacity_) {
    traj.actions.resize(capacity_);
    traj.states.resize(capacity_ + 1);
  }
  while (!episodes_.empty() && transitions_ + traj.actions.size() > capacity_) {
    transitions_ -= episodes_.front().actions.size();
    episodes_.pop_front();
  }
  transitions_ += traj.actions.size();
  episodes_.push_back(std::move(traj));
}

TripletBatch sample_triplets(const ReplayBuffer& buffer, double gamma, int n, Rng& rng) {
  if (buffer.empty()) throw ConfigError("cannot sample from an empty replay buffer");
  if (n < 1) throw ConfigError("batch size must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must be in [0, 1)");

  const auto& eps = buffer.episodes();
  std::vector<std::size_t> ends(eps.size());
  std::size_t total = 0;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    total += eps[e].num_transitions();
    ends[e] = total;
  }
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::geometric_distribution<long> geom(1.0 - gamma);

  TripletBatch batch;
  batch.anchors.reserve(n);
  batch.futures.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t flat = pick(rng);
    const auto e = static_cast<std::size_t>(
        std::upper_bound(ends.begin(), ends.end(), flat) - ends.begin());
    const std::size_t t = flat - (e == 0 ? 0 : ends[e - 1]);
    const Trajectory& traj = eps[e];
    const long room = static_cast<long>(traj.num_transitions() - t);
    long delta = 0;
    do {
      delta = geom(rng) + 1;
    } while (delta > room);
    batch.anchors.push_back(traj.states[t + 1]);
    batch.futures.push_back(traj.states[t + static_cast<std::size_t>(delta)]);
  }
  return batch;
}

PolicyConfig random_goal_policy(const EmbeddingTable& table, double temperature, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector y(table.dim());
  for (int k = 0; k < table.dim(); ++k) y[k] = gauss(rng);
  PolicyConfig p;
  p.temperature = temperature;
  p.goal_embedding = y / y.norm();
  return p;
}

void TrainLoopConfig::validate() const {
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount must be in [0, 1)");
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (updates_per_episode < 0) throw ConfigError("updates_per_episode must be >= 0");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (eval_runs < 0) throw ConfigError("eval_runs must be >= 0");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
}

void SgcrlConfig::validate() const {
  if (init.dim < 2) throw ConfigError("embedding dim must be >= 2");
  if (init.noise_scale < 0.0) throw ConfigError("noise_scale must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  update.validate();
  loop.validate();
  episode.validate();
}

SgcrlAgent::SgcrlAgent(const TabularEnv& env, GoalSpec goal, SgcrlConfig cfg, std::uint64_t seed)
    : env_(env),
      goal_(std::move(goal)),
      cfg_(std::move(cfg)),
      buffer_(cfg_.loop.buffer_capacity),
      collect_rng_(make_rng(seed, kCollectStream)),
      update_rng_(make_rng(seed, kUpdateStream)),
      eval_rng_(make_rng(seed, kEvalStream)) {
  cfg_.validate();
  auto init = init_table_with_common(env.num_states(), cfg_.init.dim, cfg_.init.common_scale,
                                     cfg_.init.noise_scale, seed);
  table_ = std::move(init.table);
  const double cn = init.common.norm();
  if (!(cn > 0.0)) throw NumericalError("degenerate common vector");
  common_ = init.common / cn;

  if (const auto* rg = std::get_if<RealGoal>(&goal_)) {
    if (rg->state < 0 || rg->state >= env.num_states()) throw ConfigError("goal out of range");
    targets_ = {rg->state};
  } else if (const auto* ig = std::get_if<ImaginaryGoal>(&goal_)) {
    if (ig->vector) {
      if (ig->vector->size() != cfg_.init.dim) throw ConfigError("imaginary goal has wrong dim");
      const double n = ig->vector->norm();
      if (!(n > 0.0)) throw ConfigError("imaginary goal must be non-zero");
      goal_ = ImaginaryGoal{*ig->vector / n};
    }
  } else {
    for (const auto& [g, w] : std::get<MultiGoal>(goal_).goals) targets_.push_back(g);
    combined_goal(table_, std::get<MultiGoal>(goal_).goals);
  }

  if (cfg_.representation == Representation::Scalar && !std::holds_alternative<RealGoal>(goal_))
    throw ConfigError("the scalar ablation needs a real goal state");

  const Vector g0 = goal_embedding();
  Rng irng = make_rng(seed, kInterventionStream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  bool goal_relative_pin = false;
  for (const auto& iv : cfg_.interventions) {
    if (iv.kind != InterventionKind::OrthogonalInit && !iv.states.empty()) goal_relative_pin = true;
    for (StateId s : iv.states)
      if (s < 0 || s >= env.num_states()) throw ConfigError("intervention state out of range");
    const std::set<StateId> states(iv.states.begin(), iv.states.end());
    switch (iv.kind) {
      case InterventionKind::PinToGoal:
        pin_region(table_, states, g0);
        track_pos_.insert(track_pos_.end(), states.begin(), states.end());
        break;
      case InterventionKind::PinToNegGoal:
        pin_region(table_, states, -g0);
        track_neg_.insert(track_neg_.end(), states.begin(), states.end());
        break;
      case InterventionKind::OrthogonalInit: {
        // Shared direction orthogonal to the goal plus small per-state noise.
        Vector w(cfg_.init.dim);
        for (int k = 0; k < w.size(); ++k) w[k] = gauss(irng);
        w -= w.dot(g0) * g0;
        w.normalize();
        for (StateId s : states) {
          Vector v = w;
          for (int k = 0; k < v.size(); ++k)
            v[k] += cfg_.init.noise_scale * gauss(irng) / std::sqrt(static_cast<double>(v.size()));
          v -= v.dot(g0) * g0;
          table_.set_row(s, v.normalized());
        }
        break;
      }
    }
  }
  if (goal_relative_pin && cfg_.goal_pin == GoalPinMode::Frozen)
    if (const auto* rg = std::get_if<RealGoal>(&goal_)) table_.pin(rg->state, g0);
  if (cfg_.goal_pin == GoalPinMode::Frozen) {
    track_pos_.clear();
    track_neg_.clear();
  }
  if (cfg_.representation == Representation::Scalar)
    scalar_ = ScalarSimTable::from_embeddings(table_);
}

Vector SgcrlAgent::goal_embedding() const {
  if (const auto* rg = std::get_if<RealGoal>(&goal_)) return table_.row(rg->state);
  if (const auto* ig = std::get_if<ImaginaryGoal>(&goal_)) return ig->vector ? *ig->vector : common_;
  return combined_goal(table_, std::get<MultiGoal>(goal_).goals);
}

std::optional<StateId> SgcrlAgent::scalar_goal() const {
  if (cfg_.representation != Representation::Scalar) return std::nullopt;
  return std::get<RealGoal>(goal_).state;
}

std::vector<double> SgcrlAgent::action_probs(StateId s) const {
  if (const auto g = scalar_goal()) {
    std::vector<double> logits(env_.num_actions());
    for (ActionId a = 0; a < env_.num_actions(); ++a)
      logits[a] = scalar_.at(env_.next(s, a), *g) / cfg_.temperature;
    if (cfg_.skip_noops) mask_noops(env_, s, logits);
    softmax_inplace(logits);
    return logits;
  }
  return action_probabilities(env_, table_, s, {cfg_.temperature, goal_embedding(), cfg_.skip_noops});
}

ActionId SgcrlAgent::act(StateId s, const Vector& goal, Rng& rng) const {
  if (scalar_goal()) return sample_index(action_probs(s), rng);
  return sample_index(
      action_probabilities(env_, table_, s, {cfg_.temperature, goal, cfg_.skip_noops}), rng);
}

Trajectory SgcrlAgent::collect() {
  Vector goal;
  if (cfg_.collection == Collection::RandomGoal)
    goal = random_goal_policy(table_, cfg_.temperature, collect_rng_).goal_embedding;
  else
    goal = goal_embedding();
  // The goal embedding is frozen for the episode; the table does not change
  // during a rollout.
  return rollout(
      env_, [&](StateId s) { return act(s, goal, collect_rng_); }, cfg_.episode, targets_);
}

void SgcrlAgent::observe(const Trajectory& traj) {
  buffer_.add(traj);
  if (buffer_.empty()) return;
  for (int k = 0; k < cfg_.loop.updates_per_episode; ++k) {
    const TripletBatch batch =
        sample_triplets(buffer_, cfg_.loop.discount, cfg_.update.batch_size, update_rng_);
    if (cfg_.representation == Representation::Scalar)
      scalar_step(scalar_, batch, cfg_.update);
    else
      infonce_step(table_, batch, cfg_.update);
    if (!track_pos_.empty() || !track_neg_.empty()) {
      const Vector g = goal_embedding();
      for (StateId s : track_pos_) table_.pin(s, g);
      for (StateId s : track_neg_) table_.pin(s, -g);
    }
  }
}

EvalResult SgcrlAgent::evaluate(int runs) {
  EvalResult res;
  res.runs = runs;
  res.reached.assign(targets_.size(), 0);
  const Vector goal = goal_embedding();
  for (int r = 0; r < runs; ++r) {
    const Trajectory traj = rollout(
        env_, [&](StateId s) { return act(s, goal, eval_rng_); }, cfg_.episode, targets_);
    if (traj.success) ++res.successes;
    for (std::size_t i = 0; i < targets_.size(); ++i)
      if (traj.reached[i]) ++res.reached[i];
  }
  return res;
}

std::vector<double> SgcrlAgent::goal_similarity() const {
  if (const auto g = scalar_goal()) {
    // Raw logits are unbounded; rescale into [-1, 1] when they leave it.
    std::vector<double> sims(env_.num_states());
    double hi = 1.0;
    for (StateId s = 0; s < env_.num_states(); ++s) {
      sims[s] = scalar_.at(s, *g);
      hi = std::max(hi, std::abs(sims[s]));
    }
    for (double& v : sims) v /= hi;
    return sims;
  }
  auto sims = similarity_to(table_, goal_embedding());
  for (double& v : sims) v = std::clamp(v, -1.0, 1.0);
  return sims;
}

std::optional<Matrix> SgcrlAgent::snapshot() const {
  if (cfg_.representation == Representation::Scalar) return std::nullopt;
  return table_.vectors();
}

RunArtifact run_loop(const TabularEnv& env, Agent& collector, Agent& learner,
                     const TrainLoopConfig& loop, const CheckpointFn& on_checkpoint) {
  loop.validate();
  RunArtifact art;
  std::vector<long> visitation(env.num_states(), 0);
  long transitions = 0;
  int window_episodes = 0;
  int window_successes = 0;

  auto checkpoint = [&](long episode) {
    Checkpoint cp;
    cp.episode = episode;
    cp.psi_sim = learner.goal_similarity();
    cp.visitation = visitation;
    const EvalResult eval = learner.evaluate(loop.eval_runs);
    cp.eval_success_k = eval.successes;
    cp.eval_success_n = eval.runs;
    cp.goal_reach_k = eval.reached;
    cp.window_episodes = window_episodes;
    cp.window_successes = window_successes;
    cp.transitions = transitions;
    const long index = static_cast<long>(art.checkpoints.size());
    if (loop.snapshot_every > 0 && index % loop.snapshot_every == 0) cp.embedding = learner.snapshot();
    if (!art.events.first_majority_success_episode && eval.runs > 0 &&
        eval.successes >= majority_threshold(eval.runs))
      art.events.first_majority_success_episode = episode;
    window_episodes = 0;
    window_successes = 0;
    art.checkpoints.push_back(std::move(cp));
    if (on_checkpoint) on_checkpoint(art.checkpoints.back());
  };

  checkpoint(0);
  for (long e = 1; e <= loop.episodes; ++e) {
    const Trajectory traj = collector.collect();
    collector.observe(traj);
    if (&learner != &collector) learner.observe(traj);
    for (StateId s : traj.states) ++visitation[s];
    transitions += static_cast<long>(traj.num_transitions());
    ++window_episodes;
    if (traj.success) {
      ++window_successes;
      if (!art.events.first_success_episode) {
        art.events.first_success_episode = e;
        art.events.first_success_transitions = transitions;
      }
    }
    const bool dense = loop.dense_until_success && !learner.targets().empty() &&
                       (!art.events.first_success_episode ||
                        *art.events.first_success_episode == e);
    if (dense || e % loop.eval_every == 0 || e == loop.episodes) checkpoint(e);
  }
  art.manifest.complete = true;
  art.manifest.env = env.name();
  art.manifest.goals = learner.targets();
  return art;
}

RunArtifact train(const TabularEnv& env, const GoalSpec& goal, const SgcrlConfig& cfg,
                  std::uint64_t seed, const CheckpointFn& on_checkpoint) {
  SgcrlAgent agent(env, goal, cfg, seed);
  auto art = run_loop(env, agent, agent, cfg.loop, on_checkpoint);
  art.manifest.seed = seed;
  return art;
}

RunArtifact train_yoked(const TabularEnv& env, Agent& collector, const GoalSpec& goal,
                        const SgcrlConfig& cfg, std::uint64_t seed) {
  SgcrlAgent learner(env, goal, cfg, seed);
  auto art = run_loop(env, collector, learner, cfg.loop);
  art.manifest.seed = seed;
  return art;
}

}  // namespace sgcrl
