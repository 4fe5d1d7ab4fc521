#include "sgcrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sgcrl {

void SparseModel::validate() const {
  if (num_states < 1 || num_actions < 1) throw ConfigError("empty model");
  const auto n = static_cast<std::size_t>(num_states) * num_actions;
  if (rows.size() != n || reward.size() != n) throw ConfigError("model has wrong row count");
  for (const auto& row : rows) {
    double sum = 0.0;
    for (const auto& [t, p] : row) {
      if (t < 0 || t >= num_states) throw ConfigError("model successor out of range");
      if (p < 0.0) throw ConfigError("negative transition probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("model row is not a probability vector");
  }
}

ValueTable value_iteration(const SparseModel& model, double gamma, double tol,
                           const std::vector<double>* warm) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must be in [0, 1)");
  if (!(tol > 0.0)) throw ConfigError("tolerance must be > 0");
  model.validate();
  const int S = model.num_states;
  const int A = model.num_actions;
  ValueTable out;
  out.v.assign(S, 0.0);
  if (warm) {
    if (static_cast<int>(warm->size()) != S) throw ConfigError("warm start has wrong size");
    out.v = *warm;
  }
  out.q.assign(static_cast<std::size_t>(S) * A, 0.0);
  std::vector<double> next(S);
  // Enough sweeps for gamma^k * span to drop far below any tolerance used here.
  const int cap = 200000;
  for (int it = 0; it < cap; ++it) {
    double change = 0.0;
    for (StateId s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < A; ++a) {
        const std::size_t i = model.index(s, a);
        double q = model.reward[i];
        for (const auto& [t, p] : model.rows[i]) q += gamma * p * out.v[t];
        out.q[i] = q;
        best = std::max(best, q);
      }
      next[s] = best;
      change = std::max(change, std::abs(best - out.v[s]));
    }
    out.v.swap(next);
    out.iterations = it + 1;
    if (!std::isfinite(change)) throw NumericalError("value iteration diverged");
    if (change < tol) break;
  }
  out.policy.assign(S, 0);
  for (StateId s = 0; s < S; ++s) {
    ActionId best = 0;
    for (ActionId a = 1; a < A; ++a)
      if (out.q[model.index(s, a)] > out.q[model.index(s, best)]) best = a;
    out.policy[s] = best;
  }
  return out;
}

Trajectory greedy_rollout(const TabularEnv& env, const std::vector<ActionId>& policy,
                          const EpisodeSpec& spec) {
  return rollout(
      env, [&](StateId s) { return policy[s]; }, spec, {env.goal()});
}

void RmaxConfig::validate() const {
  if (known_threshold < 1) throw ConfigError("known_threshold must be >= 1");
  if (!(r_max > 0.0)) throw ConfigError("r_max must be > 0");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount must be in [0, 1)");
  episode.validate();
}

RmaxAgent::RmaxAgent(const TabularEnv& env, RmaxConfig cfg)
    : env_(env), cfg_(std::move(cfg)), targets_{env.goal()} {
  cfg_.validate();
  const auto n = static_cast<std::size_t>(env.num_states()) * env.num_actions();
  counts_.assign(n, 0);
  successors_.assign(n, {});
  model_.num_states = env.num_states();
  model_.num_actions = env.num_actions();
  model_.rows.assign(n, {});
  model_.reward.assign(n, 0.0);
  plan();
}

bool RmaxAgent::known(StateId s, ActionId a) const {
  return counts_[model_.index(s, a)] >= cfg_.known_threshold;
}

std::size_t RmaxAgent::num_known() const {
  return static_cast<std::size_t>(std::count_if(
      counts_.begin(), counts_.end(), [&](long c) { return c >= cfg_.known_threshold; }));
}

void RmaxAgent::plan() {
  for (StateId s = 0; s < env_.num_states(); ++s) {
    for (ActionId a = 0; a < env_.num_actions(); ++a) {
      const std::size_t i = model_.index(s, a);
      auto& row = model_.rows[i];
      row.clear();
      if (s == env_.goal()) {
        row.emplace_back(s, 1.0);
        model_.reward[i] = cfg_.r_max;
      } else if (!known(s, a)) {
        row.emplace_back(s, 1.0);
        model_.reward[i] = cfg_.r_max;
      } else {
        const double total = static_cast<double>(counts_[i]);
        for (const auto& [t, c] : successors_[i]) row.emplace_back(t, c / total);
        model_.reward[i] = 0.0;
      }
    }
  }
  const std::vector<double>* warm = values_.v.empty() ? nullptr : &values_.v;
  values_ = value_iteration(model_, cfg_.discount, cfg_.tol, warm);
}

Trajectory RmaxAgent::collect() { return greedy_rollout(env_, values_.policy, cfg_.episode); }

void RmaxAgent::observe(const Trajectory& traj) {
  bool replan = false;
  for (std::size_t t = 0; t < traj.num_transitions(); ++t) {
    const StateId s = traj.states[t];
    const ActionId a = traj.actions[t];
    const std::size_t i = model_.index(s, a);
    const bool was_known = known(s, a);
    ++counts_[i];
    ++successors_[i][traj.states[t + 1]];
    if (!was_known && known(s, a)) replan = true;
  }
  if (replan) plan();
}

EvalResult RmaxAgent::evaluate(int runs) {
  EvalResult res;
  res.runs = runs;
  res.reached.assign(1, 0);
  // The greedy policy is deterministic, so one rollout decides every run.
  const bool ok = runs > 0 && greedy_rollout(env_, values_.policy, cfg_.episode).success;
  if (ok) {
    res.successes = runs;
    res.reached[0] = runs;
  }
  return res;
}

std::vector<double> RmaxAgent::goal_similarity() const {
  std::vector<double> sims(values_.v.size());
  for (std::size_t s = 0; s < sims.size(); ++s)
    sims[s] = std::clamp(values_.v[s] / v_max(), -1.0, 1.0);
  return sims;
}

void PsrlConfig::validate() const {
  if (!(prior > 0.0)) throw ConfigError("Dirichlet prior must be > 0");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount must be in [0, 1)");
  episode.validate();
}

PsrlAgent::PsrlAgent(const TabularEnv& env, PsrlConfig cfg, std::uint64_t seed)
    : env_(env), cfg_(std::move(cfg)), targets_{env.goal()}, rng_(make_rng(seed, 5)) {
  cfg_.validate();
  counts_.assign(static_cast<std::size_t>(env.num_states()) * env.num_actions(), {});
}

double PsrlAgent::pseudo_count(StateId s, ActionId a, StateId next) const {
  const auto& c = counts_[static_cast<std::size_t>(s) * env_.num_actions() + a];
  const auto it = c.find(next);
  return cfg_.prior + (it == c.end() ? 0.0 : static_cast<double>(it->second));
}

SparseModel PsrlAgent::sample_model(Rng& rng) const {
  const int S = env_.num_states();
  const int A = env_.num_actions();
  SparseModel m;
  m.num_states = S;
  m.num_actions = A;
  m.rows.resize(static_cast<std::size_t>(S) * A);
  m.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
  std::gamma_distribution<double> prior_draw(cfg_.prior, 1.0);
  std::vector<double> w(S);
  for (StateId s = 0; s < S; ++s) {
    for (ActionId a = 0; a < A; ++a) {
      const std::size_t i = m.index(s, a);
      if (s == env_.goal()) {
        m.rows[i] = {{s, 1.0}};
        m.reward[i] = 1.0;
        continue;
      }
      for (StateId t = 0; t < S; ++t) w[t] = prior_draw(rng);
      for (const auto& [t, c] : counts_[i]) {
        std::gamma_distribution<double> post(cfg_.prior + static_cast<double>(c), 1.0);
        w[t] = post(rng);
      }
      double sum = 0.0;
      for (double x : w) sum += x;
      if (!(sum > 0.0)) {
        // Every gamma draw underflowed (tiny prior); fall back to the mode.
        std::fill(w.begin(), w.end(), 1.0);
        sum = S;
      }
      auto& row = m.rows[i];
      row.reserve(S);
      double acc = 0.0;
      std::size_t top = 0;
      for (StateId t = 0; t < S; ++t) {
        row.emplace_back(t, w[t] / sum);
        acc += w[t] / sum;
        if (w[t] > w[top]) top = t;
      }
      // Fold rounding error into the largest entry so the row sums to 1
      // without any entry going negative.
      row[top].second += 1.0 - acc;
    }
  }
  return m;
}

Trajectory PsrlAgent::collect() {
  const SparseModel m = sample_model(rng_);
  const std::vector<double>* warm = values_.v.empty() ? nullptr : &values_.v;
  values_ = value_iteration(m, cfg_.discount, cfg_.tol, warm);
  return greedy_rollout(env_, values_.policy, cfg_.episode);
}

void PsrlAgent::observe(const Trajectory& traj) {
  for (std::size_t t = 0; t < traj.num_transitions(); ++t) {
    const std::size_t i =
        static_cast<std::size_t>(traj.states[t]) * env_.num_actions() + traj.actions[t];
    ++counts_[i][traj.states[t + 1]];
  }
}

EvalResult PsrlAgent::evaluate(int runs) {
  EvalResult res;
  res.runs = runs;
  res.reached.assign(1, 0);
  if (values_.policy.empty() || runs == 0) return res;
  if (greedy_rollout(env_, values_.policy, cfg_.episode).success) {
    res.successes = runs;
    res.reached[0] = runs;
  }
  return res;
}

std::vector<double> PsrlAgent::goal_similarity() const {
  std::vector<double> sims(env_.num_states(), 0.0);
  if (values_.v.empty()) return sims;
  const double v_max = 1.0 / (1.0 - cfg_.discount);
  for (std::size_t s = 0; s < sims.size(); ++s)
    sims[s] = std::clamp(values_.v[s] / v_max, -1.0, 1.0);
  return sims;
}

}  // namespace sgcrl
