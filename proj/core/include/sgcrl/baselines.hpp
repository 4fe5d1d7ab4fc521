#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "sgcrl/agent.hpp"
#include "sgcrl/common.hpp"
#include "sgcrl/envs.hpp"

namespace sgcrl {

/// Finite MDP with sparse transition rows. Row index is s * num_actions + a.
struct SparseModel {
  int num_states = 0;
  int num_actions = 0;
  std::vector<std::vector<std::pair<StateId, double>>> rows;
  /// Expected reward per (s, a).
  std::vector<double> reward;

  std::size_t index(StateId s, ActionId a) const {
    return static_cast<std::size_t>(s) * num_actions + a;
  }
  /// Throws ConfigError unless every row is a probability vector (1e-9).
  void validate() const;
};

struct ValueTable {
  std::vector<double> v;
  /// Row-indexed like SparseModel.
  std::vector<double> q;
  /// Greedy action per state, lowest index on ties.
  std::vector<ActionId> policy;
  int iterations = 0;
};

/// Bellman backups until the sup-norm change drops below `tol`. `warm`
/// seeds the iteration when given.
ValueTable value_iteration(const SparseModel& model, double gamma, double tol = 1e-8,
                           const std::vector<double>* warm = nullptr);

struct RmaxConfig {
  int known_threshold = 1;
  double r_max = 1.0;
  double discount = 0.99;
  double tol = 1e-8;
  EpisodeSpec episode;

  void validate() const;
};

/// R-MAX on a goal-indicator reward. Unknown pairs are self-loops paying
/// r_max; the goal is absorbing and pays r_max per step.
class RmaxAgent : public Agent {
 public:
  RmaxAgent(const TabularEnv& env, RmaxConfig cfg);

  Trajectory collect() override;
  void observe(const Trajectory& traj) override;
  EvalResult evaluate(int runs) override;
  /// V(s) / V_max.
  std::vector<double> goal_similarity() const override;
  const std::vector<StateId>& targets() const override { return targets_; }

  bool known(StateId s, ActionId a) const;
  long count(StateId s, ActionId a) const { return counts_[model_.index(s, a)]; }
  std::size_t num_known() const;
  const ValueTable& values() const { return values_; }
  const SparseModel& model() const { return model_; }
  double v_max() const { return cfg_.r_max / (1.0 - cfg_.discount); }

 private:
  void plan();

  const TabularEnv& env_;
  RmaxConfig cfg_;
  std::vector<StateId> targets_;
  std::vector<long> counts_;
  std::vector<std::map<StateId, long>> successors_;
  SparseModel model_;
  ValueTable values_;
};

struct PsrlConfig {
  /// Symmetric Dirichlet pseudo-count over all states. Small values make
  /// each unvisited row a near one-hot jump to a random state.
  double prior = 0.01;
  double discount = 0.99;
  double tol = 1e-6;
  EpisodeSpec episode;

  void validate() const;
};

/// Posterior sampling: one transition model per episode drawn from the
/// Dirichlet posterior, known goal-indicator reward, greedy control.
class PsrlAgent : public Agent {
 public:
  PsrlAgent(const TabularEnv& env, PsrlConfig cfg, std::uint64_t seed);

  Trajectory collect() override;
  void observe(const Trajectory& traj) override;
  /// Greedy rollouts in the most recently sampled model.
  EvalResult evaluate(int runs) override;
  std::vector<double> goal_similarity() const override;
  const std::vector<StateId>& targets() const override { return targets_; }

  /// Draws a model from the current posterior.
  SparseModel sample_model(Rng& rng) const;
  double pseudo_count(StateId s, ActionId a, StateId next) const;
  const ValueTable& values() const { return values_; }

 private:
  const TabularEnv& env_;
  PsrlConfig cfg_;
  std::vector<StateId> targets_;
  /// Observed successor counts per (s, a).
  std::vector<std::map<StateId, long>> counts_;
  ValueTable values_;
  Rng rng_;
};

/// Greedy rollout of a fixed deterministic policy.
Trajectory greedy_rollout(const TabularEnv& env, const std::vector<ActionId>& policy,
                          const EpisodeSpec& spec);

}  // namespace sgcrl
