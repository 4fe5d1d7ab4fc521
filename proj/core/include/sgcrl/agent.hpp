#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <utility>
#include <variant>
#include <vector>

#include "sgcrl/common.hpp"
#include "sgcrl/envs.hpp"
#include "sgcrl/metrics.hpp"
#include "sgcrl/repr.hpp"

namespace sgcrl {

struct PolicyConfig {
  double temperature = 0.1;
  Vector goal_embedding;
  /// Give zero probability to actions that leave the state unchanged, unless
  /// every action does.
  bool skip_noops = false;

  void validate() const;
};

struct RealGoal {
  StateId state = 0;
};
/// Goal embedding that corresponds to no state. Empty means the common
/// initialization vector x, normalized.
struct ImaginaryGoal {
  std::optional<Vector> vector;
};
struct MultiGoal {
  std::vector<std::pair<StateId, double>> goals;
};
using GoalSpec = std::variant<RealGoal, ImaginaryGoal, MultiGoal>;

/// sum_i r_i psi(g_i), normalized. Throws NumericalError on a near-zero sum.
Vector combined_goal(const EmbeddingTable& table,
                     const std::vector<std::pair<StateId, double>>& goals);

/// Softmax over actions of psi(p(s, a)) . goal / temperature.
std::vector<double> action_probabilities(const TabularEnv& env, const EmbeddingTable& table,
                                         StateId s, const PolicyConfig& policy);
ActionId select_action(const TabularEnv& env, const EmbeddingTable& table, StateId s,
                       const PolicyConfig& policy, Rng& rng);
/// Sets the logits of self-transition actions to -inf when some action moves.
void mask_noops(const TabularEnv& env, StateId s, std::vector<double>& logits);
/// Samples an index from a probability vector.
ActionId sample_index(const std::vector<double>& probs, Rng& rng);

/// One episode: states[0] is the start, states[t + 1] = p(states[t], actions[t]).
struct Trajectory {
  std::vector<StateId> states;
  std::vector<ActionId> actions;
  /// Every target was reached.
  bool success = false;
  /// Per-target reached flag, in target order.
  std::vector<bool> reached;

  std::size_t num_transitions() const { return actions.size(); }
};

using ActionFn = std::function<ActionId(StateId)>;

/// Rolls out from env.start(). The episode ends after max_steps or, when
/// terminate_on_goal is set, once every target has been visited. With no
/// targets the episode always runs to max_steps and success stays false.
Trajectory rollout(const TabularEnv& env, const ActionFn& act, const EpisodeSpec& spec,
                   const std::vector<StateId>& targets);

/// Single-goal rollout towards env.goal() under the softmax policy.
Trajectory collect_episode(const TabularEnv& env, const EmbeddingTable& table,
                           const PolicyConfig& policy, const EpisodeSpec& spec, Rng& rng);

/// Episode ring buffer bounded by a transition count. Oldest episodes are
/// evicted first; an episode longer than the capacity keeps its first
/// `capacity` transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_transitions = 1000);

  void add(Trajectory traj);
  bool empty() const { return episodes_.empty(); }
  std::size_t num_transitions() const { return transitions_; }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Trajectory>& episodes() const { return episodes_; }

 private:
  std::size_t capacity_;
  std::size_t transitions_ = 0;
  std::deque<Trajectory> episodes_;
};

/// Anchors are next-states of uniformly drawn stored transitions, futures the
/// state Delta steps after the transition's source, Delta ~ Geom(1 - gamma) on
/// {1, 2, ...} redrawn until it stays inside the trajectory.
TripletBatch sample_triplets(const ReplayBuffer& buffer, double gamma, int n, Rng& rng);

/// Goal embedding drawn from N(0, I_d) and normalized.
PolicyConfig random_goal_policy(const EmbeddingTable& table, double temperature, Rng& rng);

struct TrainLoopConfig {
  double discount = 0.99;
  long episodes = 2000;
  int updates_per_episode = 10;
  long eval_every = 10;
  int eval_runs = 5;
  std::size_t buffer_capacity = 1000;
  /// Keep an embedding snapshot every this many checkpoints (0 = never).
  long snapshot_every = 0;
  /// Checkpoint after every episode until the first training success, so the
  /// pre-success phase is resolved even when the goal is found early.
  bool dense_until_success = true;

  void validate() const;
};

struct InitConfig {
  int dim = 16;
  double common_scale = 1.0;
  double noise_scale = 0.1;
};

enum class Representation { Vector, Scalar };
enum class Collection { SingleGoal, RandomGoal };

enum class InterventionKind {
  /// Hold the states at psi(g).
  PinToGoal,
  /// Hold the states at -psi(g).
  PinToNegGoal,
  /// Initialize the states orthogonal to the goal embedding, left trainable.
  OrthogonalInit,
};
/// What a goal-relative pin holds on to.
enum class GoalPinMode {
  /// Pinned rows and the goal row stay at the initial psi(g).
  Frozen,
  /// The goal row keeps learning; pinned rows are reset to +-psi(g) after
  /// every update.
  Track,
};

struct Intervention {
  InterventionKind kind = InterventionKind::PinToGoal;
  std::vector<StateId> states;
};

struct SgcrlConfig {
  InitConfig init;
  UpdateConfig update;
  TrainLoopConfig loop;
  EpisodeSpec episode;
  double temperature = 0.1;
  bool skip_noops = false;
  Representation representation = Representation::Vector;
  Collection collection = Collection::SingleGoal;
  std::vector<Intervention> interventions;
  GoalPinMode goal_pin = GoalPinMode::Track;

  void validate() const;
};

struct EvalResult {
  int successes = 0;
  int runs = 0;
  /// Per-target reach counts.
  std::vector<int> reached;
};

/// Anything that can collect episodes and learn from trajectories.
class Agent {
 public:
  virtual ~Agent() = default;
  /// One training episode under the agent's own behaviour policy.
  virtual Trajectory collect() = 0;
  /// Learns from a trajectory, whoever collected it.
  virtual void observe(const Trajectory& traj) = 0;
  virtual EvalResult evaluate(int runs) = 0;
  /// Per-state goal similarity in [-1, 1].
  virtual std::vector<double> goal_similarity() const = 0;
  virtual std::optional<Matrix> snapshot() const { return std::nullopt; }
  /// Goal states the episodes are judged against.
  virtual const std::vector<StateId>& targets() const = 0;
};

/// Tabular SGCRL: embedding table critic, softmax actor over known dynamics.
///
/// Collection, updates and evaluation draw from separate rng streams, so an
/// agent fed another agent's trajectories behaves exactly as if it had
/// collected them itself.
class SgcrlAgent : public Agent {
 public:
  SgcrlAgent(const TabularEnv& env, GoalSpec goal, SgcrlConfig cfg, std::uint64_t seed);

  Trajectory collect() override;
  void observe(const Trajectory& traj) override;
  EvalResult evaluate(int runs) override;
  std::vector<double> goal_similarity() const override;
  std::optional<Matrix> snapshot() const override;
  const std::vector<StateId>& targets() const override { return targets_; }

  const EmbeddingTable& table() const { return table_; }
  EmbeddingTable& table() { return table_; }
  const ScalarSimTable& scalar_table() const { return scalar_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  /// Current commanded goal embedding (vector representation).
  Vector goal_embedding() const;
  const Vector& common_vector() const { return common_; }
  std::vector<double> action_probs(StateId s) const;

 private:
  ActionId act(StateId s, const Vector& goal, Rng& rng) const;
  std::optional<StateId> scalar_goal() const;

  const TabularEnv& env_;
  GoalSpec goal_;
  SgcrlConfig cfg_;
  EmbeddingTable table_;
  ScalarSimTable scalar_;
  Vector common_;
  std::vector<StateId> targets_;
  ReplayBuffer buffer_;
  Rng collect_rng_;
  Rng update_rng_;
  Rng eval_rng_;
  /// Rows re-pinned to +psi(g) and -psi(g) in GoalPinMode::Track.
  std::vector<StateId> track_pos_;
  std::vector<StateId> track_neg_;
};

/// Called after each checkpoint is appended.
using CheckpointFn = std::function<void(const Checkpoint&)>;

/// Algorithm 1 loop: the collector gathers each episode, both agents observe
/// it (once when they are the same object), and the learner is evaluated and
/// checkpointed every eval_every episodes, at episode 0 and at the end.
RunArtifact run_loop(const TabularEnv& env, Agent& collector, Agent& learner,
                     const TrainLoopConfig& loop, const CheckpointFn& on_checkpoint = {});

RunArtifact train(const TabularEnv& env, const GoalSpec& goal, const SgcrlConfig& cfg,
                  std::uint64_t seed, const CheckpointFn& on_checkpoint = {});
RunArtifact train_yoked(const TabularEnv& env, Agent& collector, const GoalSpec& goal,
                        const SgcrlConfig& cfg, std::uint64_t seed);

}  // namespace sgcrl
