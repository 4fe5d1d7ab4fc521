#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgcrl/common.hpp"

namespace sgcrl {

/// One evaluation checkpoint of a run.
struct Checkpoint {
  long episode = 0;
  /// Goal similarity per state, in [-1, 1].
  std::vector<double> psi_sim;
  /// Visit counts per state (cumulative since run start).
  std::vector<long> visitation;
  int eval_success_k = 0;
  int eval_success_n = 0;
  /// Per-goal reach counts over the eval runs (multi-goal runs only).
  std::vector<int> goal_reach_k;
  /// Training episodes and successes since the previous checkpoint.
  int window_episodes = 0;
  int window_successes = 0;
  /// Cumulative training transitions.
  long transitions = 0;
  /// Relative path of the embedding dump, empty when none was taken.
  std::string embedding_ref;
  /// In-memory embedding snapshot backing `embedding_ref`.
  std::optional<Matrix> embedding;
};

struct RunEvents {
  std::optional<long> first_success_episode;
  std::optional<long> first_success_transitions;
  std::optional<long> first_majority_success_episode;
};

struct RunManifest {
  std::string recipe;
  std::string env;
  std::uint64_t seed = 0;
  std::string code_version;
  bool complete = false;
  /// Flattened config, key -> value text.
  std::map<std::string, std::string> config;
  /// Goal state ids (empty for imaginary goals).
  std::vector<StateId> goals;
  /// Run-level scalars (e.g. room visitation shares), key -> value.
  std::map<std::string, double> scalars;
};

struct RunArtifact {
  RunManifest manifest;
  std::vector<Checkpoint> checkpoints;
  RunEvents events;
};

struct CorrelationRecord {
  long episode = 0;
  /// Empty when either variable has zero variance.
  std::optional<double> pearson_r;
  int n_states = 0;
};

/// Pearson correlation between visit counts and goal similarity over states.
/// Unvisited states are included with count 0 unless `exclude_unvisited`.
CorrelationRecord visitation_similarity_correlation(const std::vector<long>& visitation,
                                                    const std::vector<double>& psi_sim,
                                                    bool exclude_unvisited = false);
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Fraction of states with a positive visit count.
double coverage(const std::vector<long>& visitation, int num_states);

struct SuccessSummary {
  std::optional<long> first_success;
  std::optional<long> first_majority_success;
  /// Eval success fraction over the last 10% of checkpoints.
  double terminal_rate = 0.0;
};

/// Majority threshold for n eval runs (3 of 5).
int majority_threshold(int n);
SuccessSummary success_summary(const RunArtifact& artifact);

/// Checkpoints in the trailing window: the last `fraction` of them, at least one.
std::vector<const Checkpoint*> terminal_window(const RunArtifact& artifact,
                                               double fraction = 0.1);

enum class VisitWindow {
  /// Counts since run start, as stored in the checkpoint.
  Cumulative,
  /// Counts since the previous checkpoint.
  PerCheckpoint,
};

/// Correlation at every checkpoint.
std::vector<CorrelationRecord> correlation_series(const RunArtifact& artifact,
                                                  VisitWindow window = VisitWindow::Cumulative,
                                                  bool exclude_unvisited = false);

/// Share of all visits that landed in `states`.
double visitation_share(const std::vector<long>& visitation, const std::vector<StateId>& states);

/// Mean goal similarity over states with a positive visit count.
std::optional<double> mean_similarity_of_visited(const Checkpoint& cp);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};
/// Mean and standard error (sample sd / sqrt(n)); se = 0 for n < 2.
MeanSe mean_se(const std::vector<double>& values);

}  // namespace sgcrl
