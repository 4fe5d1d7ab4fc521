#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sgcrl/common.hpp"

namespace sgcrl {

/// Which side of the similarity matrix the softmax normalizes over.
/// Backward: over anchors (columns of p sum to 1). Forward: over futures.
enum class LossDirection { Backward, Forward };

struct UpdateConfig {
  double learning_rate = 1e-2;
  int batch_size = 128;
  bool normalize = true;
  LossDirection direction = LossDirection::Backward;
  /// When set, anchor slots receive no gradient (futures still do).
  bool anchor_stop_gradient = false;

  void validate() const;
};

/// Contrastive training pairs. Slot i pairs anchors[i] with futures[i]; both
/// index rows of the same embedding table.
struct TripletBatch {
  std::vector<StateId> anchors;
  std::vector<StateId> futures;

  std::size_t size() const { return anchors.size(); }
};

/// Per-state embedding lookup table psi(s), one unit-norm row per state.
///
/// Pinned rows hold a fixed vector and are restored after every update.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(Matrix vectors);

  int num_states() const { return static_cast<int>(vectors_.rows()); }
  int dim() const { return static_cast<int>(vectors_.cols()); }

  const Matrix& vectors() const { return vectors_; }
  Vector row(StateId s) const { return vectors_.row(s).transpose(); }
  double dot(StateId s, const Vector& v) const { return vectors_.row(s).dot(v); }

  /// Overwrites one row (no normalization). Pinned rows are not protected.
  void set_row(StateId s, const Vector& v) { vectors_.row(s) = v.transpose(); }
  /// Adds `delta` to the rows and renormalizes every touched row.
  void apply_update(const Matrix& delta, std::span<const StateId> touched, bool normalize);
  void normalize_rows();

  void pin(StateId s, const Vector& target);
  bool is_pinned(StateId s) const { return pins_.count(s) > 0; }
  const std::map<StateId, Vector>& pins() const { return pins_; }
  void restore_pins();

  double max_norm_deviation() const;

 private:
  Matrix vectors_;
  std::map<StateId, Vector> pins_;
};

/// Initialization shared by every tabular experiment: one Gaussian vector x
/// (entries N(0, 1/dim)) common to all states plus per-state noise, rows
/// normalized. Returns the table and the common vector x.
struct TableInit {
  EmbeddingTable table;
  Vector common;
};
TableInit init_table_with_common(int num_states, int dim, double common_scale,
                                 double noise_scale, std::uint64_t seed);
EmbeddingTable init_table(int num_states, int dim, double common_scale, double noise_scale,
                          std::uint64_t seed);

/// Softmax responsibilities p_ij = exp(a_i.f_j) / sum_k exp(a_k.f_j) for the
/// backward loss (per-column normalization), or / sum_k exp(a_i.f_k) for the
/// forward loss.
Matrix prob_matrix(const Matrix& anchors, const Matrix& futures,
                   LossDirection direction = LossDirection::Backward);
Matrix prob_matrix(const EmbeddingTable& table, const TripletBatch& batch,
                   LossDirection direction = LossDirection::Backward);

/// Negative loss gradient, accumulated per table row (all-zero rows for
/// states absent from the batch). Anchor slots receive sum_j (d_ij - p_ij) f_j
/// and future slots sum_i (d_ij - p_ij) a_i.
Matrix infonce_descent_direction(const EmbeddingTable& table, const TripletBatch& batch,
                                 const UpdateConfig& cfg);

/// One gradient step with learning rate cfg.learning_rate, followed by row
/// normalization of every touched row and restoration of pinned rows.
void infonce_step(EmbeddingTable& table, const TripletBatch& batch, const UpdateConfig& cfg);

/// psi(s) . psi(g).
double psi_similarity(const EmbeddingTable& table, StateId s, StateId g);
/// psi(s) . v for every state.
std::vector<double> similarity_to(const EmbeddingTable& table, const Vector& v);

/// Pins `states` to `target`, which must have unit norm (tolerance 1e-6).
void pin_region(EmbeddingTable& table, const std::set<StateId>& states, const Vector& target);

/// Scalar ablation: one raw similarity logit per (state, goal) pair.
class ScalarSimTable {
 public:
  ScalarSimTable() = default;
  explicit ScalarSimTable(Matrix sims) : sims_(std::move(sims)) {}
  static ScalarSimTable zeros(int num_states);
  /// Logits initialized to the pairwise inner products of an embedding table.
  static ScalarSimTable from_embeddings(const EmbeddingTable& table);

  int num_states() const { return static_cast<int>(sims_.rows()); }
  double at(StateId s, StateId g) const { return sims_(s, g); }
  const Matrix& sims() const { return sims_; }
  Matrix& sims() { return sims_; }

 private:
  Matrix sims_;
};

/// InfoNCE on scalar logits T[anchor_i][future_j]; no normalization.
/// Column softmax uses per-column max subtraction.
void scalar_step(ScalarSimTable& table, const TripletBatch& batch, const UpdateConfig& cfg);
Matrix scalar_prob_matrix(const ScalarSimTable& table, const TripletBatch& batch);

/// Table checkpoint: `<stem>.csv` holds one row per state (full round-trip
/// precision), `<stem>.json` the sidecar {num_states, dim, seed, step,
/// pinned_ids}.
struct TableCheckpointMeta {
  int num_states = 0;
  int dim = 0;
  std::uint64_t seed = 0;
  long step = 0;
  std::vector<StateId> pinned_ids;
};
void save_table(const EmbeddingTable& table, const std::string& stem, std::uint64_t seed,
                long step);
EmbeddingTable load_table(const std::string& stem, TableCheckpointMeta* meta = nullptr);

}  // namespace sgcrl
