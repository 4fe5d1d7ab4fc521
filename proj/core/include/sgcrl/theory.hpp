#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgcrl/common.hpp"
#include "sgcrl/repr.hpp"

namespace sgcrl {

/// Synthetic anchor/future embedding sets, independent of any environment.
///
/// Slot i pairs anchor row anchor_of[i] with future row i. Distinct slots may
/// share an anchor row (the duplicated-anchor bundles); a shared row receives
/// the sum of its slots' gradients.
struct DynamicsState {
  Matrix U;
  std::vector<int> anchor_of;
  Matrix V;
  Vector z;
  long step = 0;
  /// Positives per anchor (1 or 2).
  int bundle = 1;

  int num_pairs() const { return static_cast<int>(V.rows()); }
  int dim() const { return static_cast<int>(V.cols()); }
};

/// u_i = c z + zeta_i, v_i = c z + kappa_i with Gaussian residuals, each
/// residual projected off z and rescaled so every row has unit norm and
/// projection exactly c.
DynamicsState init_theorem3(int n, int d, double c, std::uint64_t seed);

/// Pure-noise start (c = 0). With k = 2, slots 2i and 2i + 1 share one anchor.
DynamicsState init_lemma1(int n, int d, int k, std::uint64_t seed);

struct DynamicsStats {
  long step = 0;
  /// Projections onto z over all anchor and future rows.
  double c_mean = 0.0;
  double c_max = 0.0;
  /// max - min projection.
  double c_spread = 0.0;
  /// Mean residual inner product of matched pairs.
  double alpha = 0.0;
  /// Mean residual inner product of futures sharing an anchor (bundles only).
  std::optional<double> beta;
  /// Largest |u . v| over anchor/future pairs that are not positives.
  double lambda_max = 0.0;
  /// Largest |residual inner product| over the same pairs.
  double lambda_residual_max = 0.0;
  /// Mean residual squared norm.
  double r = 0.0;
  /// Mean and minimum of u . v over matched pairs.
  double alignment = 0.0;
  double alignment_min = 0.0;
  double max_norm_deviation = 0.0;
};

DynamicsStats compute_stats(const DynamicsState& state);

struct DynamicsConfig {
  double learning_rate = 0.01;
  long max_steps = 20000;
  LossDirection direction = LossDirection::Backward;
  /// Converged once no row moves farther than this in one step.
  double tol = 1e-7;
  /// Full stats are recorded every this many steps (and at the last step);
  /// the projection spread is tracked at every step regardless.
  long record_every = 1;

  void validate() const;
};

struct DynamicsRun {
  /// Entry 0 is the initial state, then every record_every steps and the
  /// final step.
  std::vector<DynamicsStats> series;
  bool converged = false;
  /// Largest max - min projection onto z seen at any step.
  double max_c_spread = 0.0;
};

/// One full-batch gradient step on all pairs plus renormalization. Returns
/// the largest row displacement.
double dynamics_step(DynamicsState& state, double learning_rate, LossDirection direction);

/// Steps until convergence or max_steps. Throws NumericalError on
/// non-finite values.
DynamicsRun run_dynamics(DynamicsState& state, const DynamicsConfig& cfg);

enum class Verdict { Pass, Fail, NotConverged };
const char* verdict_name(Verdict v);

struct EquilibriumTolerances {
  double c_terminal = 1e-2;
  double c_equal = 1e-6;
  double alignment = 0.99;
  double cross = 0.05;
  double alpha = 0.99;
  double beta = 0.99;
};

struct EquilibriumReport {
  DynamicsStats terminal;
  long steps = 0;
  bool converged = false;
  /// Largest per-step projection spread over the whole run.
  double max_c_spread = 0.0;
  /// Theorem claims: equal projections at every step, matched pairs aligned
  /// with orthogonal cross pairs, vanishing common component.
  Verdict equal_projection = Verdict::NotConverged;
  Verdict aligned = Verdict::NotConverged;
  Verdict decayed = Verdict::NotConverged;
  /// Lemma claims on alpha and (bundles only) beta.
  Verdict lemma_alpha = Verdict::NotConverged;
  std::optional<Verdict> lemma_beta;
};

/// Throws ConfigError on an empty series.
EquilibriumReport equilibrium_report(const DynamicsRun& run,
                                     const EquilibriumTolerances& tol = {});

/// Writes `<stem>.csv` (step,c_mean,c_max,alpha,beta,lambda_max,r,alignment)
/// and `<stem>.json` holding `params` plus the report verdicts.
void write_dynamics(const DynamicsRun& run, const EquilibriumReport& report,
                    const std::map<std::string, std::string>& params, const std::string& stem);

}  // namespace sgcrl
