#pragma once

#include <string>
#include <vector>

#include "sgcrl/metrics.hpp"

namespace sgcrl {

inline constexpr int kArtifactSchemaVersion = 1;

/// Writes one run directory:
///   manifest.json          config, seed, code version, events, completeness
///   checkpoints.csv        episode,eval_success_k,eval_success_n,pearson_r,coverage
///   checkpoint_extra.csv   episode,window_episodes,window_successes,transitions,goal_reach_k
///   psi_sim/<episode>.csv  state_id,similarity,visits
///   embeddings/<episode>.{csv,json}  table dumps, when a snapshot was kept
/// Floats use shortest round-trip text; an undefined correlation is "nan".
void emit_artifact(const RunArtifact& artifact, const std::string& dir);

/// Inverse of emit_artifact. Throws SchemaError on IO problems, missing
/// files or a schema version other than kArtifactSchemaVersion.
RunArtifact load_artifact(const std::string& dir);

/// Rewrites only manifest.json (used to flag a run complete or incomplete).
void write_manifest(const RunArtifact& artifact, const std::string& dir);

/// Schema and invariant problems found in a run directory; empty when valid.
std::vector<std::string> validate_artifact(const std::string& dir);

}  // namespace sgcrl
