#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sgcrl {

/// Dense index into an environment's state set, in [0, num_states).
using StateId = std::int32_t;
/// Index into the uniform per-state action set, in [0, num_actions).
using ActionId = std::int32_t;

using Rng = std::mt19937_64;

/// Row-major so that one state's embedding is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Invalid configuration or arguments supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// On-disk data that cannot be read back (bad schema, missing fields, IO).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite values, degenerate normalization).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent, reproducible stream derived from a run seed. Distinct
/// `stream` values give statistically unrelated generators.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

}  // namespace sgcrl
