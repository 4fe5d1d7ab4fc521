#pragma once

#include <cstdint>
#include <vector>

namespace check {

/// One (s, a) comparison of the implicit-reward identity.
struct IdentitySample {
  int state = 0;
  int action = 0;
  /// phi(s, a) . psi(g), with phi set to the exact discounted future mean.
  double critic = 0.0;
  /// Monte-Carlo mean and standard error of (1 - gamma) sum_t gamma^t psi(s_t) . psi(g)
  /// from s_0 = p(s, a).
  double mc_mean = 0.0;
  double mc_se = 0.0;
};

/// Chain of `num_states` states with left/right actions under a fixed softmax
/// policy drawn from a random table. Anchor embeddings are solved in closed
/// form from the chain's occupancy measure; returns are rolled out with the
/// library's rollout and action sampler.
std::vector<IdentitySample> implicit_reward_identity(int num_states, int pairs, int rollouts,
                                                     double gamma, std::uint64_t seed);

}  // namespace check
