#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace agrotrack::reliability {

/// Slotted-attempt MAC abstraction: N nodes, per-slot attempt probability
/// tau, and K jitter micro-slots.
struct MacParams {
  std::uint32_t n_nodes = 15;
  double tau = 0.0;
  std::uint32_t k_microslots = 8;
  double slot_s = 0.0;

  void validate() const {
    if (n_nodes < 1) throw std::domain_error("n_nodes must be >= 1");
    if (tau < 0.0 || tau > 1.0) throw std::domain_error("tau must be in [0, 1]");
    if (k_microslots < 1) throw std::domain_error("k_microslots must be >= 1");
  }
};

/// Loss budget split into obstruction and collision shares.
struct ReliabilityBudget {
  double p_obstruction = 0.0;
  double p_collision = 0.0;
  double p_success = 1.0;
};

/// Probability that at least one of the other N-1 nodes attempts the slot.
inline double collision_prob(const MacParams& params) {
  params.validate();
  if (params.n_nodes == 1) return 0.0;
  return 1.0 - std::pow(1.0 - params.tau, static_cast<double>(params.n_nodes - 1));
}

/// Same with attempts spread over K micro-slots; collapses to
/// collision_prob at K = 1 and is non-increasing in K.
inline double collision_prob_jitter(const MacParams& params) {
  params.validate();
  if (params.n_nodes == 1) return 0.0;
  return 1.0 -
         std::pow(1.0 - params.tau / params.k_microslots, static_cast<double>(params.n_nodes - 1));
}

/// Decompose total reliability while holding the obstruction share fixed.
inline ReliabilityBudget loss_decomposition(double p_obstruction, const MacParams& params,
                                            bool jitter) {
  if (p_obstruction < 0.0 || p_obstruction > 1.0)
    throw std::domain_error("p_obstruction must be in [0, 1]");
  const double p_col = jitter ? collision_prob_jitter(params) : collision_prob(params);
  if (p_obstruction + p_col > 1.0)
    throw std::domain_error("loss components exceed 1");
  return {p_obstruction, p_col, 1.0 - p_obstruction - p_col};
}

/// Invert the jittered collision formula: the tau that yields the target
/// collision probability for N nodes and K micro-slots.
inline double calibrate_tau(double target_p_col, std::uint32_t n_nodes, std::uint32_t k) {
  if (target_p_col < 0.0 || target_p_col >= 1.0)
    throw std::domain_error("target collision probability must be in [0, 1)");
  if (n_nodes < 2) throw std::domain_error("calibrate_tau needs n_nodes >= 2");
  if (k < 1) throw std::domain_error("k must be >= 1");
  const double tau =
      k * (1.0 - std::pow(1.0 - target_p_col, 1.0 / static_cast<double>(n_nodes - 1)));
  if (tau > 1.0) throw std::domain_error("target collision probability is infeasible: tau > 1");
  return tau;
}

}  // namespace agrotrack::reliability
