#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "idea/array.hpp"
#include "idea/rng.hpp"
#include "idea/tape.hpp"

namespace idea::comms {

/// Sparse communication projections. Queries and keys share the
/// communication width d_c; values map back to the context width D so the
/// softened update theta + alpha * c stays well-typed.
struct CommParams {
    std::vector<diff::Array> w_query;  // D x d_c per learner
    std::vector<diff::Array> w_key;    // D x d_c per learner
    std::vector<diff::Array> w_value;  // D x D per learner
    double alpha = 0.1;                // softening factor, in (0, 1)
    double dropout = 0.5;              // attention dropout probability rho, in [0, 1)
};

/// Bernoulli(1 - rho) keep mask over the G sources read by learner
/// `self_index`. If every source is dropped the self edge is force-kept so
/// a learner can always read itself.
std::vector<std::uint8_t> dropout_mask(std::size_t learner_count, double rho,
                                       std::size_t self_index, diff::Rng& rng);

/// Activated learners read softened context from all learners (activated
/// or not, including themselves): c_g = softmax(Q_g K^T / sqrt(d_c)) V,
/// theta_g <- theta_g + alpha * c_g. Keys and values sourced from
/// non-activated learners pass through a gradient stop. Non-activated
/// thetas are returned as the same record nodes, untouched.
///
/// Dropped attention edges are realized as -1e30 logit offsets, which under
/// softmax is exactly "zero the weight and renormalize the survivors": the
/// dropped weights underflow to 0 and the remaining ones sum to 1.
std::vector<diff::Value> communicate(const std::vector<diff::Value>& thetas,
                                     std::span<const std::size_t> activated, CommParams& params,
                                     bool training, diff::Rng& rng, diff::Tape& tape);

}  // namespace idea::comms
