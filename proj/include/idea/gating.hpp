#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "idea/array.hpp"
#include "idea/tape.hpp"

namespace idea::gating {

/// Recurrent input competition: learner contexts from the previous group
/// send queries against keys/values projected from the current group input.
/// The key and value projections are shared across learners, the query
/// projection is per learner.
struct GatingParams {
    diff::Array w_key;                   // 2 x d_k
    diff::Array w_value;                 // 2 x d_v
    std::vector<diff::Array> w_query;    // one D x d_k per learner
    std::size_t key_width = 0;           // d_k
    std::size_t value_width = 0;         // d_v
};

/// The lookback window as (value, position) token rows plus one all-zero
/// null token. The null token's attention mass is what relevance is
/// measured against; its value row is zero so it never contributes to the
/// pooled input.
struct InputTokens {
    diff::Array tokens;          // (t+1) x 2, last row zero
    std::size_t real_count = 0;  // t
};

InputTokens tokenize_window(std::span<const double> x);

/// The same token layout recorded on a tape, with the shared key/value
/// projections applied once per group. Built from the group input Value so
/// gradients flow through the backcast residual into earlier groups.
struct TapedTokens {
    diff::Value tokens;          // (t+1) x 2
    diff::Value keys;            // (t+1) x d_k
    diff::Value values;          // (t+1) x d_v
    std::size_t real_count = 0;  // t
};

TapedTokens project_tokens(diff::Value x_l, GatingParams& params, diff::Tape& tape);

/// Attention of one learner's previous context over the input tokens,
/// recorded on the tape. relevance = 1 - weight on the null token.
struct AttentionResult {
    diff::Value pooled;      // 1 x d_v
    diff::Value weights;     // 1 x (t+1)
    double relevance = 0.0;
};

AttentionResult input_attention(diff::Value theta_prev, const TapedTokens& tokens,
                                GatingParams& params, std::size_t learner, diff::Tape& tape);

/// Same attention score computed with plain arithmetic, no record. Used to
/// run the competition for every learner before any branch is taped.
double relevance_score(std::span<const double> theta_prev, const InputTokens& tokens,
                       const GatingParams& params, std::size_t learner);

/// Indices of the k largest relevances, ties broken toward the lower
/// learner index. Returned ascending.
std::vector<std::size_t> select_topk(std::span<const double> relevances, std::size_t k);

/// Per-group gating outcome kept for traces and the activation map.
struct ActivationRecord {
    std::size_t group = 0;
    std::vector<double> relevance;       // one per learner, in [0, 1]
    std::vector<std::size_t> activated;  // exactly k indices, ascending
};

}  // namespace idea::gating
