#include "idea/gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace idea::gating {

InputTokens tokenize_window(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("tokenize_window: empty input window");
    std::size_t t = x.size();
    InputTokens out;
    out.real_count = t;
    out.tokens = diff::Array(t + 1, 2);
    for (std::size_t i = 0; i < t; ++i) {
        out.tokens.at(i, 0) = x[i];
        out.tokens.at(i, 1) = static_cast<double>(i) / static_cast<double>(t);
    }
    // null token row stays zero
    return out;
}

namespace {

void check_widths(const GatingParams& params, std::size_t learner, std::size_t context_width) {
    if (learner >= params.w_query.size()) {
        throw std::invalid_argument("input_attention: learner " + std::to_string(learner) +
                                    " out of range, have " +
                                    std::to_string(params.w_query.size()) + " query projections");
    }
    const diff::Array& wq = params.w_query[learner];
    if (wq.rows() != context_width) {
        throw std::invalid_argument("input_attention: context width " +
                                    std::to_string(context_width) +
                                    " does not match query projection " + diff::shape_str(wq.shape));
    }
    if (wq.cols() != params.w_key.cols()) {
        throw std::invalid_argument("input_attention: query width " + std::to_string(wq.cols()) +
                                    " does not match key width " +
                                    std::to_string(params.w_key.cols()));
    }
}

}  // namespace

TapedTokens project_tokens(diff::Value x_l, GatingParams& params, diff::Tape& tape) {
    if (x_l.rows() != 1 || x_l.cols() < 1) {
        throw std::invalid_argument("project_tokens: input must be a non-empty row, got " +
                                    diff::shape_str(x_l.shape()));
    }
    std::size_t t = x_l.cols();
    // value column (x transposed, plus the zero null token) stays on the
    // record; the position column is constant
    diff::Value value_col =
        diff::concat(diff::transpose(x_l), tape.constant(diff::Array(1, 1)), 0);
    diff::Array pos(t + 1, 1);
    for (std::size_t i = 0; i < t; ++i)
        pos.values[i] = static_cast<double>(i) / static_cast<double>(t);
    diff::Value tokens = diff::concat(value_col, tape.constant(std::move(pos)), 1);

    TapedTokens out;
    out.tokens = tokens;
    out.keys = diff::matmul(tokens, tape.leaf(params.w_key));
    out.values = diff::matmul(tokens, tape.leaf(params.w_value));
    out.real_count = t;
    return out;
}

AttentionResult input_attention(diff::Value theta_prev, const TapedTokens& tokens,
                                GatingParams& params, std::size_t learner, diff::Tape& tape) {
    check_widths(params, learner, theta_prev.cols());
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.w_key.cols()));

    diff::Value query = diff::matmul(theta_prev, tape.leaf(params.w_query[learner]));
    diff::Value logits =
        diff::scale(diff::matmul(query, diff::transpose(tokens.keys)), inv_sqrt_dk);
    diff::Value weights = diff::softmax_rows(logits);       // 1 x (t+1)
    diff::Value pooled = diff::matmul(weights, tokens.values);  // 1 x d_v

    AttentionResult out;
    out.pooled = pooled;
    out.weights = weights;
    out.relevance = 1.0 - weights.values()[tokens.real_count];
    return out;
}

double relevance_score(std::span<const double> theta_prev, const InputTokens& tokens,
                       const GatingParams& params, std::size_t learner) {
    check_widths(params, learner, theta_prev.size());
    const diff::Array& wq = params.w_query[learner];
    std::size_t dk = wq.cols();
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<double> q(dk, 0.0);
    for (std::size_t i = 0; i < theta_prev.size(); ++i)
        for (std::size_t j = 0; j < dk; ++j) q[j] += theta_prev[i] * wq.at(i, j);

    std::size_t n = tokens.tokens.rows();  // t + 1
    std::vector<double> logits(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double key_j, dot = 0.0;
        for (std::size_t j = 0; j < dk; ++j) {
            key_j = tokens.tokens.at(r, 0) * params.w_key.at(0, j) +
                    tokens.tokens.at(r, 1) * params.w_key.at(1, j);
            dot += q[j] * key_j;
        }
        logits[r] = dot * inv_sqrt_dk;
    }
    double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& l : logits) {
        l = std::exp(l - m);
        sum += l;
    }
    return 1.0 - logits[n - 1] / sum;
}

std::vector<std::size_t> select_topk(std::span<const double> relevances, std::size_t k) {
    std::size_t g = relevances.size();
    if (k < 1 || k > g) {
        throw std::invalid_argument("select_topk: k=" + std::to_string(k) + " out of range for " +
                                    std::to_string(g) + " learners");
    }
    std::vector<std::size_t> order(g);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return relevances[a] > relevances[b];  // stable: ties keep lower index first
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace idea::gating
