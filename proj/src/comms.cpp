#include "idea/comms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace idea::comms {

std::vector<std::uint8_t> dropout_mask(std::size_t learner_count, double rho,
                                       std::size_t self_index, diff::Rng& rng) {
    if (rho < 0.0 || rho >= 1.0) {
        throw std::invalid_argument("dropout_mask: rho=" + std::to_string(rho) +
                                    " outside [0, 1)");
    }
    std::vector<std::uint8_t> mask(learner_count, 1);
    if (rho == 0.0) return mask;
    bool any = false;
    for (std::size_t j = 0; j < learner_count; ++j) {
        mask[j] = rng.bernoulli(1.0 - rho) ? 1 : 0;
        any = any || mask[j] != 0;
    }
    if (!any) mask[self_index] = 1;
    return mask;
}

std::vector<diff::Value> communicate(const std::vector<diff::Value>& thetas,
                                     std::span<const std::size_t> activated, CommParams& params,
                                     bool training, diff::Rng& rng, diff::Tape& tape) {
    std::size_t g_count = thetas.size();
    if (params.w_query.size() != g_count || params.w_key.size() != g_count ||
        params.w_value.size() != g_count) {
        throw std::invalid_argument("communicate: projection count does not match " +
                                    std::to_string(g_count) + " learners");
    }
    if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
        throw std::invalid_argument("communicate: alpha=" + std::to_string(params.alpha) +
                                    " outside (0, 1)");
    }
    std::size_t width = thetas.empty() ? 0 : thetas[0].cols();
    for (const diff::Value& th : thetas) {
        if (th.cols() != width || th.rows() != 1) {
            throw std::invalid_argument("communicate: context width mismatch, expected 1x" +
                                        std::to_string(width) + ", got " +
                                        diff::shape_str(th.shape()));
        }
    }

    std::vector<bool> is_active(g_count, false);
    for (std::size_t g : activated) is_active[g] = true;

    // Keys/values from every learner; sources outside the activated set are
    // read but not written through: their projections sit behind a stop.
    std::vector<diff::Value> keys(g_count), vals(g_count);
    for (std::size_t j = 0; j < g_count; ++j) {
        diff::Value kj = diff::matmul(thetas[j], tape.leaf(params.w_key[j]));
        diff::Value vj = diff::matmul(thetas[j], tape.leaf(params.w_value[j]));
        if (!is_active[j]) {
            kj = diff::stop_gradient(kj);
            vj = diff::stop_gradient(vj);
        }
        keys[j] = kj;
        vals[j] = vj;
    }
    diff::Value key_mat = keys[0];
    diff::Value val_mat = vals[0];
    for (std::size_t j = 1; j < g_count; ++j) {
        key_mat = diff::concat(key_mat, keys[j], 0);  // G x d_c
        val_mat = diff::concat(val_mat, vals[j], 0);  // G x D
    }

    double inv_sqrt_dc = 1.0 / std::sqrt(static_cast<double>(params.w_key[0].cols()));

    std::vector<diff::Value> out = thetas;
    for (std::size_t g : activated) {
        diff::Value query = diff::matmul(thetas[g], tape.leaf(params.w_query[g]));
        diff::Value logits =
            diff::scale(diff::matmul(query, diff::transpose(key_mat)), inv_sqrt_dc);
        if (training && params.dropout > 0.0) {
            auto mask = dropout_mask(g_count, params.dropout, g, rng);
            diff::Array penalty(1, g_count);
            for (std::size_t j = 0; j < g_count; ++j)
                penalty.values[j] = mask[j] != 0 ? 0.0 : -1e30;
            logits = diff::add(logits, tape.constant(std::move(penalty)));
        }
        diff::Value weights = diff::softmax_rows(logits);   // 1 x G
        diff::Value context = diff::matmul(weights, val_mat);  // 1 x D
        out[g] = diff::add(thetas[g], diff::scale(context, params.alpha));
    }
    return out;
}

}  // namespace idea::comms
