#pragma once

// Finite-difference harness for the full model. The hard top-k selection is
// non-differentiable by design, and stop_gradient edges carry values the
// backward pass deliberately ignores, so an honest numeric check must hold
// both fixed: activations are pinned to the baseline run and captured
// stop_gradient outputs are replayed as constants during the perturbed
// evaluations. What remains is exactly the function backward differentiates.

#include <string>
#include <vector>

#include "idea/gradcheck.hpp"
#include "idea/model.hpp"
#include "idea/train.hpp"

namespace gradcheck_harness {

struct ActiveLeaves {
    std::vector<idea::diff::Array*> arrays;
    std::vector<std::string> names;
};

/// Leaves with a stop-free path to the loss, derived from the pinned
/// activation structure: theta0 of group-1 winners, shared gate projections,
/// and every per-learner parameter of a learner in the group where it won.
inline ActiveLeaves active_leaves(idea::model::Model& m,
                                  const std::vector<std::vector<std::size_t>>& pins) {
    ActiveLeaves out;
    auto add = [&](idea::diff::Array* a, std::string name) {
        out.arrays.push_back(a);
        out.names.push_back(std::move(name));
    };
    for (std::size_t g : pins[0]) add(&m.initial_contexts[g], "theta0." + std::to_string(g));
    for (std::size_t l = 0; l < m.groups.size(); ++l) {
        auto& grp = m.groups[l];
        std::string gp = "group" + std::to_string(l) + ".";
        add(&grp.gate.w_key, gp + "gate.key");
        add(&grp.gate.w_value, gp + "gate.value");
        for (std::size_t g : pins[l]) {
            std::string lp = gp + "learner" + std::to_string(g) + ".";
            add(&grp.gate.w_query[g], gp + "gate.query" + std::to_string(g));
            add(&grp.comm.w_query[g], lp + "comm.q");
            add(&grp.comm.w_key[g], lp + "comm.k");
            add(&grp.comm.w_value[g], lp + "comm.v");
            auto& lr = grp.learners[g];
            for (std::size_t mm = 0; mm < lr.fc_weights.size(); ++mm) {
                add(&lr.fc_weights[mm], lp + "fc" + std::to_string(mm) + ".w");
                add(&lr.fc_biases[mm], lp + "fc" + std::to_string(mm) + ".b");
            }
            add(&lr.head_backcast_w, lp + "head_b.w");
            add(&lr.head_backcast_b, lp + "head_b.b");
            add(&lr.head_forecast_w, lp + "head_f.w");
            add(&lr.head_forecast_b, lp + "head_f.b");
        }
    }
    return out;
}

struct ModelCheck {
    idea::diff::GradCheckReport report;
    ActiveLeaves leaves;
};

inline ModelCheck check_model_gradients(idea::model::Model& m, const std::vector<double>& x,
                                        const std::vector<double>& y, double step = 1e-5,
                                        double tol = 1e-4) {
    std::vector<std::vector<std::size_t>> pins;
    std::vector<std::vector<double>> stops;
    {
        idea::diff::Tape tape;
        tape.capture_stops(&stops);
        idea::diff::Rng rng(0);
        idea::model::ForwardOptions opts;
        auto fwd = idea::model::model_forward(m, x, opts, rng, tape);
        for (const auto& tr : fwd.traces) pins.push_back(tr.activation.activated);
    }

    idea::model::ForwardOptions opts;
    opts.pinned_activations = &pins;
    auto build = [&](idea::diff::Tape& tape) {
        tape.replay_stops(&stops);
        idea::diff::Rng rng(0);
        auto fwd = idea::model::model_forward(m, x, opts, rng, tape);
        // 1/100 keeps the scalar O(1) so finite-difference roundoff stays
        // well under the tolerance; gradients scale uniformly with it
        return idea::diff::scale(idea::train::smape_loss(fwd.forecast, y, 1e-8, tape), 0.01);
    };

    ModelCheck out;
    out.leaves = active_leaves(m, pins);
    out.report = idea::diff::finite_diff_check(build, out.leaves.arrays, step, tol);
    return out;
}

}  // namespace gradcheck_harness
