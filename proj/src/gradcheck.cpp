#include "idea/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace idea::diff {

namespace {

double eval_scalar(const std::function<Value(Tape&)>& build) {
    Tape tape;
    Value out = build(tape);
    if (numel(out.shape()) != 1) {
        throw std::invalid_argument("finite_diff_check: function output has shape " +
                                    shape_str(out.shape()) + ", expected a scalar");
    }
    return out.values()[0];
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Value(Tape&)>& build,
                                  std::span<Array* const> leaves, double step, double tolerance,
                                  double denom_floor) {
    if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");

    // Analytic pass.
    for (Array* leaf : leaves) leaf->ensure_grad().assign(leaf->size(), 0.0);
    {
        Tape tape;
        Value out = build(tape);
        if (numel(out.shape()) != 1) {
            throw std::invalid_argument("finite_diff_check: function output has shape " +
                                        shape_str(out.shape()) + ", expected a scalar");
        }
        tape.backward(out);
    }

    GradCheckReport report;
    report.leaves.reserve(leaves.size());
    for (Array* leaf : leaves) {
        GradCheckLeaf lr;
        for (std::size_t i = 0; i < leaf->size(); ++i) {
            double saved = leaf->values[i];
            leaf->values[i] = saved + step;
            double up = eval_scalar(build);
            leaf->values[i] = saved - step;
            double down = eval_scalar(build);
            leaf->values[i] = saved;

            double numeric = (up - down) / (2.0 * step);
            double analytic = leaf->grad[i];
            double denom = std::max({std::fabs(analytic), std::fabs(numeric), denom_floor});
            double rel = std::fabs(analytic - numeric) / denom;
            if (rel >= lr.max_rel_error) {
                lr.max_rel_error = rel;
                lr.worst_index = i;
                lr.analytic = analytic;
                lr.numeric = numeric;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, lr.max_rel_error);
        report.leaves.push_back(lr);
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

}  // namespace idea::diff
