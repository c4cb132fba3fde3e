#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "idea/array.hpp"
#include "idea/tape.hpp"

namespace idea::diff {

struct GradCheckLeaf {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool passed = true;
    std::vector<GradCheckLeaf> leaves;
};

/// Compares analytic gradients of a scalar-valued function against central
/// finite differences, leaf by leaf. `build` receives a fresh tape each
/// evaluation and must construct the scalar from the current leaf values
/// (it may configure the tape, e.g. replay captured stop_gradient values,
/// before building). Relative error uses denominator
/// max(|analytic|, |numeric|, denom_floor).
GradCheckReport finite_diff_check(const std::function<Value(Tape&)>& build,
                                  std::span<Array* const> leaves, double step, double tolerance,
                                  double denom_floor = 1e-6);

}  // namespace idea::diff
