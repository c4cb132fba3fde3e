#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "idea/array.hpp"

namespace idea::diff {

/// Adam with bias correction. Moment buffers are laid out one per parameter,
/// matching the parameters' element counts.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam(std::span<Array* const> params, double lr = 1e-3, double beta1 = 0.9,
                    double beta2 = 0.999, double epsilon = 1e-8);

/// One optimizer step over `params`, consuming each array's `grad` (an
/// empty grad counts as zero). Increments the step counter.
void adam_step(std::span<Array* const> params, AdamState& state);

void zero_grads(std::span<Array* const> params);

}  // namespace idea::diff
