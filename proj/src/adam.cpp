#include "idea/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace idea::diff {

AdamState make_adam(std::span<Array* const> params, double lr, double beta1, double beta2,
                    double epsilon) {
    AdamState st;
    st.lr = lr;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon = epsilon;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Array* p : params) {
        st.m.emplace_back(p->size(), 0.0);
        st.v.emplace_back(p->size(), 0.0);
    }
    return st;
}

void adam_step(std::span<Array* const> params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: state tracks " + std::to_string(state.m.size()) +
                                    " parameters, got " + std::to_string(params.size()));
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Array& a = *params[p];
        if (state.m[p].size() != a.size()) {
            throw std::invalid_argument("adam_step: moment size " +
                                        std::to_string(state.m[p].size()) +
                                        " does not match parameter shape " + shape_str(a.shape));
        }
        if (!a.grad.empty() && a.grad.size() != a.size()) {
            throw std::invalid_argument("adam_step: grad size " + std::to_string(a.grad.size()) +
                                        " does not match parameter shape " + shape_str(a.shape));
        }
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < a.size(); ++i) {
            double g = a.grad.empty() ? 0.0 : a.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            a.values[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

void zero_grads(std::span<Array* const> params) {
    for (Array* p : params) p->ensure_grad().assign(p->size(), 0.0);
}

}  // namespace idea::diff
