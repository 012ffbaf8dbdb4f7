#pragma once

#include <cmath>
#include <string>

#include "fedsim/error.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

struct AdamState {
    ParamVector first_moment;
    ParamVector second_moment;
    long step_count = 0;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState make(const ShapeMap& shape, double lr) {
        AdamState s;
        s.first_moment = ParamVector(shape);
        s.second_moment = ParamVector(shape);
        s.learning_rate = lr;
        return s;
    }
};

// Bias-corrected Adam update, in place. Throws on non-finite gradient input;
// finite parameters out of finite parameters and gradients are guaranteed by
// the update form (denominator >= epsilon).
inline void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state) {
    require_same_shape(params, grad, "adam_step");
    require_same_shape(params, state.first_moment, "adam_step moments");
    for (std::size_t i = 0; i < grad.values.size(); ++i) {
        if (!std::isfinite(grad.values[i]))
            throw Error(ErrorCategory::Numeric,
                        "non-finite gradient component at index " + std::to_string(i));
    }
    state.step_count += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        const double g = grad.values[i];
        double& m = state.first_moment.values[i];
        double& v = state.second_moment.values[i];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        params.values[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace fedsim
