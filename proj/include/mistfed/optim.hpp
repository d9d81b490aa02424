#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>

#include "mistfed/errors.hpp"
#include "mistfed/param_vector.hpp"

namespace mistfed {

/// Adam optimizer state. Moment vectors match the parameter length and
/// step_count advances by exactly 1 per step.
struct AdamState {
    ParamVector first_moment;
    ParamVector second_moment;
    std::uint64_t step_count = 0;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(std::size_t n, double lr = 0.01, double b1 = 0.9, double b2 = 0.999,
                          double eps = 1e-8) {
        if (!(lr > 0.0)) throw ConfigError("AdamState: learning_rate must be positive");
        if (!(b1 > 0.0 && b1 < 1.0) || !(b2 > 0.0 && b2 < 1.0)) {
            throw ConfigError("AdamState: beta1/beta2 must lie in (0,1)");
        }
        if (!(eps > 0.0)) throw ConfigError("AdamState: epsilon must be positive");
        AdamState s;
        s.first_moment = ParamVector::zeros(n);
        s.second_moment = ParamVector::zeros(n);
        s.learning_rate = lr;
        s.beta1 = b1;
        s.beta2 = b2;
        s.epsilon = eps;
        return s;
    }
};

/// One bias-corrected Adam update, in place. A zero gradient leaves the
/// parameters untouched (moments stay zero, the update is 0/(0+eps)).
inline void adam_step_inplace(ParamVector& params, const ParamVector& grad, AdamState& state) {
    if (params.size() != grad.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw ConfigError("adam_step: parameter, gradient and moment lengths must all match");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));
        }
    }
    state.step_count += 1;
    const auto t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        const double m = state.first_moment[i] =
            state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        const double v = state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        params[i] -= state.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + state.epsilon);
    }
}

/// Pure variant: returns the updated (params, state), inputs untouched.
inline std::pair<ParamVector, AdamState> adam_step(const ParamVector& params,
                                                   const ParamVector& grad, AdamState state) {
    ParamVector next = params;
    adam_step_inplace(next, grad, state);
    return {std::move(next), std::move(state)};
}

/// Plain gradient-descent step; kept for the aggregation-equivalence oracle.
inline void gd_step_inplace(ParamVector& params, const ParamVector& grad, double learning_rate) {
    if (!(learning_rate > 0.0)) throw ConfigError("gd_step: learning_rate must be positive");
    params.axpy(-learning_rate, grad);
}

/// Central-difference gradient oracle: (f(w + h e_j) - f(w - h e_j)) / 2h
/// per coordinate. h must lie in [1e-7, 1e-3].
inline ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& f,
                                    const ParamVector& w, double h = 1e-5) {
    if (!(h >= 1e-7 && h <= 1e-3)) {
        throw UsageError("finite_diff_grad: h must lie in [1e-7, 1e-3]");
    }
    ParamVector g(w.size());
    ParamVector probe = w;
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double orig = probe[j];
        probe[j] = orig + h;
        const double fp = f(probe);
        probe[j] = orig - h;
        const double fm = f(probe);
        probe[j] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite objective at coordinate " +
                               std::to_string(j));
        }
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace mistfed
