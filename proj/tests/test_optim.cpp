#include "doctest.h"

#include <cmath>
#include <string>

#include "mistfed/optim.hpp"

using mistfed::AdamState;
using mistfed::ParamVector;

TEST_CASE("zero gradient is a fixed point and still advances the step count") {
    ParamVector params{1.5, -2.0, 0.25};
    auto state = AdamState::init(3, 0.1);
    const auto [next, next_state] = mistfed::adam_step(params, ParamVector::zeros(3), state);
    CHECK(next == params);
    CHECK(next_state.step_count == 1);
}

TEST_CASE("bias-corrected first step moves by about lr") {
    // Hand evaluation with beta1=0.9, beta2=0.999, eps=1e-8:
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps) = lr.
    ParamVector params{0.0};
    auto state = AdamState::init(1, 0.1);
    const auto [next, next_state] = mistfed::adam_step(params, ParamVector{1.0}, state);
    CHECK(next[0] == doctest::Approx(-0.1).epsilon(1e-7));
    CHECK(next_state.step_count == 1);
}

TEST_CASE("second identical-gradient step does not grow") {
    ParamVector params{0.0, 5.0};
    ParamVector grad{1.0, -0.5};
    auto state = AdamState::init(2, 0.05);
    auto [p1, s1] = mistfed::adam_step(params, grad, state);
    const double step1 = (p1 - params).norm2();
    auto [p2, s2] = mistfed::adam_step(p1, grad, s1);
    const double step2 = (p2 - p1).norm2();
    CHECK(s2.step_count == 2);
    CHECK(step2 <= step1 + 1e-12);
}

TEST_CASE("adam_step validates lengths and finiteness") {
    ParamVector params{0.0, 0.0};
    auto state = AdamState::init(2);
    CHECK_THROWS_AS(mistfed::adam_step(params, ParamVector{1.0}, state), mistfed::ConfigError);

    ParamVector bad(2);
    bad[1] = std::nan("");
    try {
        mistfed::adam_step(params, bad, state);
        FAIL("expected NumericError");
    } catch (const mistfed::NumericError& e) {
        CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    }
}

TEST_CASE("pure adam_step leaves its inputs untouched") {
    ParamVector params{1.0};
    ParamVector grad{2.0};
    auto state = AdamState::init(1);
    (void)mistfed::adam_step(params, grad, state);
    CHECK(params[0] == 1.0);
    CHECK(state.step_count == 0);
}

TEST_CASE("finite differences of a constant are zero") {
    const auto f = [](const ParamVector&) { return 3.25; };
    const auto g = mistfed::finite_diff_grad(f, ParamVector{1.0, -2.0, 0.5});
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("finite differences recover an analytic quadratic gradient") {
    const auto f = [](const ParamVector& w) {
        double s = 0.0;
        for (double x : w.values()) s += x * x;
        return s;
    };
    const auto g = mistfed::finite_diff_grad(f, ParamVector{1.0, 2.0}, 1e-5);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("finite_diff_grad enforces the step-size window") {
    const auto f = [](const ParamVector& w) { return w[0]; };
    CHECK_THROWS_AS(mistfed::finite_diff_grad(f, ParamVector{0.0}, 1e-8), mistfed::UsageError);
    CHECK_THROWS_AS(mistfed::finite_diff_grad(f, ParamVector{0.0}, 1e-2), mistfed::UsageError);
}

TEST_CASE("finite_diff_grad reports non-finite objectives") {
    const auto f = [](const ParamVector& w) { return std::log(w[0]); };
    CHECK_THROWS_AS(mistfed::finite_diff_grad(f, ParamVector{0.0}), mistfed::NumericError);
}

TEST_CASE("gd step is the exact axpy") {
    ParamVector params{1.0, 2.0};
    mistfed::gd_step_inplace(params, ParamVector{0.5, -1.0}, 0.1);
    CHECK(params[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(params[1] == doctest::Approx(2.1).epsilon(1e-15));
}
