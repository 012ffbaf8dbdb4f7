#include <gtest/gtest.h>

#include <cmath>

#include "fedsim/adam.hpp"

using namespace fedsim;

namespace {

ParamVector scalar_params(double v) {
    ParamVector p({{"x", {1}}});
    p.values[0] = v;
    return p;
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
    ParamVector p = scalar_params(3.0);
    AdamState st = AdamState::make(p.shape, 0.01);
    ParamVector g = scalar_params(1.0);
    adam_step(p, g, st);
    const double m_after_one = st.first_moment.values[0];
    ParamVector zero = scalar_params(0.0);
    const double before = p.values[0];
    for (int i = 0; i < 50; ++i) adam_step(p, zero, st);
    // m_hat is zero only asymptotically, so params drift a little, but the
    // moments must decay geometrically.
    EXPECT_LT(std::fabs(st.first_moment.values[0]), std::fabs(m_after_one) * 1e-2);
    EXPECT_EQ(st.step_count, 51);
    (void)before;
}

TEST(Adam, ZeroGradientFromFreshStateIsNoOp) {
    ParamVector p = scalar_params(3.0);
    AdamState st = AdamState::make(p.shape, 0.01);
    ParamVector zero = scalar_params(0.0);
    for (int i = 0; i < 10; ++i) adam_step(p, zero, st);
    EXPECT_DOUBLE_EQ(p.values[0], 3.0);
    EXPECT_EQ(st.step_count, 10);
}

// First bias-corrected step is -lr * g / (|g| + eps) ~ -lr * sign(g).
TEST(Adam, FirstStepAnalytic) {
    for (double g0 : {2.5, -0.7, 1e3}) {
        ParamVector p = scalar_params(1.0);
        AdamState st = AdamState::make(p.shape, 0.001);
        adam_step(p, scalar_params(g0), st);
        const double delta = p.values[0] - 1.0;
        const double expected = -0.001 * (g0 > 0 ? 1.0 : -1.0);
        EXPECT_NEAR(delta, expected, 1e-8) << "g0 = " << g0;
    }
}

// With a constant gradient the per-step magnitude approaches lr * sign(g).
TEST(Adam, ConstantGradientLimit) {
    ParamVector p = scalar_params(0.0);
    AdamState st = AdamState::make(p.shape, 0.001);
    const ParamVector g = scalar_params(-4.2);
    double prev = p.values[0];
    double last_step = 0.0;
    for (int i = 0; i < 10000; ++i) {
        adam_step(p, g, st);
        last_step = p.values[0] - prev;
        prev = p.values[0];
    }
    EXPECT_NEAR(last_step, 0.001, 0.001 * 0.01);  // within 1% of lr * sign
    EXPECT_EQ(st.step_count, 10000);
}

TEST(Adam, NonFiniteGradientNamesComponent) {
    ParamVector p({{"x", {3}}});
    AdamState st = AdamState::make(p.shape, 0.01);
    ParamVector g({{"x", {3}}});
    g.values[2] = std::nan("");
    try {
        adam_step(p, g, st);
        FAIL() << "expected a numeric error";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Numeric);
        EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
    }
}

TEST(Adam, ShapeMismatchRejected) {
    ParamVector p({{"x", {2}}});
    AdamState st = AdamState::make(p.shape, 0.01);
    ParamVector g({{"y", {2}}});
    EXPECT_THROW(adam_step(p, g, st), Error);
}

}  // namespace
