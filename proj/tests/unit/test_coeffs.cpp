#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cylheat/coeffs.hpp"
#include "cylheat/errors.hpp"

using namespace cylheat;

TEST(ModelParams, RejectsInvalidParameters) {
    EXPECT_THROW(ModelParams::make(0.0, 2, 0.25, 1, 1, 1, 1), DomainError);
    EXPECT_THROW(ModelParams::make(2.0, 2, 0.25, 1, 1, 1, 1), DomainError);
    EXPECT_THROW(ModelParams::make(1.0, 1, 0.25, 1, 1, 1, 1), DomainError);
    EXPECT_THROW(ModelParams::make(1.0, 2, 0.25, 2, 1, 1, 1), DomainError);
    EXPECT_THROW(ModelParams::make(1.0, 2, 0.25, 1, 1, 1, 0), DomainError);
}

TEST(ModelParams, ReducesExponentToAlphaOverFour) {
    const auto p = ModelParams::make(1.0, 2, 1.0, 1.0, 1.2, 0.1, 1.0);
    EXPECT_DOUBLE_EQ(p.beta, 0.25);
    EXPECT_DOUBLE_EQ(p.beta_declared, 1.0);
    // |a(x)-a(y)| <= 0.1|x-y| <= 0.1|x-y|^{1/4} for |x-y| <= 1 and <= b2-b1 beyond
    EXPECT_DOUBLE_EQ(p.b3, 0.2);
    const auto q = ModelParams::make(1.0, 2, 0.2, 1.0, 1.2, 0.1, 1.0);
    EXPECT_DOUBLE_EQ(q.beta, 0.2);
    EXPECT_DOUBLE_EQ(q.b3, 0.1);
}

TEST(ModelParams, GeneratorConstant) {
    EXPECT_NEAR(ModelParams::make(1.0, 2, 0.25, 1, 1, 1, 1).A_alpha, 1.0 / M_PI, 1e-15);
}

TEST(CoefficientField, SmoothPeriodicFormulaAndSigma) {
    const auto p = ModelParams::make(1.5, 2, 1.0, 1.0, 1.4, 0.2, 1.0);
    const auto f = CoefficientField::smooth_periodic(p, 2.0, {0.0, 0.5});
    const std::vector<double> x = {0.3, -1.1};
    EXPECT_NEAR(f.a(0, x), 1.0 + 0.4 * 0.5 * (1.0 + std::sin(0.6)), 1e-15);
    EXPECT_NEAR(f.a(1, x), 1.0 + 0.4 * 0.5 * (1.0 + std::sin(-2.2 + 0.5)), 1e-15);
    EXPECT_NEAR(f.sigma(1, x), std::pow(f.a(1, x), 1.5), 1e-15);
    EXPECT_TRUE(f.separable());
    EXPECT_FALSE(f.is_constant());
}

TEST(CoefficientField, ConstantIsDetected) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 2.0, 2.0, 1.0, 1.0);
    const auto f = CoefficientField::constant(p, 2.0);
    EXPECT_TRUE(f.is_constant());
    const std::vector<double> x = {5.0, -3.0};
    EXPECT_EQ(f.a(0, x), 2.0);
    EXPECT_EQ(f.a(1, x), 2.0);
}

TEST(CoefficientField, IndexIsZeroBased) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 1, 1, 1, 1);
    const auto f = CoefficientField::constant(p, 1.0);
    const std::vector<double> x = {0.0, 0.0};
    EXPECT_NO_THROW(f.a(1, x));
    EXPECT_THROW(f.a(2, x), DomainError);
    EXPECT_THROW(f.a(-1, x), DomainError);
}

TEST(CoefficientField, HolderKinkHasBreakpoints) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 1.0, 1.5, 0.5, 1.0);
    const auto f = CoefficientField::holder_kink(p, {0.5, -0.5});
    const auto b = f.breakpoints(0);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_DOUBLE_EQ(b[1], 0.5);
    EXPECT_DOUBLE_EQ(f.a_axis(0, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(f.a_axis(0, 10.0), 1.5);
    EXPECT_NEAR(f.a_axis(0, 0.5 + 0.0625), 1.0 + 0.5 * 0.5, 1e-15);
}

TEST(CoefficientField, ExpressionsAndSeparability) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 1.0, 2.0, 1.0, 1.0);
    const auto sep = CoefficientField::from_expressions(p, {"1.5 + 0.5*sin(x1)", "1.5 + 0.25*cos(x2)"});
    EXPECT_TRUE(sep.separable());
    const std::vector<double> x = {0.7, 0.2};
    EXPECT_NEAR(sep.a(0, x), 1.5 + 0.5 * std::sin(0.7), 1e-15);
    EXPECT_NEAR(sep.a(1, x), 1.5 + 0.25 * std::cos(0.2), 1e-15);
    const auto mixed = CoefficientField::from_expressions(p, {"1.5 + 0.25*sin(x1 + x2)", "1.5"});
    EXPECT_FALSE(mixed.separable());
    EXPECT_THROW(CoefficientField::from_expressions(p, {"1 + ", "1"}), ConfigError);
}

TEST(VerifyField, BuiltInFamiliesPass) {
    for (double alpha : {0.6, 1.0, 1.5}) {
        const auto p = ModelParams::make(alpha, 2, 1.0, 1.0, 1.2, 0.1, 1.0);
        EXPECT_TRUE(verify_field(CoefficientField::smooth_periodic(p, 1.0), 10000, 7).passed);
        const auto pc = ModelParams::make(alpha, 2, 0.25, 1.0, 1.0, 1.0, 1.0);
        EXPECT_TRUE(verify_field(CoefficientField::constant(pc, 1.0), 10000, 7).passed);
        const auto pk = ModelParams::make(alpha, 2, alpha / 4.0, 1.0, 1.5, 0.5, 1.0);
        EXPECT_TRUE(verify_field(CoefficientField::holder_kink(pk), 10000, 7).passed);
    }
}

TEST(VerifyField, DetectsBoundViolation) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 1.0, 1.2, 1.0, 1.0);
    const auto f = CoefficientField::from_expressions(p, {"1.5", "1.1"});
    const auto r = verify_field(f, 100, 1);
    EXPECT_FALSE(r.passed);
    EXPECT_NEAR(r.max_bound_violation, 0.3, 1e-12);
}

TEST(VerifyField, DetectsHolderViolation) {
    // slope 0.1 * 20 = 2 exceeds b3 = 0.1 at short range
    const auto p = ModelParams::make(1.0, 2, 1.0, 1.0, 1.2, 0.1, 1.0);
    const auto f = CoefficientField::smooth_periodic(p, 20.0);
    EXPECT_FALSE(verify_field(f, 10000, 3).passed);
}
