#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <vector>

#include "cylheat/errors.hpp"
#include "cylheat/kernels.hpp"

using namespace cylheat;

TEST(Kernels, RhoDefinition) {
    const KernelProfile k{0.5, 0.25, 1.5};
    for (double t : {0.1, 1.0})
        for (double x : {0.0, 0.3, 4.0}) {
            const double ref = std::pow(t, 0.5 / 1.5) * std::min(std::pow(std::abs(x), 0.25), 1.0) *
                               std::pow(std::pow(t, 1.0 / 1.5) + std::abs(x), -2.5);
            EXPECT_NEAR(rho(k, t, x), ref, 1e-14 * std::max(1.0, ref));
        }
}

TEST(Kernels, FrozenKernelIsScaledProduct) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 1.0, 2.0, 1.0, 1.0);
    const auto f = CoefficientField::from_expressions(p, {"1.5", "2"});
    const auto ev = StableEvaluator::shared(1.0);
    const std::vector<double> x = {0.4, -1.0}, y = {7.0, 7.0};
    // Cauchy: g_t(u / a) / a = t a / (pi (t^2 a^2 + u^2))
    auto cauchy = [](double s, double u) { return s / (M_PI * (s * s + u * u)); };
    EXPECT_NEAR(frozen_kernel(f, *ev, 0.5, x, y), cauchy(0.75, 0.4) * cauchy(1.0, -1.0), 1e-12);
}

TEST(Kernels, SecondDifferenceOfQuadratic) {
    const PointFunction f = [](std::span<const double> x) { return x[0] * x[0] + 3.0 * x[1]; };
    const std::vector<double> x = {0.5, 2.0};
    EXPECT_NEAR(second_difference(f, x, 0.7, 0), 2.0 * 0.49, 1e-14);
    EXPECT_NEAR(second_difference(f, x, 0.7, 1), 0.0, 1e-14);
}

TEST(Kernels, BetaIntegralMatchesBoostBeta) {
    for (double g : {0.3, 0.75, 1.0})
        for (double th : {1.0, 2.5, 6.0}) {
            const auto b = beta_integral_bound(g, th, 2.0);
            const double ref = std::pow(2.0, g + th - 1.0) * boost::math::beta(g, th);
            EXPECT_NEAR(b.closed_form, ref, 1e-12 * ref);
            EXPECT_NEAR(b.numeric, ref, 1e-7 * ref);
        }
}

TEST(Kernels, ConvolutionBoundsHaveFiniteConstants) {
    const ConvolutionExponents e{0.5, 0.25, 0.5, 0.25};
    const std::vector<ConvolutionProbe> probes = {{1.0, 0.5, 0.0}, {0.5, 0.25, 1.0}, {1.0, 0.5, 4.0}};
    for (auto which : {ConvolutionCase::PointwiseIntegral, ConvolutionCase::SpaceConvolution}) {
        const auto c = fit_convolution_constant(which, 1.0, e, probes);
        EXPECT_TRUE(c.finite);
        EXPECT_GT(c.fitted_C, 0.0);
        EXPECT_LT(c.refinement_delta, 0.25);
    }
}
