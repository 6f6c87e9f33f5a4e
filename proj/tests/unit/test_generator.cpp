#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cylheat/errors.hpp"
#include "cylheat/generator.hpp"
#include "cylheat/stable.hpp"

using namespace cylheat;

namespace {

class GeneratorAlpha : public ::testing::TestWithParam<double> {};

}  // namespace

// cos(w . x) is an eigenfunction: L cos = -(sum_k sigma_k |w_k|^alpha) cos.
TEST_P(GeneratorAlpha, CosineEigenfunction) {
    const double alpha = GetParam();
    const std::vector<double> w = {0.8, 1.3}, sigma = {1.0, 1.7};
    PointLineFunction f(2, [&](std::span<const double> x) { return std::cos(w[0] * x[0]) * std::cos(w[1] * x[1]); });
    const std::vector<double> x = {0.2, -0.4};
    const auto r = apply_frozen_generator(f, sigma, x, alpha, 1.0);
    const double lam = sigma[0] * std::pow(w[0], alpha) + sigma[1] * std::pow(w[1], alpha);
    const double ref = -lam * std::cos(w[0] * x[0]) * std::cos(w[1] * x[1]);
    EXPECT_NEAR(r.value, ref, 1e-4 * std::abs(ref));
}

// For the product kernel, the frozen generator equals the time derivative.
TEST_P(GeneratorAlpha, HeatKernelSatisfiesForwardEquation) {
    const double alpha = GetParam();
    const auto ev = StableEvaluator::shared(alpha);
    const std::vector<double> sigma = {1.0, 1.44};
    const double t = 0.7;
    PointLineFunction f(
        2, [&](std::span<const double> x) { return ev->density(t * sigma[0], x[0]) * ev->density(t * sigma[1], x[1]); },
        TailModel::PowerLaw, 1.0 + alpha);
    for (const auto& x : std::vector<std::vector<double>>{{0.0, 0.0}, {0.5, -1.0}, {3.0, 2.0}}) {
        const double dt = sigma[0] * ev->time_derivative(t * sigma[0], x[0]) * ev->density(t * sigma[1], x[1]) +
                          sigma[1] * ev->density(t * sigma[0], x[0]) * ev->time_derivative(t * sigma[1], x[1]);
        const auto r = apply_frozen_generator(f, sigma, x, alpha, std::pow(t, 1.0 / alpha));
        EXPECT_NEAR(r.value, dt, 1e-6 * std::abs(dt) + 1e-10) << x[0] << "," << x[1];
        EXPECT_FALSE(r.flagged);
    }
}

INSTANTIATE_TEST_SUITE_P(Alphas, GeneratorAlpha, ::testing::Values(0.6, 1.0, 1.5));

TEST(Generator, ImageIsLinear) {
    const auto ev = StableEvaluator::shared(1.2);
    auto g = [ev](double t) {
        return [ev, t](std::span<const double> x) { return ev->density(t, x[0]) * ev->density(t, x[1]); };
    };
    const auto fa = g(0.5), fb = g(2.0);
    PointLineFunction a(2, fa, TailModel::PowerLaw, 2.2), b(2, fb, TailModel::PowerLaw, 2.2);
    PointLineFunction ab(2, [&](std::span<const double> x) { return 2.0 * fa(x) - 3.0 * fb(x); }, TailModel::PowerLaw,
                         2.2);
    const std::vector<double> sigma = {1.1, 0.9}, x = {0.3, -0.6};
    const double la = apply_frozen_generator(a, sigma, x, 1.2, 1.0).value;
    const double lb = apply_frozen_generator(b, sigma, x, 1.2, 1.0).value;
    const double lab = apply_frozen_generator(ab, sigma, x, 1.2, 1.0).value;
    EXPECT_NEAR(lab, 2.0 * la - 3.0 * lb, 1e-7 * (std::abs(la) + std::abs(lb)));
}

TEST(Generator, RejectsBadArguments) {
    PointLineFunction f(2, [](std::span<const double>) { return 0.0; });
    const std::vector<double> sigma = {1.0, 1.0}, x = {0.0, 0.0};
    EXPECT_THROW(apply_frozen_generator(f, sigma, x, 2.0, 1.0), DomainError);
    EXPECT_THROW(apply_frozen_generator(f, sigma, x, 1.0, 0.0), DomainError);
    const std::vector<double> x3 = {0.0, 0.0, 0.0};
    EXPECT_THROW(apply_frozen_generator(f, sigma, x3, 1.0, 1.0), DomainError);
}
