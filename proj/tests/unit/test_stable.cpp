#include <gtest/gtest.h>

#include <boost/math/distributions/cauchy.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <filesystem>
#include <vector>

#include "cylheat/errors.hpp"
#include "cylheat/stable.hpp"

using namespace cylheat;

namespace {

// g_1(x) = (1/pi) int_0^inf exp(-xi^alpha) cos(x xi) dxi, by Ooura's Fourier quadrature.
double fourier_density(double alpha, double x) {
    static boost::math::quadrature::ooura_fourier_cos<double> cos_integrator;
    auto f = [alpha](double xi) { return std::exp(-std::pow(xi, alpha)); };
    if (x == 0.0) return std::tgamma(1.0 + 1.0 / alpha) / M_PI;
    return cos_integrator.integrate(f, std::abs(x)).first / M_PI;
}

class StableAlpha : public ::testing::TestWithParam<double> {};

}  // namespace

TEST(Stable, CauchyMatchesClosedFormOnWideRange) {
    const auto ev = StableEvaluator::shared(1.0);
    for (double t : {0.25, 1.0, 4.0}) {
        boost::math::cauchy_distribution<double> c(0.0, t);
        for (int i = -500; i <= 500; ++i) {
            const double x = 50.0 * t * i / 500.0;
            ASSERT_NEAR(ev->density(t, x), boost::math::pdf(c, x), 1e-8) << "t=" << t << " x=" << x;
        }
    }
}

TEST(Stable, CauchyCdfMatchesArctan) {
    const auto ev = StableEvaluator::shared(1.0);
    for (double x : {-20.0, -1.0, 0.0, 0.3, 2.0, 80.0})
        EXPECT_NEAR(ev->cdf(1.0, x), 0.5 + std::atan(x) / M_PI, 1e-9);
}

TEST_P(StableAlpha, MatchesFourierInversion) {
    const double alpha = GetParam();
    const auto ev = StableEvaluator::shared(alpha);
    for (double x : {0.0, 0.1, 0.7, 1.5, 3.0, 8.0, 30.0}) {
        const double ref = fourier_density(alpha, x);
        EXPECT_NEAR(ev->unit_density(x), ref, 1e-9 * std::max(1.0, ref) + 1e-7 * ref) << "x=" << x;
    }
}

TEST_P(StableAlpha, IntegratesToOne) {
    const double alpha = GetParam();
    const auto ev = StableEvaluator::shared(alpha);
    boost::math::quadrature::tanh_sinh<double> ts;
    // substitute x = u / (1 - u^2) to map the whole line onto (-1, 1)
    auto f = [&](double u) {
        const double q = 1.0 - u * u;
        return ev->unit_density(u / q) * (1.0 + u * u) / (q * q);
    };
    EXPECT_NEAR(ts.integrate(f, -1.0, 1.0), 1.0, 1e-6);
}

TEST_P(StableAlpha, ScalingIdentity) {
    const double alpha = GetParam();
    const auto ev = StableEvaluator::shared(alpha);
    for (double t : {0.01, 0.3, 2.0, 17.0})
        for (double x : {-4.0, 0.0, 0.2, 9.0}) {
            const double s = std::pow(t, 1.0 / alpha);
            EXPECT_NEAR(ev->density(t, x), ev->unit_density(x / s) / s, 1e-10 * std::max(1.0, ev->density(t, x)));
        }
}

TEST_P(StableAlpha, DerivativesAgreeWithDifferences) {
    const double alpha = GetParam();
    const auto ev = StableEvaluator::shared(alpha);
    const double h = 1e-5;
    for (double x : {-2.5, -0.4, 0.3, 1.7, 60.0}) {
        const double fd = (ev->density(1.0, x + h) - ev->density(1.0, x - h)) / (2 * h);
        EXPECT_NEAR(ev->derivative(1.0, x), fd, 1e-7);
        const double ft = (ev->density(1.0 + h, x) - ev->density(1.0 - h, x)) / (2 * h);
        EXPECT_NEAR(ev->time_derivative(1.0, x), ft, 1e-7);
    }
}

TEST_P(StableAlpha, ContourQuadratureIsIndependentCheck) {
    const double alpha = GetParam();
    const auto ev = StableEvaluator::shared(alpha);
    for (double x : {0.2, 1.1, 4.0}) {
        const auto m = StableEvaluator::contour_moments(alpha, x);
        EXPECT_NEAR(m[0], fourier_density(alpha, x), 1e-9);
        EXPECT_NEAR(m[1], ev->derivative(1.0, x), 1e-8);
    }
}

TEST_P(StableAlpha, SampledIncrementsFollowTheCdf) {
    const double alpha = GetParam();
    const auto ev = StableEvaluator::shared(alpha);
    const int n = 20000;
    Rng rng(42);
    std::vector<double> v(n);
    for (double& x : v) x = sample_increment(alpha, 0.5, rng);
    std::sort(v.begin(), v.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double F = ev->cdf(0.5, v[i]);
        ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    // 1% critical value of the Kolmogorov distribution
    EXPECT_LT(ks * std::sqrt(static_cast<double>(n)), 1.63);
}

INSTANTIATE_TEST_SUITE_P(Alphas, StableAlpha, ::testing::Values(0.6, 1.0, 1.5));

TEST(Stable, GeneratorConstantAtOneIsOneOverPi) { EXPECT_NEAR(generator_constant(1.0), 1.0 / M_PI, 1e-15); }

TEST(Stable, RejectsOutOfDomain) {
    EXPECT_THROW(StableEvaluator(0.0), DomainError);
    EXPECT_THROW(StableEvaluator(2.0), DomainError);
    const auto ev = StableEvaluator::shared(1.0);
    EXPECT_THROW(ev->density(0.0, 1.0), DomainError);
    EXPECT_THROW(ev->density(-1.0, 1.0), DomainError);
}

TEST(Stable, SaveLoadRoundTrip) {
    const auto path = (std::filesystem::temp_directory_path() / "cylheat_stable_cache.bin").string();
    StableEvaluator ev(1.5);
    ev.save(path);
    const auto back = StableEvaluator::load(path);
    for (double x : {0.0, 0.4, 3.0, 70.0}) EXPECT_EQ(back->unit_density(x), ev.unit_density(x));
    std::filesystem::remove(path);
}
