#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "cylheat/errors.hpp"
#include "cylheat/parametrix.hpp"

using namespace cylheat;

namespace {

std::shared_ptr<const ParametrixContext> smooth_context(double alpha) {
    const auto p = ModelParams::make(alpha, 2, 1.0, 1.0, 1.2, 0.1, 1.0);
    return std::make_shared<ParametrixContext>(CoefficientField::smooth_periodic(p, 1.0));
}

class SmoothSlice : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        ctx_ = smooth_context(1.0);
        SeriesOptions opt;
        opt.time_derivative = true;
        slice_ = std::make_unique<BackwardSlice>(ctx_, std::vector<double>{0.3, -0.2}, std::vector<double>{0.5, 1.0}, opt);
    }
    static void TearDownTestSuite() {
        slice_.reset();
        ctx_.reset();
    }
    static std::shared_ptr<const ParametrixContext> ctx_;
    static std::unique_ptr<BackwardSlice> slice_;
};

std::shared_ptr<const ParametrixContext> SmoothSlice::ctx_;
std::unique_ptr<BackwardSlice> SmoothSlice::slice_;

}  // namespace

TEST(Q0, ClosedFormMatchesJumpIntegral) {
    for (double alpha : {0.6, 1.0, 1.5}) {
        const auto ctx = smooth_context(alpha);
        const std::vector<double> y = {0.3, -0.2};
        for (const auto& x : std::vector<std::vector<double>>{{0.8, 0.1}, {-1.0, 2.0}, {0.3, -0.2}}) {
            for (double t : {0.1, 0.5}) {
                const double a = q0(*ctx, t, x, y);
                const double b = q0_quadrature(*ctx, t, x, y).value;
                // the per-axis terms can cancel, so measure against their size
                double scale = 0.0;
                for (int k = 0; k < 2; ++k) {
                    const int m = 1 - k;
                    const double sk = ctx->field.sigma_axis(k, y[k]), sm = ctx->field.sigma_axis(m, y[m]);
                    scale += std::abs(ctx->field.sigma_axis(k, x[k]) - sk) *
                             std::abs(ctx->ev->time_derivative(t * sk, x[k] - y[k])) *
                             ctx->ev->density(t * sm, x[m] - y[m]);
                }
                EXPECT_NEAR(a, b, 1e-6 * scale + 1e-14) << "alpha " << alpha;
            }
        }
    }
}

TEST(Q0, VanishesForConstantCoefficients) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 2.0, 2.0, 1.0, 1.0);
    ParametrixContext ctx(CoefficientField::constant(p, 2.0));
    const std::vector<double> x = {0.4, 1.0}, y = {0.0, 0.0};
    EXPECT_EQ(q0(ctx, 0.5, x, y), 0.0);
}

TEST(BackwardSliceTest, ConstantCoefficientsReproduceScaledProduct) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 2.0, 2.0, 1.0, 1.0);
    auto ctx = std::make_shared<ParametrixContext>(CoefficientField::constant(p, 2.0));
    const std::vector<double> y = {0.5, -0.5};
    BackwardSlice s(ctx, y, {0.5, 1.0});
    EXPECT_EQ(s.summary().n_used, 1);
    for (double t : {0.5, 1.0}) {
        const auto q = s.q(t);
        for (double v : q) ASSERT_LE(std::abs(v), 1e-10);
        const auto pa = s.pA(t);
        const int n = s.lattice().size();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double u = s.node(t, 0, i) - y[0], v = s.node(t, 1, j) - y[1];
                // (1/a) g_t(u / a) for Cauchy with a = 2
                const double ref = (2.0 * t / (M_PI * (4.0 * t * t + u * u))) * (2.0 * t / (M_PI * (4.0 * t * t + v * v)));
                ASSERT_NEAR(pa[i * n + j], ref, 1e-8);
            }
    }
}

TEST_F(SmoothSlice, SeriesDecreasesAndTerminatesEarly) {
    const auto& s = slice_->summary();
    ASSERT_GE(s.term_norms.size(), 5u);
    for (std::size_t n = 2; n < s.term_norms.size(); ++n) EXPECT_LT(s.term_norms[n], s.term_norms[n - 1]);
    EXPECT_LE(s.n_used, 4);
    double total = 0.0;
    for (double c : s.term_norms) total += c;
    EXPECT_LE(s.remainder, 1e-4 * total);
    EXPECT_FALSE(s.degraded);
}

// Each coordinate of a separable system moves on its own, so p^A factorizes.
TEST_F(SmoothSlice, DensityFactorizesAcrossCoordinates) {
    const double t = 1.0;
    const std::vector<double> a = {-0.5, 0.9}, b = {1.4, -1.1};
    const std::vector<std::vector<double>> pts = {{a[0], b[0]}, {a[1], b[1]}};
    const auto v = slice_->evaluate(t, pts);  // (a0,a1) (a0,b1) (b0,a1) (b0,b1)
    EXPECT_NEAR(v[0] * v[3] / (v[1] * v[2]), 1.0, 1e-3);
}

TEST_F(SmoothSlice, ForwardRouteAgreesWithBackward) {
    const std::vector<double> x = {1.1, 0.4};
    ForwardSlice f(ctx_, x, {1.0});
    const double back = slice_->value(1.0, x);
    EXPECT_NEAR(f.value(1.0, slice_->y()), back, 2e-3 * back);
}

TEST_F(SmoothSlice, PointValueCarriesErrorEstimate) {
    const std::vector<double> x = {0.8, 0.1};
    const auto pv = assemble_pA(*slice_, 1.0, x);
    EXPECT_EQ(pv.value, slice_->value(1.0, x));
    EXPECT_GT(pv.error_estimate, 0.0);
    EXPECT_LT(pv.error_estimate, 0.01 * pv.value);
}

TEST_F(SmoothSlice, UntabulatedTimeIsPreconditionError) {
    EXPECT_THROW(slice_->pA(0.7), PreconditionError);
    EXPECT_THROW(slice_->time_index(0.25), PreconditionError);
}

TEST_F(SmoothSlice, GradientNeedsAlphaAboveOne) {
    const std::vector<double> x = {0.0, 0.0};
    EXPECT_THROW(pA_gradient(*slice_, 1.0, x), UnsupportedError);
}

TEST(BackwardSliceTest, GradientMatchesDifferencesForAlphaOneAndAHalf) {
    const auto ctx = smooth_context(1.5);
    BackwardSlice s(ctx, {0.0, 0.0}, {1.0});
    const std::vector<double> x = {0.7, -0.4};
    const auto g = pA_gradient(s, 1.0, x);
    const double h = 1e-4;
    for (int k = 0; k < 2; ++k) {
        auto xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        EXPECT_NEAR(g[k], (s.value(1.0, xp) - s.value(1.0, xm)) / (2 * h), 1e-3 * std::abs(g[k]) + 1e-8);
    }
}

TEST(BackwardSliceTest, PicardIterateAddsOneTerm) {
    const auto ctx = smooth_context(1.0);
    BackwardSlice s(ctx, {0.0, 0.0}, {0.5}, SeriesOptions{2, 1e-4, false});
    const auto next = picard_iterate(s);
    EXPECT_EQ(next.data().n_max, 3);
    EXPECT_EQ(next.summary().term_norms.size(), s.summary().term_norms.size() + 1);
    EXPECT_NEAR(next.summary().term_norms[1], s.summary().term_norms[1], 1e-12);
}

TEST(BackwardSliceTest, QSumValidatesCap) {
    const auto ctx = smooth_context(1.0);
    const std::vector<double> y = {0.0, 0.0};
    EXPECT_THROW(q_sum(ctx, y, {0.5}, 0, 1e-4), PreconditionError);
}

TEST(Context, RejectsNonSeparableField) {
    const auto p = ModelParams::make(1.0, 2, 0.25, 1.0, 2.0, 1.0, 1.0);
    const auto f = CoefficientField::from_expressions(p, {"1.5 + 0.25*sin(x1 + x2)", "1.5"});
    EXPECT_THROW(ParametrixContext ctx(f), UnsupportedError);
}

TEST(Envelope, PositiveAndDecaying) {
    const std::vector<double> near = {0.1, 0.0}, far = {10.0, 0.0};
    const double a = q_envelope(1.0, 0.25, 0.5, near), b = q_envelope(1.0, 0.25, 0.5, far);
    EXPECT_GT(a, 0.0);
    EXPECT_GT(b, 0.0);
    EXPECT_LT(b, a);
}
