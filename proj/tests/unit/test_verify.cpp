#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "cylheat/errors.hpp"
#include "cylheat/verify.hpp"

using namespace cylheat;

namespace {

ParametrixTable constant_table(double alpha, double a, int nodes = 41) {
    const auto p = ModelParams::make(alpha, 2, alpha / 4, a, a, 1.0, 1.0);
    QuadratureScheme sc;
    sc.space.nodes = nodes;
    TableLayout layout;
    layout.backward_points = {{0.0, 0.0}};
    layout.backward_times = {0.25, 0.5, 1.0};
    layout.forward_points = {{0.3, -0.2}};
    layout.forward_times = {0.5};
    layout.series.time_derivative = true;
    return build_table(std::make_shared<ParametrixContext>(CoefficientField::constant(p, a), sc), layout);
}

double cauchy(double t, double u) { return t / (M_PI * (t * t + u * u)); }

class ConstantUnit : public ::testing::Test {
protected:
    static void SetUpTestSuite() { tab_ = std::make_unique<ParametrixTable>(constant_table(1.0, 1.0)); }
    static void TearDownTestSuite() { tab_.reset(); }
    static std::unique_ptr<ParametrixTable> tab_;
};
std::unique_ptr<ParametrixTable> ConstantUnit::tab_;

}  // namespace

TEST(RefinementDelta, ResidualChecksUseThresholdScale) {
    EXPECT_DOUBLE_EQ(refinement_delta(1e-6, 2e-6, 0.05, false), 1e-6 / 0.05);
    EXPECT_DOUBLE_EQ(refinement_delta(4.0, 5.0, 10.0, false), 0.1);
    EXPECT_DOUBLE_EQ(refinement_delta(0.02, 0.03, 1e-3, true), 0.5);
    EXPECT_TRUE(std::isinf(refinement_delta(1.0, std::numeric_limits<double>::infinity(), 1.0, false)));
}

TEST_F(ConstantUnit, ComparabilityIsExactlyOne) {
    const auto r = check_comparability(*tab_, nullptr);
    EXPECT_NEAR(r.statistic, 1.0, 1e-8);
    EXPECT_TRUE(r.passed);
}

TEST(Comparability, ScaledCoefficientGivesKnownRatio) {
    // g_t / ((1/2) g_t(./2)) per axis peaks at 2 on the diagonal
    const auto tab = constant_table(1.0, 2.0);
    const auto r = check_comparability(tab, nullptr);
    EXPECT_NEAR(r.statistic, 4.0, 1e-8);
}

TEST_F(ConstantUnit, PositivityHolds) {
    const auto r = check_positivity(*tab_, nullptr);
    EXPECT_TRUE(r.passed);
    EXPECT_GT(r.statistic, 0.0);
}

TEST_F(ConstantUnit, NormalizationIsTight) {
    const auto r = check_normalization(*tab_, nullptr);
    EXPECT_LE(r.statistic, 1e-6);
    EXPECT_TRUE(r.passed);
}

TEST_F(ConstantUnit, FiniteBoxLosesTheKnownTailMass) {
    const auto& f = tab_->forward[0];
    const double t = 0.5, h = 2.0;
    const std::vector<double> box = {h, h};
    const double inside = 2.0 / M_PI * std::atan(h / t);
    EXPECT_NEAR(normalization_residual(f, t, box), 1.0 - inside * inside, 1e-6);
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> whole = {inf, inf};
    EXPECT_GT(normalization_residual(f, t, box), 100 * normalization_residual(f, t, whole));
}

TEST_F(ConstantUnit, ChapmanKolmogorovReproducesSemigroup) {
    const auto& f = tab_->forward[0];
    const auto& b = tab_->backward[0];
    const double v = chapman_kolmogorov_integral(f, 0.5, b, 0.5);
    const double ref = cauchy(1.0, 0.3) * cauchy(1.0, -0.2);
    EXPECT_NEAR(v / ref, 1.0, 1e-4);
    const auto r = check_chapman_kolmogorov(*tab_, nullptr);
    EXPECT_LE(r.statistic, 1e-3);
}

TEST_F(ConstantUnit, ChapmanKolmogorovRejectsMismatchedLattices) {
    const auto other = constant_table(1.0, 1.0, 31);
    EXPECT_THROW(chapman_kolmogorov_integral(tab_->forward[0], 0.5, other.backward[0], 0.5), PreconditionError);
}

TEST_F(ConstantUnit, ParabolicProbeBalances) {
    for (const auto& x : std::vector<std::vector<double>>{{0.0, 0.0}, {0.5, -0.3}, {2.0, 1.5}}) {
        const auto pr = parabolic_probe(tab_->backward[0], 0.5, x);
        EXPECT_NEAR(pr.dt, pr.generator, 1e-3 * std::abs(pr.dt) + 1e-6);
    }
    EXPECT_LE(check_parabolic(*tab_, nullptr).statistic, 1e-3);
}

TEST_F(ConstantUnit, HolderRejectsExponentOutsideRange) {
    EXPECT_THROW(check_holder(*tab_, nullptr, 1.0), DomainError);
    EXPECT_THROW(check_holder(*tab_, nullptr, 0.0), DomainError);
    EXPECT_TRUE(check_holder(*tab_, nullptr, 0.5).passed);
}

TEST_F(ConstantUnit, GradientChecksNeedAlphaAboveOne) {
    EXPECT_THROW(check_gradient_bound(*tab_, nullptr), UnsupportedError);
    EXPECT_THROW(check_gradient_fd(*tab_, nullptr), UnsupportedError);
}

TEST_F(ConstantUnit, NearDiagonalMinimumSitsAtTheCorner) {
    // min over |x-y|_inf <= t of t^2 g_t(x1) g_t(x2) is (1 / (2 pi))^2
    const auto r = check_near_diagonal(*tab_, nullptr);
    EXPECT_TRUE(r.lower_bound);
    EXPECT_NEAR(r.statistic, 1.0 / (4 * M_PI * M_PI), 1e-8);
}

TEST(Gradient, ConstantFieldMatchesStableDerivative) {
    const auto tab = constant_table(1.5, 1.0);
    const auto& sl = tab.backward[0];
    const auto& ev = *tab.ctx->ev;
    const std::vector<double> x = {0.7, -0.4};
    const auto g = pA_gradient(sl, 0.5, x);
    EXPECT_NEAR(g[0], ev.derivative(0.5, 0.7) * ev.density(0.5, -0.4), 1e-7);
    EXPECT_NEAR(g[1], ev.density(0.5, 0.7) * ev.derivative(0.5, -0.4), 1e-7);
    EXPECT_TRUE(check_gradient_fd(tab, nullptr).passed);
    EXPECT_TRUE(check_gradient_bound(tab, nullptr).passed);
}

TEST(RunChecks, SkipsGradientAtAlphaOne) {
    const auto tab = constant_table(1.0, 1.0);
    for (const auto& r : run_checks(tab, nullptr)) EXPECT_EQ(r.check_id.find("gradient"), std::string::npos);
}
