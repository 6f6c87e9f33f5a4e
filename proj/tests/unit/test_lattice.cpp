#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cylheat/lattice.hpp"

using namespace cylheat;

TEST(Lattice, InterpolantIsCardinalAtNodes) {
    Lattice1D lat({41, 0.5, 200.0}, 2.0);
    std::vector<double> w(lat.size());
    for (int j : {0, 7, 20, 33, 40}) {
        lat.weights_at(lat.w(j), w);
        for (int i = 0; i < lat.size(); ++i) EXPECT_NEAR(w[i], i == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Lattice, NodesAreSymmetricAndGraded) {
    Lattice1D lat({41, 0.5, 200.0}, 2.0);
    EXPECT_NEAR(lat.w(20), 0.0, 1e-15);
    EXPECT_NEAR(lat.edge(), 200.0, 1e-9);
    for (int j = 0; j < 20; ++j) EXPECT_NEAR(lat.w(j), -lat.w(40 - j), 1e-12);
    EXPECT_LT(lat.w(21) - lat.w(20), lat.w(40) - lat.w(39));
}

// The Cauchy profile decays with the lattice tail power 2, so the spline
// plus analytic tail integrates it over the whole line.
TEST(Lattice, IntegralWeightsOfCauchyProfile) {
    Lattice1D lat({41, 0.5, 200.0}, 2.0);
    std::vector<double> w(lat.size());
    lat.integral_weights(-INFINITY, INFINITY, w);
    double s = 0.0;
    for (int j = 0; j < lat.size(); ++j) s += w[j] / (1.0 + lat.w(j) * lat.w(j));
    EXPECT_NEAR(s, M_PI, 2e-3);
    lat.integral_weights(-1.0, 1.0, w);
    s = 0.0;
    for (int j = 0; j < lat.size(); ++j) s += w[j] / (1.0 + lat.w(j) * lat.w(j));
    EXPECT_NEAR(s, M_PI / 2.0, 2e-3);
}

TEST(Tensor, MultiModeProductMatchesLoops) {
    const Shape sh = {3, 4};
    std::vector<double> T(12);
    for (int i = 0; i < 12; ++i) T[i] = 0.5 * i - 2.0;
    Eigen::MatrixXd A(2, 3), B(5, 4);
    A << 1, 2, 3, -1, 0, 4;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) B(i, j) = std::sin(i + 2.0 * j);
    Shape out_shape;
    const auto out = multi_mode_product(T, sh, {&A, &B}, &out_shape);
    ASSERT_EQ(out_shape, (Shape{2, 5}));
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 5; ++b) {
            double ref = 0.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 4; ++j) ref += A(a, i) * B(b, j) * T[i * 4 + j];
            EXPECT_NEAR(out[a * 5 + b], ref, 1e-12);
        }
    const std::vector<double> u = {1, 0, 2}, v = {0.5, 0.5, 0.5, 0.5};
    double ref = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) ref += u[i] * v[j] * T[i * 4 + j];
    EXPECT_NEAR(contract_vectors(T, sh, {u, v}), ref, 1e-12);
}

namespace {

struct CauchyKernel {
    double eps;
    struct Ctx {};
    Ctx prepare(double) const { return {}; }
    void eval(int, double o, const Ctx&, double* out) const { out[0] = eps / (M_PI * (eps * eps + o * o)); }
};

// rows . F for F the Cauchy density of scale s centred at c, sampled on the lattice
std::vector<double> convolve_cauchy(double c, double s, double eps, const std::vector<double>& rows, int nodes = 41) {
    Lattice1D lat(LatticeSpec{nodes, 0.5, 200.0}, 2.0);
    const AxisFrame frame{c, s};
    std::array<Eigen::MatrixXd, 1> out;
    product_rows<1>(lat, frame, rows, eps, {}, CauchyKernel{eps}, ProductRule{}, out);
    Eigen::VectorXd f(lat.size());
    for (int j = 0; j < lat.size(); ++j) f[j] = 1.0 / (M_PI * s * (1.0 + lat.w(j) * lat.w(j)));
    const Eigen::VectorXd r = out[0] * f;
    return {r.data(), r.data() + r.size()};
}

double cauchy(double scale, double x) { return scale / (M_PI * (scale * scale + x * x)); }

}  // namespace

TEST(ProductRows, CauchyConvolutionAddsScales) {
    const std::vector<double> rows = {-3.0, -0.4, 0.0, 0.25, 1.0, 7.0, 40.0};
    double prev = 1.0;
    for (int nodes : {41, 81, 161}) {
        const auto v = convolve_cauchy(0.5, 0.3, 0.2, rows, nodes);
        double worst = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const double ref = cauchy(0.5, rows[r] - 0.5);
            worst = std::max(worst, std::abs(v[r] - ref) / ref);
        }
        EXPECT_LT(worst, nodes == 41 ? 2e-3 : prev / 4) << nodes;
        prev = worst;
    }
}

TEST(ProductRows, UnresolvableLatticeActsAsPointMass) {
    // the lattice spans less than the rounding unit of its centre
    const std::vector<double> rows = {1.0 - 2e-9, 1.0, 1.0 + 5e-10};
    const auto v = convolve_cauchy(1.0, 1e-19, 1e-9, rows);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ASSERT_TRUE(std::isfinite(v[r]));
        const double ref = cauchy(1e-9, rows[r] - 1.0);
        EXPECT_NEAR(v[r], ref, 1e-3 * ref) << r;
    }
}
