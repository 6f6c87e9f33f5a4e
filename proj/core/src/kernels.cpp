#include "cylheat/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "cylheat/errors.hpp"
#include "cylheat/quadrature.hpp"

namespace cylheat {

double rho(const KernelProfile& p, double t, double x) {
    if (!(t > 0.0)) throw DomainError("rho needs t > 0");
    const double ax = std::abs(x);
    const double cut = p.beta_exp == 0.0 ? 1.0 : std::min(1.0, std::pow(ax, p.beta_exp));
    return std::pow(t, p.gamma / p.alpha) * cut * std::pow(std::pow(t, 1.0 / p.alpha) + ax, -1.0 - p.alpha);
}

double frozen_kernel(const CoefficientField& field, const StableEvaluator& ev, double t, std::span<const double> x,
                     std::span<const double> y) {
    double v = 1.0;
    for (int i = 0; i < field.dim(); ++i) {
        const double a = field.a(i, y);
        v *= ev.density(t, x[i] / a) / a;
    }
    return v;
}

std::vector<double> frozen_kernel_gradient(const CoefficientField& field, const StableEvaluator& ev, double t,
                                           std::span<const double> x, std::span<const double> y) {
    const int d = field.dim();
    std::vector<double> val(d), der(d), out(d);
    for (int i = 0; i < d; ++i) {
        const double a = field.a(i, y);
        val[i] = ev.density(t, x[i] / a) / a;
        der[i] = ev.derivative(t, x[i] / a) / (a * a);
    }
    for (int i = 0; i < d; ++i) {
        double v = der[i];
        for (int j = 0; j < d; ++j)
            if (j != i) v *= val[j];
        out[i] = v;
    }
    return out;
}

double second_difference(const PointFunction& f, std::span<const double> x, double z, int k) {
    std::vector<double> p(x.begin(), x.end());
    if (k < 0 || k >= static_cast<int>(p.size())) throw DomainError("coordinate index out of range");
    const double f0 = f(p);
    p[k] = x[k] + z;
    const double fp = f(p);
    p[k] = x[k] - z;
    const double fm = f(p);
    return fp + fm - 2.0 * f0;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

struct Tolerances {
    double rel;
    int ts_level;
};

Tolerances tolerances(int resolution) {
    return {std::max(1e-13, 1e-7 * std::pow(1e-2, resolution)), 8 + 2 * resolution};
}

// integral over the real line of rho_g^b(t, z), analytic beyond |z| = R
double pointwise_integral(double alpha, double g, double b, double t, double rel) {
    const KernelProfile p{g, b, alpha};
    const double scale = std::pow(t, 1.0 / alpha);
    const double R = std::max(1.0, 1e3 * scale);
    auto f = [&](double z) { return rho(p, t, z); };
    std::vector<double> br = {0.0, std::min(1.0, scale), 1.0, scale, 10.0 * scale};
    auto r = quad::gauss_kronrod_pieces(f, 0.0, R, br, 0.0, rel);
    // beyond R >= 1 the cut-off equals 1: t^{g/a} (t^{1/a} + z)^{-1-a}
    const double tail = std::pow(t, g / alpha) * std::pow(scale + R, -alpha) / alpha;
    return 2.0 * (r.value + tail);
}

double space_convolution(double alpha, const ConvolutionExponents& e, double t, double s, double x, double rel,
                         bool* converged) {
    const KernelProfile p1{e.gamma1, e.beta1, alpha}, p2{e.gamma2, e.beta2, alpha};
    const double tau = t - s;
    const double s1 = std::pow(tau, 1.0 / alpha), s2 = std::pow(s, 1.0 / alpha);
    auto f = [&](double z) { return rho(p1, tau, x - z) * rho(p2, s, z); };
    const double big = std::max({s1, s2, 1.0});
    const double R = std::abs(x) + 1e3 * big;
    std::vector<double> br = {0.0, x, -1.0, 1.0, x - 1.0, x + 1.0, 0.5 * x};
    for (double sc : {s1, s2}) {
        for (double m : {1.0, 10.0}) {
            br.push_back(m * sc);
            br.push_back(-m * sc);
            br.push_back(x + m * sc);
            br.push_back(x - m * sc);
        }
    }
    auto r = quad::gauss_kronrod_pieces(f, -R, R, br, 0.0, rel);
    if (converged) *converged = r.converged;
    // both factors ~ c |z|^{-1-alpha} beyond R
    const double c = std::pow(tau, e.gamma1 / alpha) * std::pow(s, e.gamma2 / alpha);
    double tail = 0.0;
    for (double sign : {-1.0, 1.0}) {
        const double z = sign * R;
        const double exact_at_edge = f(z);
        const double model_at_edge = c * std::pow(R, -2.0 - 2.0 * alpha);
        tail += (model_at_edge > 0 ? exact_at_edge / model_at_edge : 1.0) * c * std::pow(R, -1.0 - 2.0 * alpha) /
                (1.0 + 2.0 * alpha);
    }
    return r.value + tail;
}

double rho0(double alpha, double gamma, double beta, double t, double x) {
    return rho(KernelProfile{gamma, beta, alpha}, t, x);
}

}  // namespace

ConvolutionBound conv_bound_check(ConvolutionCase which, double alpha, const ConvolutionExponents& e,
                                  const ConvolutionProbe& probe, int resolution) {
    require(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0, 2)");
    require(probe.t > 0.0, "probe time must be positive");
    const auto tol = tolerances(resolution);
    ConvolutionBound out;
    const double a = alpha, t = probe.t, x = probe.x;
    switch (which) {
        case ConvolutionCase::PointwiseIntegral: {
            require(e.beta1 >= 0.0 && e.beta1 <= a / 2.0, "pointwise integral needs beta1 in [0, alpha/2]");
            out.lhs = pointwise_integral(a, e.gamma1, e.beta1, t, tol.rel);
            out.rhs_shape = std::pow(t, (e.gamma1 + e.beta1 - a) / a);
            break;
        }
        case ConvolutionCase::SpaceConvolution: {
            require(e.beta1 >= 0.0 && e.beta1 <= a / 4.0 && e.beta2 >= 0.0 && e.beta2 <= a / 4.0,
                    "space convolution needs beta1, beta2 in [0, alpha/4]");
            const double s = probe.s;
            require(s > 0.0 && s < t, "space convolution needs 0 < s < t");
            const double u = t - s, b1 = e.beta1, b2 = e.beta2, g1 = e.gamma1, g2 = e.gamma2;
            out.lhs = space_convolution(a, e, t, s, x, tol.rel, &out.converged);
            out.rhs_shape =
                (std::pow(u, (g1 + b1 + b2 - a) / a) * std::pow(s, g2 / a) +
                 std::pow(u, g1 / a) * std::pow(s, (g2 + b1 + b2 - a) / a)) * rho0(a, 0, 0, t, x) +
                std::pow(u, (g1 + b1 - a) / a) * std::pow(s, g2 / a) * rho0(a, 0, b2, t, x) +
                std::pow(u, g1 / a) * std::pow(s, (g2 + b2 - a) / a) * rho0(a, 0, b1, t, x);
            break;
        }
        case ConvolutionCase::SpaceTimeConvolution: {
            require(e.beta1 >= 0.0 && e.beta1 <= a / 4.0 && e.beta2 >= 0.0 && e.beta2 <= a / 4.0,
                    "space-time convolution needs beta1, beta2 in [0, alpha/4]");
            require(e.gamma1 + e.beta1 > 0.0 && e.gamma2 + e.beta2 > 0.0,
                    "space-time convolution needs gamma_i + beta_i > 0");
            bool ok = true;
            auto inner = [&](double s) {
                bool c = true;
                const double v = space_convolution(a, e, t, s, x, tol.rel, &c);
                ok = ok && c;
                return v;
            };
            // split at t/2 so each half has a single singular endpoint
            auto r1 = quad::tanh_sinh(inner, 0.0, 0.5 * t, 10 * tol.rel, tol.ts_level);
            auto r2 = quad::tanh_sinh(inner, 0.5 * t, t, 10 * tol.rel, tol.ts_level);
            out.lhs = r1.value + r2.value;
            out.converged = ok && r1.converged && r2.converged;
            const double g = e.gamma1 + e.gamma2, b1 = e.beta1, b2 = e.beta2;
            const double B = std::exp(std::lgamma((e.gamma1 + b1) / a) + std::lgamma((e.gamma2 + b2) / a) -
                                      std::lgamma((e.gamma1 + b1 + e.gamma2 + b2) / a));
            out.rhs_shape = B * (rho0(a, g + b1 + b2, 0, t, x) + rho0(a, g + b2, b1, t, x) + rho0(a, g + b1, b2, t, x));
            break;
        }
    }
    out.ratio = out.lhs / out.rhs_shape;
    return out;
}

FittedConstant fit_convolution_constant(ConvolutionCase which, double alpha, const ConvolutionExponents& e,
                                        std::span<const ConvolutionProbe> probes) {
    FittedConstant fc;
    for (const auto& p : probes) {
        fc.fitted_C = std::max(fc.fitted_C, conv_bound_check(which, alpha, e, p, 0).ratio);
        fc.refined_C = std::max(fc.refined_C, conv_bound_check(which, alpha, e, p, 1).ratio);
    }
    fc.finite = std::isfinite(fc.fitted_C) && std::isfinite(fc.refined_C) && fc.fitted_C > 0.0;
    fc.refinement_delta = fc.finite ? std::abs(fc.refined_C - fc.fitted_C) / fc.fitted_C : INFINITY;
    return fc;
}

BetaIntegral beta_integral_bound(double gamma, double theta, double t) {
    require(gamma > 0.0 && gamma <= 1.0, "beta integral needs gamma in (0, 1]");
    require(theta >= 1.0, "beta integral needs theta >= 1");
    require(t > 0.0, "beta integral needs t > 0");
    // split at t/2 so that both singular endpoints sit at an exact zero
    auto left = [&](double s) { return std::pow(t - s, gamma - 1.0) * std::pow(s, theta - 1.0); };
    auto right = [&](double u) { return std::pow(u, gamma - 1.0) * std::pow(t - u, theta - 1.0); };
    BetaIntegral b;
    b.numeric = quad::tanh_sinh(left, 0.0, 0.5 * t, 1e-12, 12).value + quad::tanh_sinh(right, 0.0, 0.5 * t, 1e-12, 12).value;
    b.closed_form = std::pow(t, gamma + theta - 1.0) *
                    std::exp(std::lgamma(gamma) + std::lgamma(theta) - std::lgamma(gamma + theta));
    b.scaled = b.numeric * std::pow(theta, gamma) / std::pow(t, gamma + theta - 1.0);
    return b;
}

}  // namespace cylheat
