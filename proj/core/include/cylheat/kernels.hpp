#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cylheat/coeffs.hpp"
#include "cylheat/stable.hpp"

namespace cylheat {

// rho_gamma^beta(t, x) = t^{gamma/alpha} (|x|^beta ^ 1) (t^{1/alpha} + |x|)^{-1-alpha}
struct KernelProfile {
    double gamma = 0.0;
    double beta_exp = 0.0;
    double alpha = 1.0;
};

double rho(const KernelProfile& profile, double t, double x);

// Heat kernel of the generator frozen at y, at displacement x:
//   prod_i g_t(x_i / a_ii(y)) / a_ii(y)
double frozen_kernel(const CoefficientField& field, const StableEvaluator& ev, double t,
                     std::span<const double> x, std::span<const double> y);
std::vector<double> frozen_kernel_gradient(const CoefficientField& field, const StableEvaluator& ev, double t,
                                           std::span<const double> x, std::span<const double> y);

using PointFunction = std::function<double(std::span<const double>)>;

// f(x + e_k z) + f(x - e_k z) - 2 f(x), zero-based k.
double second_difference(const PointFunction& f, std::span<const double> x, double z, int k);

enum class ConvolutionCase { PointwiseIntegral, SpaceConvolution, SpaceTimeConvolution };

struct ConvolutionExponents {
    double gamma1 = 0.0, beta1 = 0.0, gamma2 = 0.0, beta2 = 0.0;
};

struct ConvolutionProbe {
    double t = 1.0;
    double s = 0.5;  // only used by the space convolution
    double x = 0.0;
};

struct ConvolutionBound {
    double lhs = 0.0;
    double rhs_shape = 0.0;
    double ratio = 0.0;
    bool converged = true;
};

// Left side by adaptive quadrature, right side with C = 1. `resolution`
// tightens tolerances (each step by a factor 100).
ConvolutionBound conv_bound_check(ConvolutionCase which, double alpha, const ConvolutionExponents& e,
                                  const ConvolutionProbe& probe, int resolution = 0);

struct FittedConstant {
    double fitted_C = 0.0;
    double refined_C = 0.0;
    double refinement_delta = 0.0;
    bool finite = false;
};

FittedConstant fit_convolution_constant(ConvolutionCase which, double alpha, const ConvolutionExponents& e,
                                        std::span<const ConvolutionProbe> probes);

// int_0^t (t-s)^{gamma-1} s^{theta-1} ds, its closed form t^{gamma+theta-1} B(gamma, theta),
// and the normalized constant integral * theta^gamma / t^{gamma+theta-1}.
struct BetaIntegral {
    double numeric = 0.0;
    double closed_form = 0.0;
    double scaled = 0.0;
};

BetaIntegral beta_integral_bound(double gamma, double theta, double t);

}  // namespace cylheat
