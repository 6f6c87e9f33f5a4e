#pragma once

#include <memory>
#include <span>
#include <vector>

#include "cylheat/coeffs.hpp"
#include "cylheat/generator.hpp"
#include "cylheat/lattice.hpp"
#include "cylheat/stable.hpp"

namespace cylheat {

// Discretization of the series. Space: per coordinate, a sinh-graded lattice
// in the self-similar variable w = (z - anchor) / (b1 t^{1/alpha}). Time: a
// log-spaced table from t_min * T with `per_decade` nodes per decade; each
// time integral is split at t/2 and mapped s = (t/2) u^p at both ends.
struct QuadratureScheme {
    LatticeSpec space;
    ProductRule product;
    GeneratorScheme generator;
    int time_nodes = 12;
    double time_power_cap = 6.0;
    int per_decade = 4;
    double t_min = 1e-8;
    double fd_step = 0.01;    // relative step of time differences
    double tolerance = 1e-3;  // declared relative accuracy of the tables

    // One refinement step: finer lattice, more time nodes, halved inner cutoff.
    QuadratureScheme refined() const;
};

struct ParametrixContext {
    ParametrixContext(CoefficientField field, QuadratureScheme scheme = {});

    const ModelParams& params() const { return field.params(); }
    int dim() const { return field.dim(); }

    CoefficientField field;
    QuadratureScheme scheme;
    std::shared_ptr<const StableEvaluator> ev;
    // Holder exponent used for small-time asymptotics: min(declared beta, 1).
    double beta_decay = 0.25;
    // Exponent of the time substitution at both ends.
    double time_power = 4.0;
};

// p_y(t, x - y) = prod_k g_{t sigma_k(y)}(x_k - y_k)
double frozen_density(const ParametrixContext& ctx, double t, std::span<const double> x, std::span<const double> y);

// (L^x - L^y) p_y(t, . - y)(x) in closed form: for each k,
// (sigma_k(x) - sigma_k(y)) d/dtheta g_theta(x_k - y_k) at theta = t sigma_k(y),
// times the other coordinates' densities.
double q0(const ParametrixContext& ctx, double t, std::span<const double> x, std::span<const double> y);

// Same quantity through the jump integral of the frozen generators.
GeneratorResult q0_quadrature(const ParametrixContext& ctx, double t, std::span<const double> x,
                              std::span<const double> y);

struct SeriesOptions {
    int n_max = 6;          // highest iterate computed
    double tol = 1e-4;      // relative truncation tolerance
    bool time_derivative = false;  // also tabulate t (1 +- fd_step)
};

// Convergence record of the series.
struct SeriesSummary {
    std::vector<double> term_norms;  // weighted sup norms of q_0, q_1, ...
    int n_used = 1;                  // number of terms summed
    double ratio_constant = 0.0;     // fitted C in norm_n <= c C^n / ((n+1)!)^{beta/alpha}
    double remainder = 0.0;          // estimated weighted norm of the dropped terms
    bool degraded = false;           // lattice extent too small for the data
};

// Values at one tabulated time. Tensors are row-major over the lattice
// nodes of every axis, at z_k = anchor_k + scale[k] * w_j.
struct SliceTime {
    double t = 0.0;
    bool fd_only = false;
    std::vector<double> scale;
    std::vector<std::vector<double>> terms;  // q_n (backward) or iterates of the forward sum
    std::vector<std::vector<double>> phi;    // backward: correction terms of p^A
    // backward query data: time nodes, weights, and the summed q at each node
    std::vector<double> s_nodes, s_weights;
    std::vector<std::vector<double>> s_sum;
};

enum class SliceKind { Backward, Forward };

struct SliceData {
    SliceKind kind = SliceKind::Backward;
    std::vector<double> anchor;
    std::vector<SliceTime> times;
    SeriesSummary summary;
    int n_max = 0;
};

// p^A(t, ., y) for a fixed y, as p_y + sum_n int_0^t int p_z(t-s, . - z) q_n(s, z, y) dz ds,
// with q_n built by Picard iteration of q_0.
class BackwardSlice {
public:
    BackwardSlice(std::shared_ptr<const ParametrixContext> ctx, std::vector<double> y,
                  std::vector<double> times, const SeriesOptions& options = {});
    BackwardSlice(std::shared_ptr<const ParametrixContext> ctx, SliceData data);

    const ParametrixContext& context() const { return *ctx_; }
    std::shared_ptr<const ParametrixContext> context_ptr() const { return ctx_; }
    const SliceData& data() const { return data_; }
    const std::vector<double>& y() const { return data_.anchor; }
    const SeriesSummary& summary() const { return data_.summary; }
    const Lattice1D& lattice() const { return lattice_; }
    Shape shape() const;

    // Index of a tabulated time; throws PreconditionError when absent.
    int time_index(double t) const;
    const SliceTime& at(double t) const { return data_.times[time_index(t)]; }
    double node(double t, int axis, int j) const;

    // Lattice tensors at a tabulated time.
    std::vector<double> pA(double t) const;
    std::vector<double> q(double t) const;
    std::vector<double> frozen(double t) const;
    // |q - partial sum| bound from the fitted factorial law.
    std::vector<double> truncation_bound(double t) const;
    // Combined error estimate for p^A.
    std::vector<double> error_estimate(double t) const;

    // p^A(t, x, y) on the tensor grid points[0] x points[1] x ...
    std::vector<double> evaluate(double t, const std::vector<std::vector<double>>& points) const;
    double value(double t, std::span<const double> x) const;
    // d/dx_k p^A on the tensor grid; alpha must exceed 1.
    std::vector<double> gradient(double t, int k, const std::vector<std::vector<double>>& points) const;
    std::vector<double> gradient_at(double t, std::span<const double> x) const;
    // Central difference in time at the tabulated t (needs time_derivative).
    double time_derivative(double t, std::span<const double> x) const;

    // p^A(t, ., y) as a line-evaluable function (tail exponent 1 + alpha).
    std::unique_ptr<LineFunction> line_function(double t) const;

private:
    void build(const std::vector<double>& times, const SeriesOptions& options);
    std::vector<double> correction(double t, const std::vector<std::vector<double>>& points, int grad_axis) const;

    std::shared_ptr<const ParametrixContext> ctx_;
    Lattice1D lattice_;
    SliceData data_;
};

// p^A(t, x, .) for a fixed x, from the series p_.(t, x - .) * (delta + q0 + q0*q0 + ...)
// summed from the left. Used for integrals over the forward variable.
class ForwardSlice {
public:
    ForwardSlice(std::shared_ptr<const ParametrixContext> ctx, std::vector<double> x,
                 std::vector<double> times, const SeriesOptions& options = {});
    ForwardSlice(std::shared_ptr<const ParametrixContext> ctx, SliceData data);

    const ParametrixContext& context() const { return *ctx_; }
    const SliceData& data() const { return data_; }
    const std::vector<double>& x() const { return data_.anchor; }
    const SeriesSummary& summary() const { return data_.summary; }
    const Lattice1D& lattice() const { return lattice_; }
    Shape shape() const;
    int time_index(double t) const;
    const SliceTime& at(double t) const { return data_.times[time_index(t)]; }
    double node(double t, int axis, int j) const;

    std::vector<double> pA(double t) const;
    // p^A(t, x, y) on a tensor grid of y points.
    std::vector<double> evaluate(double t, const std::vector<std::vector<double>>& points) const;
    double value(double t, std::span<const double> y) const;

    // Integral of p^A(t, x, y) over |y_k - x_k| <= half_width[k] (infinite
    // entries integrate the whole axis, completing the tail analytically).
    double mass(double t, std::span<const double> half_width) const;

private:
    void build(const std::vector<double>& times, const SeriesOptions& options);

    std::shared_ptr<const ParametrixContext> ctx_;
    Lattice1D lattice_;
    SliceData data_;
};

// Convenience entry points over backward slices.

// Sum of the series with truncation control: builds the slice.
BackwardSlice q_sum(std::shared_ptr<const ParametrixContext> ctx, std::span<const double> y,
                    std::vector<double> times, int n_max, double tol);

// One more Picard iterate than `prev` holds (rebuilds with n_max + 1).
BackwardSlice picard_iterate(const BackwardSlice& prev);

struct PointValue {
    double value = 0.0;
    double error_estimate = 0.0;
};
PointValue assemble_pA(const BackwardSlice& slice, double t, std::span<const double> x);
std::vector<double> pA_gradient(const BackwardSlice& slice, double t, std::span<const double> x);

// Envelope t^{d-1} prod (t^{1/a} + |D_i|)^{-1-a} [t^{b/a} + sum (|D_m|^b ^ 1)]
// used to weight q.
double q_envelope(double alpha, double beta, double t, std::span<const double> delta);

}  // namespace cylheat
