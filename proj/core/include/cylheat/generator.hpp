#pragma once

#include <span>
#include <vector>

#include "cylheat/coeffs.hpp"
#include "cylheat/kernels.hpp"

namespace cylheat {

// How f behaves along coordinate lines beyond the truncation radius.
// PowerLaw: f(x + z e_k) ~ c |z|^{-exponent}; None: only the -2 f(x) part
// of the second difference is completed analytically.
enum class TailModel { None, PowerLaw };

// A function that can be evaluated in batches along coordinate lines.
class LineFunction {
public:
    virtual ~LineFunction() = default;
    virtual int dim() const = 0;
    // out[j] = f(x + offsets[j] e_k)
    virtual void line(int k, std::span<const double> x, std::span<const double> offsets,
                      std::span<double> out) const = 0;
    virtual TailModel tail_model() const { return TailModel::None; }
    virtual double tail_exponent() const { return 0.0; }
};

// Adapter for a pointwise callable.
class PointLineFunction : public LineFunction {
public:
    PointLineFunction(int dim, PointFunction f, TailModel tail = TailModel::None, double exponent = 0.0)
        : dim_(dim), f_(std::move(f)), tail_(tail), exponent_(exponent) {}
    int dim() const override { return dim_; }
    void line(int k, std::span<const double> x, std::span<const double> offsets,
              std::span<double> out) const override;
    TailModel tail_model() const override { return tail_; }
    double tail_exponent() const override { return exponent_; }

private:
    int dim_;
    PointFunction f_;
    TailModel tail_;
    double exponent_;
};

// Discretization of the jump integral. Lengths are in units of `scale`
// passed to apply_frozen_generator (typically t^{1/alpha}).
struct GeneratorScheme {
    double epsilon_split = 0.1;  // inner region (0, eps) in units of scale
    double tail_radius = 1e3;    // truncation radius in units of scale
    int inner_nodes = 16;
    double rel_tol = 1e-9;
    int max_rounds = 14;
    double consistency_tol = 1e-5;  // allowed relative change when eps is halved
};

struct GeneratorResult {
    double value = 0.0;
    // relative change of the value when the inner cutoff is halved
    double consistency = 0.0;
    bool flagged = false;
    int evaluations = 0;
};

// (A_alpha / 2) sum_k sigma_k int delta_f(x, e_k z) |z|^{-1-alpha} dz, with
// sigma_k the frozen coefficients. Features (kinks of f) along each axis
// may be listed as absolute coordinates in `features[k]`.
GeneratorResult apply_frozen_generator(const LineFunction& f, std::span<const double> sigma,
                                       std::span<const double> x, double alpha, double scale,
                                       const GeneratorScheme& scheme = {},
                                       const std::vector<std::vector<double>>& features = {});

// Freezing point given as a point y of the field.
GeneratorResult apply_frozen_generator(const LineFunction& f, const CoefficientField& field,
                                       std::span<const double> y, std::span<const double> x, double scale,
                                       const GeneratorScheme& scheme = {});

}  // namespace cylheat
