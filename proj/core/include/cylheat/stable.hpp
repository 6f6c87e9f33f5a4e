#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "cylheat/random.hpp"

namespace cylheat {

// Reference grid for the unit-time table: node spacing and the radius
// beyond which the tail series takes over.
struct StableGrid {
    double spacing = 0.01;
    double radius = 50.0;
    bool operator==(const StableGrid&) const = default;
};

// Symmetric alpha-stable law with characteristic function exp(-t |xi|^alpha).
// g_t(x) = t^{-1/alpha} g_1(t^{-1/alpha} x); g_1 is tabulated once on a
// uniform grid (quintic Hermite between nodes) and continued by its
// convergent power series in |x|^{-alpha} beyond the grid radius.
class StableEvaluator {
public:
    using Grid = StableGrid;

    explicit StableEvaluator(double alpha, Grid grid = {});

    // Process-wide instance per alpha (default grid), built on first use.
    static std::shared_ptr<const StableEvaluator> shared(double alpha);

    double alpha() const { return alpha_; }
    const Grid& grid() const { return grid_; }

    double density(double t, double x) const;
    double derivative(double t, double x) const;
    double second_derivative(double t, double x) const;
    // d/dt g_t(x) = -(g_t(x) + x g_t'(x)) / (alpha t)
    double time_derivative(double t, double x) const;
    double cdf(double t, double x) const;

    double unit_density(double v) const;
    // g_1(v) and g_1'(v) with one table lookup.
    void unit_pair(double v, double& g, double& dg) const;
    double unit_second_derivative(double v) const;
    double unit_cdf(double v) const;

    // Series continuation used beyond the grid radius (v > 0).
    double series_density(double v) const;
    double series_derivative(double v) const;
    int series_terms() const { return static_cast<int>(tail_.size()); }

    // g_1 and its first three derivatives at x by direct contour quadrature
    // of the Fourier inversion integral; independent of the table.
    static std::array<double, 4> contour_moments(double alpha, double x);

    void save(const std::string& path) const;
    static std::shared_ptr<const StableEvaluator> load(const std::string& path);

private:
    StableEvaluator() = default;
    void build_series();
    void build_cumulative();
    double table_value(double v) const;
    double table_cdf_half(double v) const;

    double alpha_ = 1.0;
    double inv_alpha_ = 1.0;
    Grid grid_;
    int cells_ = 0;
    double inv_h_ = 0.0;
    std::vector<double> g_, d1_, d2_, d3_, cum_;
    std::vector<double> tail_;
};

// Generator constant A_alpha = 2^alpha Gamma((1+alpha)/2) / (sqrt(pi) |Gamma(-alpha/2)|).
double generator_constant(double alpha);

// One increment of the stable process over time `t` (Chambers-Mallows-Stuck).
double sample_increment(double alpha, double t, Rng& rng);

}  // namespace cylheat
