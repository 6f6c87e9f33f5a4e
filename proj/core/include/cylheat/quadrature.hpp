#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace cylheat::quad {

// Nodes and weights on [-1, 1].
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Cached Gauss-Legendre rule with n points.
const Rule& gauss_legendre(int n);

// Kronrod 15-point rule; `gauss` holds the embedded 7-point Gauss weights
// on the same nodes (zero at the Kronrod-only nodes).
struct KronrodPair {
    Rule kronrod;
    std::vector<double> gauss;
};
const KronrodPair& kronrod15();

template <class F>
double fixed(F&& f, double a, double b, const Rule& rule) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(c + h * rule.nodes[i]);
    return s * h;
}

struct Result {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = true;
};

// Adaptive Gauss-Kronrod (7/15) with bisection. Stops a branch when its
// error estimate is below max(abs_tol, rel_tol * |local value|) scaled to
// the branch width, or when max_depth is hit (marks converged=false).
Result gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, double rel_tol, int max_depth = 40);

// Adaptive integration over consecutive breakpoints (sorted and clipped to [a, b]).
Result gauss_kronrod_pieces(const std::function<double(double)>& f, double a, double b,
                            std::vector<double> breaks, double abs_tol, double rel_tol);

// Double-exponential rule on [a, b], robust to algebraic endpoint singularities.
// Levels are refined until successive estimates agree to rel_tol.
Result tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 int max_level = 10);

}  // namespace cylheat::quad
