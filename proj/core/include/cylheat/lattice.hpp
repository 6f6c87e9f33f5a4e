#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "cylheat/quadrature.hpp"

namespace cylheat {

// Nodes w_j = core * sinh(xi_j) on a uniform xi grid covering |w| <= extent.
struct LatticeSpec {
    int nodes = 41;
    double core = 0.5;
    double extent = 200.0;
};

// One-dimensional sinh-graded lattice with natural cubic spline (uniform in
// xi) between nodes and a power-law tail (extent / |w|)^tail_power beyond it.
class Lattice1D {
public:
    Lattice1D(LatticeSpec spec, double tail_power);

    int size() const { return n_; }
    const LatticeSpec& spec() const { return spec_; }
    double tail_power() const { return tail_power_; }
    double step() const { return h_; }
    double xi(int j) const { return -xi_max_ + j * h_; }
    double w(int j) const { return w_[j]; }
    const std::vector<double>& nodes() const { return w_; }
    double edge() const { return w_.back(); }
    double xi_of(double w) const { return std::asinh(w / spec_.core); }
    double w_of(double xi) const { return spec_.core * std::sinh(xi); }

    // (n+2) x n map from node values to B-spline coefficients c_{-1..n}.
    const Eigen::MatrixXd& cardinal() const { return cardinal_; }

    // Node weights reproducing the interpolant at w (size n).
    void weights_at(double w, std::span<double> out) const;
    // Node weights for the integral of the interpolant over [lo, hi]
    // (infinite bounds allowed).
    void integral_weights(double lo, double hi, std::span<double> out) const;

    // Cubic B-spline pieces on [0, 1]: coefficient c_{cell-1+m} multiplies b[m].
    static void bspline(double u, double b[4]) {
        const double v = 1.0 - u, u2 = u * u, u3 = u2 * u;
        b[0] = v * v * v / 6.0;
        b[1] = (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
        b[2] = (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
        b[3] = u3 / 6.0;
    }

private:
    LatticeSpec spec_;
    double tail_power_;
    int n_;
    double xi_max_, h_;
    std::vector<double> w_;
    Eigen::MatrixXd cardinal_;
};

// Physical coordinate z = center + scale * w.
struct AxisFrame {
    double center = 0.0;
    double scale = 1.0;
    double z(double w) const { return center + scale * w; }
    double w(double z) const { return (z - center) / scale; }
};

// Row-major tensor of shape (n_0, ..., n_{d-1}).
using Shape = std::vector<int>;

std::size_t shape_size(const Shape& s);

// out = tensor with axis `axis` contracted against M (rows x shape[axis]);
// out has shape[axis] replaced by M.rows().
void mode_product(const double* in, const Shape& shape, int axis, const Eigen::MatrixXd& M, double* out);

// Apply one matrix per axis.
std::vector<double> multi_mode_product(const std::vector<double>& in, const Shape& shape,
                                       const std::vector<const Eigen::MatrixXd*>& mats, Shape* out_shape = nullptr);

// sum over all indices of T[i...] * prod_k v_k[i_k]
double contract_vectors(const std::vector<double>& tensor, const Shape& shape,
                        const std::vector<std::span<const double>>& vectors);

// Product-integration rows: for each row point a, row . F approximates
// the integral over z of K(a, z) F(z), where F is the lattice interpolant in
// frame `frame` (spline inside, power tails outside).
//
// Kernel concept:
//   using Ctx = ...;
//   Ctx prepare(double z) const;
//   void eval(int row, double offset, const Ctx&, double* out) const;  // offset = z - a
//
// Near the row point, nodes are generated as offsets from a, so kernels far
// narrower than the rounding unit of a are still resolved. `eps` is the
// kernel width; `singular` lists points where the kernel is not smooth.
struct ProductRule {
    int cell_nodes = 6;
    int near_nodes = 8;
    int tail_nodes = 8;
};

template <int K, class Kernel>
void product_rows(const Lattice1D& lat, const AxisFrame& frame, std::span<const double> rows, double eps,
                  std::span<const double> singular, const Kernel& kernel, const ProductRule& rule,
                  std::array<Eigen::MatrixXd, K>& out);

// ------------------------------------------------------------------ impl

template <int K, class Kernel>
void product_rows(const Lattice1D& lat, const AxisFrame& frame, std::span<const double> rows, double eps,
                  std::span<const double> singular, const Kernel& kernel, const ProductRule& rule,
                  std::array<Eigen::MatrixXd, K>& out) {
    using Ctx = decltype(kernel.prepare(0.0));
    const int n = lat.size();
    const int cells = n - 1;
    const int R = static_cast<int>(rows.size());
    const double h = lat.step();
    const double core = lat.spec().core;
    const double W = lat.edge();
    const double p = lat.tail_power();
    const double zlo_edge = frame.z(-W), zhi_edge = frame.z(W);

    std::array<Eigen::MatrixXd, K> coef;
    for (int k = 0; k < K; ++k) {
        coef[k].setZero(R, n + 2);
        out[k].setZero(R, n);
    }
    double val[K];

    // A lattice narrower than the kernel by many orders, or than the rounding
    // unit of its centre, acts as a point mass at the centre.
    const double span = frame.scale * W;
    const double ulp = std::numeric_limits<double>::epsilon() * std::max(std::abs(frame.center), 1e-300);
    if (span < 1e-6 * eps || span < 1e4 * ulp) {
        std::vector<double> mass(n);
        lat.integral_weights(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), mass);
        const auto c = kernel.prepare(frame.center);
        for (int r = 0; r < R; ++r) {
            kernel.eval(r, frame.center - rows[r], c, val);
            for (int k = 0; k < K; ++k)
                for (int j = 0; j < n; ++j) out[k](r, j) = val[k] * mass[j] * frame.scale;
        }
        return;
    }

    const auto& cg = quad::gauss_legendre(rule.cell_nodes);
    const auto& ng = quad::gauss_legendre(rule.near_nodes);
    const auto& tg = quad::gauss_legendre(rule.tail_nodes);

    // standard nodes per cell, independent of the row
    struct StdNode {
        double z, weight, b[4];
    };
    const int m = rule.cell_nodes;
    std::vector<StdNode> std_nodes(static_cast<std::size_t>(cells) * m);
    std::vector<Ctx> std_ctx(std_nodes.size());
    std::vector<double> cell_lo(cells + 1);
    for (int c = 0; c <= cells; ++c) cell_lo[c] = frame.z(lat.w(c));
    for (int c = 0; c < cells; ++c) {
        for (int q = 0; q < m; ++q) {
            const double u = 0.5 * (1.0 + cg.nodes[q]);
            const double xi = lat.xi(c) + u * h;
            auto& sn = std_nodes[c * m + q];
            sn.z = frame.z(core * std::sinh(xi));
            sn.weight = 0.5 * cg.weights[q] * frame.scale * core * std::cosh(xi) * h;
            Lattice1D::bspline(u, sn.b);
            std_ctx[c * m + q] = kernel.prepare(sn.z);
        }
    }
    // mapped tail rule beyond |w| = w0: u = v^{1/(p-1)}, w = w0/u,
    // integral of (W/|w|)^p dw = (W/w0)^p w0/(p-1) dv
    struct TailNode {
        double z[2];
        double weight;
    };
    const int mt = rule.tail_nodes;
    auto tail_rule = [&](double w0) {
        std::vector<TailNode> nodes(2 * mt);
        for (int panel = 0; panel < 2; ++panel) {
            const double v0 = panel == 0 ? 0.0 : 0.2, v1 = panel == 0 ? 0.2 : 1.0;
            for (int q = 0; q < mt; ++q) {
                const double v = v0 + (v1 - v0) * 0.5 * (1.0 + tg.nodes[q]);
                const double u = std::pow(v, 1.0 / (p - 1.0));
                auto& tn = nodes[panel * mt + q];
                tn.z[0] = frame.z(-w0 / u);
                tn.z[1] = frame.z(w0 / u);
                tn.weight = 0.5 * (v1 - v0) * tg.weights[q] * frame.scale * w0 / (p - 1.0) * std::pow(W / w0, p);
            }
        }
        return nodes;
    };
    const std::vector<TailNode> tail_nodes = tail_rule(W);
    std::vector<Ctx> tail_ctx(4 * mt);
    for (int q = 0; q < 2 * mt; ++q)
        for (int side = 0; side < 2; ++side) tail_ctx[2 * q + side] = kernel.prepare(tail_nodes[q].z[side]);

    // Composite rule over offsets [ol, or] from the row point a. Panels are
    // bisected until their width is below the distance to a (floored at
    // eps/2), to each kink, and to the frame centre when `grade_center`.
    // basis(z, b) returns the column of b[0] (spline: four coefficients
    // starting there) or -1 / -2 for a left / right tail factor in b[0].
    auto adaptive = [&](int r, double a, double ol, double orr, bool grade_center, auto&& basis) {
        struct Panel {
            double l, r;
            int depth;
        };
        std::vector<double> cuts = {ol, orr};
        if (ol < 0.0 && orr > 0.0) cuts.push_back(0.0);
        for (double s : singular)
            if (s - a > ol && s - a < orr) cuts.push_back(s - a);
        std::sort(cuts.begin(), cuts.end());
        std::vector<Panel> stack;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) stack.push_back({cuts[i], cuts[i + 1], 0});
        const double width0 = orr - ol;
        const double oc = frame.center - a;
        while (!stack.empty()) {
            const Panel pn = stack.back();
            stack.pop_back();
            const double wdt = pn.r - pn.l;
            if (!(wdt > 0.0)) continue;
            auto gap = [&](double c) { return c < pn.l ? pn.l - c : (c > pn.r ? c - pn.r : 0.0); };
            double allowed = std::max(gap(0.0), 0.5 * eps);
            for (double s : singular) allowed = std::min(allowed, std::max(gap(s - a), 1e-9 * width0));
            if (grade_center) allowed = std::min(allowed, gap(oc));
            if (wdt > allowed && pn.depth < 80) {
                const double mid = 0.5 * (pn.l + pn.r);
                stack.push_back({pn.l, mid, pn.depth + 1});
                stack.push_back({mid, pn.r, pn.depth + 1});
                continue;
            }
            for (int q = 0; q < rule.near_nodes; ++q) {
                const double o = 0.5 * (pn.l + pn.r) + 0.5 * wdt * ng.nodes[q];
                const double wq = 0.5 * wdt * ng.weights[q];
                const double z = a + o;
                const Ctx ctx = kernel.prepare(z);
                kernel.eval(r, o, ctx, val);
                double b[4];
                const int col = basis(z, b);
                for (int k = 0; k < K; ++k) {
                    const double f = val[k] * wq;
                    if (col >= 0) {
                        for (int j = 0; j < 4; ++j) coef[k](r, col + j) += f * b[j];
                    } else {
                        out[k](r, col == -1 ? 0 : n - 1) += f * b[0];
                    }
                }
            }
        }
    };

    for (int r = 0; r < R; ++r) {
        const double a = rows[r];
        for (int c = 0; c < cells; ++c) {
            const double zl = cell_lo[c], zr = cell_lo[c + 1];
            const double wc = zr - zl;
            const double dist = a < zl ? zl - a : (a > zr ? a - zr : 0.0);
            bool near = dist < 2.0 * wc && eps < 4.0 * wc;
            for (double s : singular)
                if (s > zl - 0.5 * wc && s < zr + 0.5 * wc) near = true;
            if (!near) {
                for (int q = 0; q < m; ++q) {
                    const auto& sn = std_nodes[c * m + q];
                    kernel.eval(r, sn.z - a, std_ctx[c * m + q], val);
                    for (int k = 0; k < K; ++k) {
                        const double f = val[k] * sn.weight;
                        for (int j = 0; j < 4; ++j) coef[k](r, c + j) += f * sn.b[j];
                    }
                }
            } else {
                adaptive(r, a, zl - a, zr - a, false, [&](double z, double* b) {
                    const double u = (lat.xi_of(frame.w(z)) - lat.xi(c)) / h;
                    Lattice1D::bspline(std::clamp(u, 0.0, 1.0), b);
                    return c;
                });
            }
        }
        if (a >= zlo_edge && a <= zhi_edge) {
            for (int q = 0; q < 2 * mt; ++q) {
                const auto& tn = tail_nodes[q];
                for (int side = 0; side < 2; ++side) {
                    kernel.eval(r, tn.z[side] - a, tail_ctx[2 * q + side], val);
                    for (int k = 0; k < K; ++k) out[k](r, side == 0 ? 0 : n - 1) += val[k] * tn.weight;
                }
            }
            continue;
        }
        // Row point beyond the lattice: the side containing it is
        // integrated adaptively out to well past a, the rest by the mapped rule.
        const int side_a = a < zlo_edge ? 0 : 1;
        const double sign = side_a == 0 ? -1.0 : 1.0;
        const double wa = std::abs(frame.w(a));
        const double wfar = 4.0 * wa;
        const double zedge = side_a == 0 ? zlo_edge : zhi_edge;
        const double zfar = frame.z(sign * wfar);
        auto tail_basis = [&](double z, double* b) {
            b[0] = std::pow(W / std::abs(frame.w(z)), p);
            return side_a == 0 ? -1 : -2;
        };
        adaptive(r, a, std::min(zedge, zfar) - a, std::max(zedge, zfar) - a, true, tail_basis);
        const auto far_nodes = tail_rule(wfar);
        for (int q = 0; q < 2 * mt; ++q) {
            for (int side = 0; side < 2; ++side) {
                // the far rule covers |w| > wfar on a's side and |w| > W on the other
                const auto& tn = side == side_a ? far_nodes[q] : tail_nodes[q];
                const Ctx ctx = kernel.prepare(tn.z[side]);
                kernel.eval(r, tn.z[side] - a, ctx, val);
                for (int k = 0; k < K; ++k) out[k](r, side == 0 ? 0 : n - 1) += val[k] * tn.weight;
            }
        }
    }
    const Eigen::MatrixXd& C = lat.cardinal();
    for (int k = 0; k < K; ++k) out[k].noalias() += coef[k] * C;
}

}  // namespace cylheat
