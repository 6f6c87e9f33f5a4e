#include "cylheat/lattice.hpp"

#include <numeric>
#include <stdexcept>

#include "cylheat/errors.hpp"

namespace cylheat {

Lattice1D::Lattice1D(LatticeSpec spec, double tail_power) : spec_(spec), tail_power_(tail_power), n_(spec.nodes) {
    if (n_ < 5) throw ConfigError("lattice needs at least 5 nodes");
    if (!(spec.core > 0.0) || !(spec.extent > spec.core)) throw ConfigError("lattice needs 0 < core < extent");
    if (!(tail_power > 1.0)) throw ConfigError("lattice tail power must exceed 1");
    xi_max_ = std::asinh(spec.extent / spec.core);
    h_ = 2.0 * xi_max_ / (n_ - 1);
    w_.resize(n_);
    for (int j = 0; j < n_; ++j) w_[j] = spec.core * std::sinh(xi(j));
    if (n_ % 2 == 1) w_[n_ / 2] = 0.0;

    // natural cubic spline: interpolation rows plus zero second derivative at both ends
    const int m = n_ + 2;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m, n_);
    A(0, 0) = 1.0;
    A(0, 1) = -2.0;
    A(0, 2) = 1.0;
    for (int j = 0; j < n_; ++j) {
        A(j + 1, j) = 1.0 / 6.0;
        A(j + 1, j + 1) = 4.0 / 6.0;
        A(j + 1, j + 2) = 1.0 / 6.0;
        E(j + 1, j) = 1.0;
    }
    A(m - 1, m - 3) = 1.0;
    A(m - 1, m - 2) = -2.0;
    A(m - 1, m - 1) = 1.0;
    cardinal_ = A.partialPivLu().solve(E);
}

void Lattice1D::weights_at(double w, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const double W = edge();
    if (w <= -W || w >= W) {
        out[w < 0 ? 0 : n_ - 1] = std::pow(W / std::abs(w), tail_power_);
        return;
    }
    const double s = (xi_of(w) + xi_max_) / h_;
    int c = std::clamp(static_cast<int>(s), 0, n_ - 2);
    double b[4];
    bspline(s - c, b);
    for (int m = 0; m < 4; ++m)
        for (int j = 0; j < n_; ++j) out[j] += b[m] * cardinal_(c + m, j);
}

void Lattice1D::integral_weights(double lo, double hi, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (!(hi > lo)) return;
    const double W = edge(), p = tail_power_;
    // tails: integral of (W/|w|)^p over the part of [lo, hi] beyond the edge
    auto tail = [&](double a, double b) {  // W <= a < b <= inf
        const double fa = std::pow(W / a, p - 1.0);
        const double fb = std::isinf(b) ? 0.0 : std::pow(W / b, p - 1.0);
        return W / (p - 1.0) * (fa - fb);
    };
    if (hi > W) out[n_ - 1] += tail(std::max(lo, W), hi);
    if (lo < -W) out[0] += tail(std::max(-hi, W), -lo);
    const double a = std::max(lo, -W), b = std::min(hi, W);
    if (!(b > a)) return;
    const auto& g = quad::gauss_legendre(8);
    std::vector<double> coef(n_ + 2, 0.0);
    const double xa = xi_of(a), xb = xi_of(b);
    const int c0 = std::clamp(static_cast<int>((xa + xi_max_) / h_), 0, n_ - 2);
    const int c1 = std::clamp(static_cast<int>((xb + xi_max_) / h_), 0, n_ - 2);
    for (int c = c0; c <= c1; ++c) {
        const double l = std::max(xa, xi(c)), r = std::min(xb, xi(c + 1));
        if (!(r > l)) continue;
        for (std::size_t q = 0; q < g.nodes.size(); ++q) {
            const double x = 0.5 * (l + r) + 0.5 * (r - l) * g.nodes[q];
            const double wt = 0.5 * (r - l) * g.weights[q] * spec_.core * std::cosh(x);
            double bb[4];
            bspline((x - xi(c)) / h_, bb);
            for (int m = 0; m < 4; ++m) coef[c + m] += wt * bb[m];
        }
    }
    for (int j = 0; j < n_; ++j) {
        double s = 0.0;
        for (int m = 0; m < n_ + 2; ++m) s += coef[m] * cardinal_(m, j);
        out[j] += s;
    }
}

std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

void mode_product(const double* in, const Shape& shape, int axis, const Eigen::MatrixXd& M, double* out) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (M.cols() != shape[axis]) throw std::invalid_argument("mode_product: dimension mismatch");
    std::size_t pre = 1, post = 1;
    for (int j = 0; j < axis; ++j) pre *= shape[j];
    for (std::size_t j = axis + 1; j < shape.size(); ++j) post *= shape[j];
    const Eigen::Index n = shape[axis], m = M.rows();
    for (std::size_t p = 0; p < pre; ++p) {
        Eigen::Map<const RowMat> src(in + p * n * post, n, static_cast<Eigen::Index>(post));
        Eigen::Map<RowMat> dst(out + p * m * post, m, static_cast<Eigen::Index>(post));
        dst.noalias() = M * src;
    }
}

std::vector<double> multi_mode_product(const std::vector<double>& in, const Shape& shape,
                                       const std::vector<const Eigen::MatrixXd*>& mats, Shape* out_shape) {
    Shape cur = shape;
    std::vector<double> a = in, b;
    for (std::size_t k = 0; k < mats.size(); ++k) {
        if (!mats[k]) continue;
        Shape next = cur;
        next[k] = static_cast<int>(mats[k]->rows());
        b.assign(shape_size(next), 0.0);
        mode_product(a.data(), cur, static_cast<int>(k), *mats[k], b.data());
        a.swap(b);
        cur = next;
    }
    if (out_shape) *out_shape = cur;
    return a;
}

double contract_vectors(const std::vector<double>& tensor, const Shape& shape,
                        const std::vector<std::span<const double>>& vectors) {
    // contract the last axis repeatedly
    std::vector<double> cur = tensor;
    std::size_t size = cur.size();
    for (int k = static_cast<int>(shape.size()) - 1; k >= 0; --k) {
        const std::size_t n = shape[k];
        const std::size_t outer = size / n;
        std::vector<double> next(outer, 0.0);
        const auto& v = vectors[k];
        for (std::size_t o = 0; o < outer; ++o) {
            double s = 0.0;
            const double* row = cur.data() + o * n;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * v[j];
            next[o] = s;
        }
        cur.swap(next);
        size = outer;
    }
    return cur[0];
}

}  // namespace cylheat
