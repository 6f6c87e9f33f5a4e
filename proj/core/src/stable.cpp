#include "cylheat/stable.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include "cylheat/errors.hpp"
#include "cylheat/quadrature.hpp"

namespace cylheat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint32_t kCacheVersion = 1;
constexpr char kCacheMagic[8] = {'C', 'Y', 'L', 'S', 'T', 'B', 'L', '1'};

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("stability index must lie in (0, 2)");
}

void check_time(double t) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
}

// Quintic Hermite basis on [0, 1].
struct Hermite5 {
    double h0, h1, h2, h3, h4, h5;
    explicit Hermite5(double u) {
        const double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
        h0 = 1 - 10 * u3 + 15 * u4 - 6 * u5;
        h1 = u - 6 * u3 + 8 * u4 - 3 * u5;
        h2 = 0.5 * (u2 - 3 * u3 + 3 * u4 - u5);
        h3 = 10 * u3 - 15 * u4 + 6 * u5;
        h4 = -4 * u3 + 7 * u4 - 3 * u5;
        h5 = 0.5 * (u3 - 2 * u4 + u5);
    }
};

}  // namespace

double generator_constant(double alpha) {
    check_alpha(alpha);
    return std::pow(2.0, alpha) * std::tgamma(0.5 * (1.0 + alpha)) /
           (std::sqrt(kPi) * std::abs(std::tgamma(-0.5 * alpha)));
}

std::array<double, 4> StableEvaluator::contour_moments(double alpha, double x) {
    check_alpha(alpha);
    using cd = std::complex<double>;
    x = std::abs(x);
    // Rotate the inversion contour to xi = r e^{i phi}; both exp(i x xi) and
    // exp(-xi^alpha) then decay along the ray.
    const double phi = kPi / (4.0 * std::max(alpha, 1.0));
    const cd e1 = std::polar(1.0, phi);
    const cd ea = std::polar(1.0, alpha * phi);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double sa = std::sin(alpha * phi), ca = std::cos(alpha * phi);
    const cd ixe = cd(0.0, x) * e1;

    std::array<cd, 4> sum{};
    // [0, r0]: expand exp(-r^a ea + i x r e1) to second order.
    const double r0 = 1e-8;
    for (int k = 0; k < 4; ++k) {
        const double kk = k + 1.0;
        sum[k] += std::pow(r0, kk) / kk - ea * std::pow(r0, kk + alpha) / (kk + alpha) +
                  ixe * std::pow(r0, kk + 1.0) / (kk + 1.0) +
                  0.5 * ea * ea * std::pow(r0, kk + 2 * alpha) / (kk + 2 * alpha);
    }
    auto decay = [&](double r) { return x * r * sp + std::pow(r, alpha) * ca; };
    auto phase = [&](double r) { return x * r * cp - std::pow(r, alpha) * sa; };
    const auto& rule = quad::gauss_legendre(12);
    double r = r0;
    for (int panel = 0; panel < 100000; ++panel) {
        double dr = r;
        while (std::abs(decay(r + dr) - decay(r)) > 3.0 || std::abs(phase(r + dr) - phase(r)) > 2.0) dr *= 0.5;
        const double c = r + 0.5 * dr, h = 0.5 * dr;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double rr = c + h * rule.nodes[q];
            const cd e = std::exp(ixe * rr - ea * std::pow(rr, alpha)) * (rule.weights[q] * h);
            sum[0] += e;
            sum[1] += e * rr;
            sum[2] += e * rr * rr;
            sum[3] += e * rr * rr * rr;
        }
        r += dr;
        if (decay(r) - 3.0 * std::log(std::max(r, 1.0)) > 42.0) break;
    }
    std::array<double, 4> out{};
    cd rot = e1;
    const cd ie1 = cd(0.0, 1.0) * e1;
    for (int k = 0; k < 4; ++k) {
        out[k] = std::real(rot * sum[k]) / kPi;
        rot *= ie1;
    }
    return out;
}

StableEvaluator::StableEvaluator(double alpha, Grid grid) : alpha_(alpha), inv_alpha_(1.0 / alpha), grid_(grid) {
    check_alpha(alpha);
    if (!(grid.spacing > 0.0) || !(grid.radius > grid.spacing)) throw DomainError("invalid reference grid");
    cells_ = static_cast<int>(std::lround(grid.radius / grid.spacing));
    grid_.radius = cells_ * grid.spacing;
    inv_h_ = 1.0 / grid.spacing;
    const int n = cells_ + 1;
    g_.resize(n);
    d1_.resize(n);
    d2_.resize(n);
    d3_.resize(n);
    for (int j = 0; j < n; ++j) {
        const auto m = contour_moments(alpha, j * grid.spacing);
        g_[j] = m[0];
        d1_[j] = m[1];
        d2_[j] = m[2];
        d3_[j] = m[3];
    }
    build_series();
    build_cumulative();
}

void StableEvaluator::build_series() {
    // g_1(x) = sum_k a_k x^{-k alpha - 1},
    // a_k = (-1)^{k+1} Gamma(k alpha + 1) sin(k pi alpha / 2) / (pi k!).
    tail_.clear();
    const double R = grid_.radius;
    double first = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double mag = std::exp(std::lgamma(k * alpha_ + 1.0) - std::lgamma(k + 1.0));
        const double a = ((k % 2) ? 1.0 : -1.0) * mag * std::sin(k * kPi * alpha_ / 2.0) / kPi;
        const double size = mag / kPi * std::pow(R, -k * alpha_ - 1.0);
        if (k == 1) first = size;
        tail_.push_back(a);
        if (size < 1e-18 * first) break;
    }
}

void StableEvaluator::build_cumulative() {
    const auto& rule = quad::gauss_legendre(3);
    cum_.assign(cells_ + 1, 0.0);
    const double h = grid_.spacing;
    for (int j = 0; j < cells_; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q)
            s += rule.weights[q] * table_value((j + 0.5 + 0.5 * rule.nodes[q]) * h);
        cum_[j + 1] = cum_[j] + 0.5 * h * s;
    }
}

double StableEvaluator::table_value(double v) const {
    const double s = v * inv_h_;
    int j = static_cast<int>(s);
    if (j >= cells_) j = cells_ - 1;
    const Hermite5 b(s - j);
    const double h = grid_.spacing;
    return g_[j] * b.h0 + h * d1_[j] * b.h1 + h * h * d2_[j] * b.h2 + g_[j + 1] * b.h3 + h * d1_[j + 1] * b.h4 +
           h * h * d2_[j + 1] * b.h5;
}

double StableEvaluator::series_density(double v) const {
    const double u = std::pow(v, -alpha_);
    double s = 0.0;
    for (std::size_t k = tail_.size(); k-- > 0;) s = s * u + tail_[k];
    return s * u / v;
}

double StableEvaluator::series_derivative(double v) const {
    const double u = std::pow(v, -alpha_);
    double s = 0.0;
    for (std::size_t k = tail_.size(); k-- > 0;) s = s * u - tail_[k] * ((k + 1) * alpha_ + 1.0);
    return s * u / (v * v);
}

double StableEvaluator::unit_density(double v) const {
    v = std::abs(v);
    if (v <= grid_.radius) return table_value(v);
    return series_density(v);
}

void StableEvaluator::unit_pair(double v, double& g, double& dg) const {
    const double a = std::abs(v);
    if (a > grid_.radius) {
        g = series_density(a);
        dg = series_derivative(a);
    } else {
        const double s = a * inv_h_;
        int j = static_cast<int>(s);
        if (j >= cells_) j = cells_ - 1;
        const Hermite5 b(s - j);
        const double h = grid_.spacing;
        g = g_[j] * b.h0 + h * d1_[j] * b.h1 + h * h * d2_[j] * b.h2 + g_[j + 1] * b.h3 + h * d1_[j + 1] * b.h4 +
            h * h * d2_[j + 1] * b.h5;
        dg = d1_[j] * b.h0 + h * d2_[j] * b.h1 + h * h * d3_[j] * b.h2 + d1_[j + 1] * b.h3 + h * d2_[j + 1] * b.h4 +
             h * h * d3_[j + 1] * b.h5;
    }
    if (v < 0) dg = -dg;
}

double StableEvaluator::unit_second_derivative(double v) const {
    const double a = std::abs(v);
    if (a > grid_.radius) {
        const double u = std::pow(a, -alpha_);
        double s = 0.0;
        for (std::size_t k = tail_.size(); k-- > 0;) {
            const double p = (k + 1) * alpha_ + 1.0;
            s = s * u + tail_[k] * p * (p + 1.0);
        }
        return s * u / (a * a * a);
    }
    // cubic Hermite on (g'', g''') is enough for the few callers of this path
    const double s = a * inv_h_;
    int j = static_cast<int>(s);
    if (j >= cells_) j = cells_ - 1;
    const double u = s - j, h = grid_.spacing;
    const double u2 = u * u, u3 = u2 * u;
    return d2_[j] * (2 * u3 - 3 * u2 + 1) + h * d3_[j] * (u3 - 2 * u2 + u) + d2_[j + 1] * (-2 * u3 + 3 * u2) +
           h * d3_[j + 1] * (u3 - u2);
}

double StableEvaluator::table_cdf_half(double v) const {
    // integral of g_1 over [0, v] for 0 <= v <= radius
    const double s = v * inv_h_;
    int j = static_cast<int>(s);
    if (j >= cells_) j = cells_ - 1;
    const double x0 = j * grid_.spacing;
    const double w = v - x0;
    if (w <= 0.0) return cum_[j];
    const auto& rule = quad::gauss_legendre(3);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q)
        acc += rule.weights[q] * table_value(x0 + 0.5 * w * (1.0 + rule.nodes[q]));
    return cum_[j] + 0.5 * w * acc;
}

double StableEvaluator::unit_cdf(double v) const {
    const double a = std::abs(v);
    double upper;  // P(Z_1 > a)
    if (a <= grid_.radius) {
        upper = 0.5 - table_cdf_half(a);
    } else {
        const double u = std::pow(a, -alpha_);
        double s = 0.0;
        for (std::size_t k = tail_.size(); k-- > 0;) s = s * u + tail_[k] / ((k + 1) * alpha_);
        upper = s * u;
    }
    return v >= 0 ? 1.0 - upper : upper;
}

double StableEvaluator::density(double t, double x) const {
    check_time(t);
    const double s = std::pow(t, -inv_alpha_);
    return s * unit_density(x * s);
}

double StableEvaluator::derivative(double t, double x) const {
    check_time(t);
    const double s = std::pow(t, -inv_alpha_);
    double g, dg;
    unit_pair(x * s, g, dg);
    return s * s * dg;
}

double StableEvaluator::second_derivative(double t, double x) const {
    check_time(t);
    const double s = std::pow(t, -inv_alpha_);
    return s * s * s * unit_second_derivative(x * s);
}

double StableEvaluator::time_derivative(double t, double x) const {
    check_time(t);
    const double s = std::pow(t, -inv_alpha_);
    double g, dg;
    unit_pair(x * s, g, dg);
    return -(s * g + x * s * s * dg) / (alpha_ * t);
}

double StableEvaluator::cdf(double t, double x) const {
    check_time(t);
    return unit_cdf(x * std::pow(t, -inv_alpha_));
}

std::shared_ptr<const StableEvaluator> StableEvaluator::shared(double alpha) {
    check_alpha(alpha);
    static std::mutex mu;
    static std::map<double, std::shared_ptr<const StableEvaluator>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(alpha);
    if (it != cache.end()) return it->second;
    auto ev = std::make_shared<const StableEvaluator>(alpha);
    cache.emplace(alpha, ev);
    return ev;
}

void StableEvaluator::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write(kCacheMagic, sizeof kCacheMagic);
    os.write(reinterpret_cast<const char*>(&kCacheVersion), sizeof kCacheVersion);
    os.write(reinterpret_cast<const char*>(&alpha_), sizeof alpha_);
    os.write(reinterpret_cast<const char*>(&grid_.spacing), sizeof(double));
    os.write(reinterpret_cast<const char*>(&grid_.radius), sizeof(double));
    const std::int64_t n = cells_ + 1;
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const auto* v : {&g_, &d1_, &d2_, &d3_})
        os.write(reinterpret_cast<const char*>(v->data()), static_cast<std::streamsize>(n * sizeof(double)));
}

std::shared_ptr<const StableEvaluator> StableEvaluator::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    char magic[8];
    std::uint32_t version = 0;
    is.read(magic, sizeof magic);
    is.read(reinterpret_cast<char*>(&version), sizeof version);
    if (!is || std::memcmp(magic, kCacheMagic, sizeof magic) != 0 || version != kCacheVersion)
        throw std::runtime_error("not a stable-density cache file: " + path);
    std::shared_ptr<StableEvaluator> ev(new StableEvaluator());
    std::int64_t n = 0;
    is.read(reinterpret_cast<char*>(&ev->alpha_), sizeof(double));
    is.read(reinterpret_cast<char*>(&ev->grid_.spacing), sizeof(double));
    is.read(reinterpret_cast<char*>(&ev->grid_.radius), sizeof(double));
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || n < 2 || n > (1 << 26)) throw std::runtime_error("corrupt stable-density cache: " + path);
    check_alpha(ev->alpha_);
    ev->inv_alpha_ = 1.0 / ev->alpha_;
    ev->cells_ = static_cast<int>(n - 1);
    ev->inv_h_ = 1.0 / ev->grid_.spacing;
    for (auto* v : {&ev->g_, &ev->d1_, &ev->d2_, &ev->d3_}) {
        v->resize(n);
        is.read(reinterpret_cast<char*>(v->data()), static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!is) throw std::runtime_error("truncated stable-density cache: " + path);
    ev->build_series();
    ev->build_cumulative();
    return ev;
}

double sample_increment(double alpha, double t, Rng& rng) {
    check_alpha(alpha);
    check_time(t);
    const double scale = std::pow(t, 1.0 / alpha);
    const double u = rng.uniform();
    if (alpha == 1.0) return scale * std::tan(kPi * (u - 0.5));
    const double v = kPi * (u - 0.5);
    const double w = rng.exponential();
    const double x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
                     std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
    return scale * x;
}

}  // namespace cylheat
