#include "cylheat/quadrature.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <numbers>

namespace cylheat::quad {

namespace {

Rule make_gauss_legendre(int n) {
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0, p1 = x;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace

const KronrodPair& kronrod15() {
    static const KronrodPair pair = [] {
        KronrodPair p;
        for (int j = 0; j < 15; ++j) {
            const int m = j < 8 ? j : 14 - j;
            const double sign = j < 7 ? -1.0 : 1.0;
            p.kronrod.nodes.push_back(sign * kXgk[m]);
            p.kronrod.weights.push_back(kWgk[m]);
            p.gauss.push_back(m % 2 == 1 ? kWg[m / 2] : (m == 7 ? kWg[3] : 0.0));
        }
        return p;
    }();
    return pair;
}

namespace {

void gk15(const std::function<double(double)>& f, double a, double b, double& value, double& err) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double rk = fc * kWgk[7];
    double rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const double s = f(c - dx) + f(c + dx);
        rk += kWgk[j] * s;
        if (j % 2 == 1) rg += kWg[j / 2] * s;
    }
    value = rk * h;
    err = std::abs((rk - rg) * h);
}

void gk_recurse(const std::function<double(double)>& f, double a, double b, double tol, double rel,
                int depth, Result& out) {
    double v = 0.0, e = 0.0;
    gk15(f, a, b, v, e);
    out.evaluations += 15;
    const double target = std::max(tol, rel * std::abs(v));
    if (e <= target || depth <= 0 || !(std::isfinite(v))) {
        if (e > target) out.converged = false;
        out.value += v;
        out.error += e;
        return;
    }
    const double m = 0.5 * (a + b);
    gk_recurse(f, a, m, 0.5 * tol, rel, depth - 1, out);
    gk_recurse(f, m, b, 0.5 * tol, rel, depth - 1, out);
}

}  // namespace

const Rule& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, Rule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
    return it->second;
}

Result gauss_kronrod(const std::function<double(double)>& f, double a, double b, double abs_tol,
                     double rel_tol, int max_depth) {
    Result out;
    if (a == b) return out;
    gk_recurse(f, a, b, abs_tol, rel_tol, max_depth, out);
    return out;
}

Result gauss_kronrod_pieces(const std::function<double(double)>& f, double a, double b,
                            std::vector<double> breaks, double abs_tol, double rel_tol) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::erase_if(breaks, [&](double x) { return !(x >= a && x <= b); });
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    Result out;
    const double per = abs_tol / std::max<std::size_t>(1, breaks.size() - 1);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        Result r = gauss_kronrod(f, breaks[i], breaks[i + 1], per, rel_tol);
        out.value += r.value;
        out.error += r.error;
        out.evaluations += r.evaluations;
        out.converged = out.converged && r.converged;
    }
    return out;
}

Result tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 int max_level) {
    // x = tanh(pi/2 sinh(u)), nodes measured from the nearer endpoint so
    // resolution near a singular endpoint is not lost to rounding.
    const double h = 0.5 * (b - a);
    const double half_pi = 0.5 * std::numbers::pi;
    const double umax = 6.0;  // nearest node ~1e-275 from the endpoint
    auto term = [&](double u) {
        const double s = half_pi * std::sinh(u);
        const double ch = std::cosh(s);
        const double w = half_pi * std::cosh(u) / (ch * ch);
        // 1 - tanh(s) without cancellation
        const double comp = 2.0 / (std::exp(2.0 * s) + 1.0);
        const double right = b - h * comp;
        const double left = a + h * comp;
        double acc = 0.0;
        if (right > a && right < b) acc += f(right);
        if (u != 0.0 && left > a && left < b) acc += f(left);
        return acc * w;
    };
    Result out;
    double step = 1.0;
    double sum = term(0.0);
    for (double u = step; u <= umax; u += step) sum += term(u);
    out.evaluations = 2 * static_cast<int>(umax / step) + 1;
    double est = sum * step * h, prev = est;
    out.converged = false;
    for (int level = 1; level <= max_level; ++level) {
        step *= 0.5;
        for (double u = step; u <= umax; u += 2.0 * step) sum += term(u);
        out.evaluations += static_cast<int>(umax / step);
        est = sum * step * h;
        out.error = std::abs(est - prev);
        if (level >= 3 && out.error <= rel_tol * std::abs(est)) {
            out.converged = true;
            break;
        }
        prev = est;
    }
    out.value = est;
    return out;
}

}  // namespace cylheat::quad
