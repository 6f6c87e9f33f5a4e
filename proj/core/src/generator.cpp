#include "cylheat/generator.hpp"

#include <algorithm>
#include <cmath>

#include "cylheat/errors.hpp"
#include "cylheat/quadrature.hpp"
#include "cylheat/stable.hpp"

namespace cylheat {

void PointLineFunction::line(int k, std::span<const double> x, std::span<const double> offsets,
                             std::span<double> out) const {
    std::vector<double> p(x.begin(), x.end());
    for (std::size_t j = 0; j < offsets.size(); ++j) {
        p[k] = x[k] + offsets[j];
        out[j] = f_(p);
    }
}

namespace {

struct AxisIntegral {
    double value = 0.0;      // int_0^inf delta(z) z^{-1-alpha} dz
    double magnitude = 0.0;  // same with |delta|
    double inner_half = 0.0;  // value with the inner cutoff halved
    bool converged = true;
    int evaluations = 0;
};

class AxisJob {
public:
    AxisJob(const LineFunction& f, int k, std::span<const double> x, double alpha)
        : f_(f), k_(k), x_(x), alpha_(alpha) {
        double zero = 0.0;
        f_.line(k_, x_, {&zero, 1}, {&f0_, 1});
        ++evaluations;
    }

    // delta(z) for each z
    std::vector<double> deltas(const std::vector<double>& z) {
        std::vector<double> off(2 * z.size()), val(2 * z.size());
        for (std::size_t j = 0; j < z.size(); ++j) {
            off[2 * j] = z[j];
            off[2 * j + 1] = -z[j];
        }
        f_.line(k_, x_, off, val);
        evaluations += static_cast<int>(off.size());
        std::vector<double> d(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) d[j] = val[2 * j] + val[2 * j + 1] - 2.0 * f0_;
        return d;
    }

    // int_0^eps delta z^{-1-alpha} with z = eps v^{1/(2-alpha)}; delta / z^2 is
    // held at its value at z_floor below that point.
    void inner(double eps, int nodes, double& value, double& magnitude) {
        const auto& g = quad::gauss_legendre(nodes);
        const double floor = 1e-3 * eps;
        std::vector<double> z(nodes);
        for (int q = 0; q < nodes; ++q) {
            const double v = 0.5 * (1.0 + g.nodes[q]);
            z[q] = std::max(floor, eps * std::pow(v, 1.0 / (2.0 - alpha_)));
        }
        const auto d = deltas(z);
        const double pre = std::pow(eps, 2.0 - alpha_) / (2.0 - alpha_);
        value = magnitude = 0.0;
        for (int q = 0; q < nodes; ++q) {
            const double Q = d[q] / (z[q] * z[q]);
            value += 0.5 * g.weights[q] * Q;
            magnitude += 0.5 * g.weights[q] * std::abs(Q);
        }
        value *= pre;
        magnitude *= pre;
    }

    // Adaptive Gauss-Kronrod over the panels, evaluated in batches.
    void middle(std::vector<std::pair<double, double>> panels, double rel_tol, double scale_hint, int max_rounds,
                double& value, double& magnitude, bool& converged) {
        const auto& gk = quad::kronrod15();
        value = magnitude = 0.0;
        converged = true;
        for (int round = 0; !panels.empty(); ++round) {
            std::vector<double> z;
            z.reserve(panels.size() * 15);
            for (const auto& [l, r] : panels)
                for (int j = 0; j < 15; ++j) z.push_back(0.5 * (l + r) + 0.5 * (r - l) * gk.kronrod.nodes[j]);
            const auto d = deltas(z);
            std::vector<std::pair<double, double>> next;
            std::vector<double> vk(panels.size()), vg(panels.size()), va(panels.size());
            double total_abs = magnitude + scale_hint;
            for (std::size_t p = 0; p < panels.size(); ++p) {
                const double h = 0.5 * (panels[p].second - panels[p].first);
                for (int j = 0; j < 15; ++j) {
                    const double zz = z[p * 15 + j];
                    const double f = d[p * 15 + j] * std::pow(zz, -1.0 - alpha_);
                    vk[p] += h * gk.kronrod.weights[j] * f;
                    vg[p] += h * gk.gauss[j] * f;
                    va[p] += h * gk.kronrod.weights[j] * std::abs(f);
                }
                total_abs += va[p];
            }
            for (std::size_t p = 0; p < panels.size(); ++p) {
                const double err = std::abs(vk[p] - vg[p]);
                if (err <= rel_tol * total_abs || round + 1 >= max_rounds) {
                    if (err > rel_tol * total_abs) converged = false;
                    value += vk[p];
                    magnitude += va[p];
                } else {
                    const double mid = 0.5 * (panels[p].first + panels[p].second);
                    next.emplace_back(panels[p].first, mid);
                    next.emplace_back(mid, panels[p].second);
                }
            }
            panels = std::move(next);
        }
    }

    double f0() const { return f0_; }
    int evaluations = 0;

private:
    const LineFunction& f_;
    int k_;
    std::span<const double> x_;
    double alpha_;
    double f0_ = 0.0;
};

std::vector<std::pair<double, double>> geometric_panels(double lo, double hi, std::vector<double> cuts) {
    std::vector<double> b;
    for (double z = lo; z < hi; z *= 2.0) b.push_back(z);
    b.push_back(hi);
    for (double c : cuts)
        if (c > lo && c < hi) b.push_back(c);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    std::vector<std::pair<double, double>> panels;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) panels.emplace_back(b[i], b[i + 1]);
    return panels;
}

AxisIntegral axis_integral(const LineFunction& f, int k, std::span<const double> x, double alpha, double scale,
                           const GeneratorScheme& s, const std::vector<double>& features) {
    AxisJob job(f, k, x, alpha);
    const double eps = s.epsilon_split * scale;
    const double R = s.tail_radius * scale;
    std::vector<double> cuts;
    for (double c : features) cuts.push_back(std::abs(c - x[k]));

    double in_v, in_a, in2_v, in2_a, mid_v, mid_a, gap_v, gap_a;
    bool ok1 = true, ok2 = true;
    job.inner(eps, s.inner_nodes, in_v, in_a);
    job.middle(geometric_panels(eps, R, cuts), s.rel_tol, in_a, s.max_rounds, mid_v, mid_a, ok1);
    job.inner(0.5 * eps, s.inner_nodes, in2_v, in2_a);
    job.middle({{0.5 * eps, eps}}, s.rel_tol, in_a + mid_a, s.max_rounds, gap_v, gap_a, ok2);

    double tail = -2.0 * job.f0() * std::pow(R, -alpha) / alpha;
    double tail_abs = std::abs(tail);
    if (f.tail_model() == TailModel::PowerLaw) {
        const double p = f.tail_exponent();
        const auto d = job.deltas({R});
        const double edge = d[0] + 2.0 * job.f0();
        const double extra = edge * std::pow(R, -alpha) / (p + alpha);
        tail += extra;
        tail_abs += std::abs(extra);
    }
    AxisIntegral out;
    out.value = in_v + mid_v + tail;
    out.inner_half = in2_v + gap_v + mid_v + tail;
    out.magnitude = in_a + mid_a + tail_abs;
    out.converged = ok1 && ok2;
    out.evaluations = job.evaluations;
    return out;
}

}  // namespace

GeneratorResult apply_frozen_generator(const LineFunction& f, std::span<const double> sigma,
                                       std::span<const double> x, double alpha, double scale,
                                       const GeneratorScheme& scheme,
                                       const std::vector<std::vector<double>>& features) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("alpha must lie in (0, 2)");
    if (!(scale > 0.0)) throw DomainError("generator scale must be positive");
    const int d = f.dim();
    if (static_cast<int>(sigma.size()) != d || static_cast<int>(x.size()) != d)
        throw DomainError("generator: dimension mismatch");
    const double A = generator_constant(alpha);
    GeneratorResult res;
    double v1 = 0.0, v2 = 0.0, mag = 0.0;
    bool ok = true;
    for (int k = 0; k < d; ++k) {
        static const std::vector<double> none;
        const auto& feat = k < static_cast<int>(features.size()) ? features[k] : none;
        const AxisIntegral ax = axis_integral(f, k, x, alpha, scale, scheme, feat);
        v1 += sigma[k] * ax.value;
        v2 += sigma[k] * ax.inner_half;
        mag += sigma[k] * ax.magnitude;
        ok = ok && ax.converged;
        res.evaluations += ax.evaluations;
    }
    res.value = A * v1;
    const double denom = std::max(std::abs(v1), mag);
    res.consistency = denom > 0.0 ? std::abs(v2 - v1) / denom : 0.0;
    res.flagged = !ok || res.consistency > scheme.consistency_tol;
    return res;
}

GeneratorResult apply_frozen_generator(const LineFunction& f, const CoefficientField& field,
                                       std::span<const double> y, std::span<const double> x, double scale,
                                       const GeneratorScheme& scheme) {
    const int d = field.dim();
    std::vector<double> sigma(d);
    for (int k = 0; k < d; ++k) sigma[k] = field.sigma(k, y);
    std::vector<std::vector<double>> features(d);
    for (int k = 0; k < d; ++k) features[k] = field.breakpoints(k);
    return apply_frozen_generator(f, sigma, x, field.params().alpha, scale, scheme, features);
}

}  // namespace cylheat
