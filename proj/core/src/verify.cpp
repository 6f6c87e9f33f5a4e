#include "cylheat/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "cylheat/errors.hpp"
#include "cylheat/quadrature.hpp"

namespace cylheat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

bool in_window(double t, const VerifyOptions& opt) { return t >= opt.t_lo * (1 - 1e-12) && t <= opt.t_hi * (1 + 1e-12); }

// Tabulated (non-auxiliary) times of a slice inside the check window.
std::vector<double> window_times(const SliceData& d, const VerifyOptions& opt) {
    std::vector<double> out;
    for (const auto& st : d.times)
        if (!st.fd_only && in_window(st.t, opt)) out.push_back(st.t);
    return out;
}

// Visit every lattice point of a slice at time t: callback(flat index, point).
void for_each_node(int d, int n, const std::function<double(int, int)>& node,
                   const std::function<void(std::size_t, const std::vector<double>&)>& f) {
    std::vector<int> idx(d, 0);
    std::vector<double> p(d);
    std::size_t flat = 0;
    while (true) {
        for (int k = 0; k < d; ++k) p[k] = node(k, idx[k]);
        f(flat++, p);
        int k = d - 1;
        while (k >= 0 && ++idx[k] == n) idx[k--] = 0;
        if (k < 0) break;
    }
}

double unit_product(const StableEvaluator& ev, double t, std::span<const double> x, std::span<const double> y) {
    double g = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) g *= ev.density(t, x[k] - y[k]);
    return g;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

CheckReport finish(CheckReport r, double base, const double* refined, double guard) {
    r.statistic = base;
    const bool stat_ok = std::isfinite(base) && (r.lower_bound ? base >= r.threshold : base <= r.threshold);
    r.refinement_delta = refined ? refinement_delta(base, *refined, r.threshold, r.lower_bound) : 0.0;
    const bool stable = !refined || r.refinement_delta <= guard;
    if (refined) r.note += (r.note.empty() ? "" : "; ") + std::string("refined statistic ") + fmt(*refined);
    if (!stable) r.note += "; refinement delta above guard";
    r.passed = stat_ok && stable;
    return r;
}

template <class F>
CheckReport run_pair(CheckReport r, const ParametrixTable& base, const ParametrixTable* refined, double guard, F&& stat) {
    const double b = stat(base, r);
    if (!refined) return finish(std::move(r), b, nullptr, guard);
    CheckReport scratch;
    const double s = stat(*refined, scratch);
    return finish(std::move(r), b, &s, guard);
}

void require_backward(const ParametrixTable& t) {
    if (t.backward.empty()) throw PreconditionError("table has no backward slices");
}

double comparability_stat(const ParametrixTable& tab, const VerifyOptions& opt, CheckReport& r) {
    require_backward(tab);
    double worst = 1.0;
    bool nonpositive = false;
    const auto& ev = *tab.ctx->ev;
    for (const auto& sl : tab.backward) {
        for (double t : window_times(sl.data(), opt)) {
            const auto p = sl.pA(t);
            for_each_node(sl.context().dim(), sl.lattice().size(), [&](int k, int j) { return sl.node(t, k, j); },
                          [&](std::size_t i, const std::vector<double>& x) {
                              for (std::size_t k = 0; k < x.size(); ++k)
                                  if (std::abs(x[k] - sl.y()[k]) > opt.comparability_radius) return;
                              if (!(p[i] > 0.0)) {
                                  nonpositive = true;
                                  return;
                              }
                              const double g = unit_product(ev, t, x, sl.y());
                              worst = std::max({worst, p[i] / g, g / p[i]});
                          });
        }
    }
    if (nonpositive) {
        r.note = "nonpositive p^A on the lattice";
        return kInf;
    }
    return worst;
}

}  // namespace

double refinement_delta(double base, double refined, double threshold, bool lower_bound) {
    if (!std::isfinite(base) || !std::isfinite(refined)) return kInf;
    double denom = std::abs(base);
    if (!lower_bound && std::isfinite(threshold)) denom = std::max(denom, threshold);
    if (denom == 0.0) return refined == 0.0 ? 0.0 : kInf;
    return std::abs(refined - base) / denom;
}

CheckReport check_comparability(const ParametrixTable& base, const ParametrixTable* refined, const VerifyOptions& opt) {
    CheckReport r;
    r.check_id = "comparability";
    r.probe_spec = "backward lattices, |x-y|_inf <= " + fmt(opt.comparability_radius) + ", t in [" + fmt(opt.t_lo) +
                   ", " + fmt(opt.t_hi) + "]";
    r.threshold = opt.comparability;
    return run_pair(std::move(r), base, refined, opt.refinement_guard,
                    [&](const ParametrixTable& t, CheckReport& rep) { return comparability_stat(t, opt, rep); });
}

CheckReport check_positivity(const ParametrixTable& base, const ParametrixTable* refined, const VerifyOptions&) {
    CheckReport r;
    r.check_id = "positivity";
    r.probe_spec = "all backward lattice nodes and times; statistic min (p^A + error estimate) / max p^A";
    r.threshold = 0.0;
    r.lower_bound = true;
    auto stat = [](const ParametrixTable& tab, CheckReport& rep) {
        require_backward(tab);
        double worst = kInf, raw = kInf;
        for (const auto& sl : tab.backward)
            for (const auto& st : sl.data().times) {
                const auto p = sl.pA(st.t);
                const auto e = sl.error_estimate(st.t);
                const double top = *std::max_element(p.begin(), p.end());
                for (std::size_t i = 0; i < p.size(); ++i) {
                    worst = std::min(worst, (p[i] + e[i]) / top);
                    raw = std::min(raw, p[i] / top);
                }
            }
        rep.note = "min p^A / max p^A = " + fmt(raw);
        return worst;
    };
    CheckReport out = run_pair(std::move(r), base, refined, kInf, stat);
    // positivity is structural: strictly positive, refinement not involved
    out.passed = out.statistic > 0.0;
    return out;
}

double normalization_residual(const ForwardSlice& slice, double t, std::span<const double> half_width) {
    return std::abs(slice.mass(t, half_width) - 1.0);
}

CheckReport check_normalization(const ParametrixTable& base, const ParametrixTable* refined, const VerifyOptions& opt) {
    CheckReport r;
    r.check_id = "normalization";
    r.probe_spec = "forward slices, all tabulated times, whole space with tail completion";
    r.threshold = opt.normalization;
    auto stat = [](const ParametrixTable& tab, CheckReport&) {
        if (tab.forward.empty()) throw PreconditionError("normalization needs forward slices");
        double worst = 0.0;
        for (const auto& sl : tab.forward) {
            const std::vector<double> inf(sl.context().dim(), kInf);
            for (const auto& st : sl.data().times)
                if (!st.fd_only) worst = std::max(worst, normalization_residual(sl, st.t, inf));
        }
        return worst;
    };
    return run_pair(std::move(r), base, refined, opt.refinement_guard, stat);
}

double chapman_kolmogorov_integral(const ForwardSlice& fwd, double t, const BackwardSlice& bwd, double s) {
    const auto& a = fwd.context();
    const auto& b = bwd.context();
    if (a.params().alpha != b.params().alpha || a.dim() != b.dim())
        throw PreconditionError("Chapman-Kolmogorov: slices belong to different models");
    if (a.scheme.space.extent != b.scheme.space.extent || a.scheme.space.nodes != b.scheme.space.nodes)
        throw PreconditionError("Chapman-Kolmogorov: lattice extents or sizes differ");
    const int d = a.dim();
    const auto& gl = quad::gauss_legendre(8);
    std::vector<std::vector<double>> nodes(d), weights(d);
    for (int k = 0; k < d; ++k) {
        const double h = std::min(fwd.at(t).scale[k], bwd.at(s).scale[k]);
        const double H = std::max(fwd.at(t).scale[k], bwd.at(s).scale[k]);
        std::vector<double> br;
        for (double c : {fwd.x()[k], bwd.y()[k]}) {
            br.push_back(c);
            for (double r = 0.125 * h; r <= 4096.0 * H; r *= 2.0) {
                br.push_back(c + r);
                br.push_back(c - r);
            }
        }
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
        for (std::size_t i = 0; i + 1 < br.size(); ++i) {
            const double m = 0.5 * (br[i] + br[i + 1]), w = 0.5 * (br[i + 1] - br[i]);
            if (w <= 0.0) continue;
            for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
                nodes[k].push_back(m + w * gl.nodes[q]);
                weights[k].push_back(w * gl.weights[q]);
            }
        }
    }
    const auto f = fwd.evaluate(t, nodes);
    const auto g = bwd.evaluate(s, nodes);
    std::vector<int> idx(d, 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double w = 1.0;
        for (int k = 0; k < d; ++k) w *= weights[k][idx[k]];
        sum += w * f[i] * g[i];
        for (int k = d - 1; k >= 0; --k) {
            if (++idx[k] < static_cast<int>(nodes[k].size())) break;
            idx[k] = 0;
        }
    }
    return sum;
}

CheckReport check_chapman_kolmogorov(const ParametrixTable& base, const ParametrixTable* refined,
                                     const VerifyOptions& opt) {
    CheckReport r;
    r.check_id = "chapman_kolmogorov";
    r.threshold = opt.chapman_kolmogorov;
    r.probe_spec = "s = " + fmt(opt.ck_s) + ", t = " + fmt(opt.ck_t) + ", " +
                   std::to_string(base.forward.size() * base.backward.size()) + " (x, y) pairs";
    auto stat = [&](const ParametrixTable& tab, CheckReport&) {
        require_backward(tab);
        if (tab.forward.empty()) throw PreconditionError("Chapman-Kolmogorov needs forward slices");
        double worst = 0.0;
        for (const auto& fw : tab.forward)
            for (const auto& bw : tab.backward) {
                const double lhs = chapman_kolmogorov_integral(fw, opt.ck_t, bw, opt.ck_s);
                const double rhs = bw.value(opt.ck_s + opt.ck_t, fw.x());
                worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
            }
        return worst;
    };
    return run_pair(std::move(r), base, refined, opt.refinement_guard, stat);
}

ParabolicProbe parabolic_probe(const BackwardSlice& slice, double t, std::span<const double> x) {
    const auto& ctx = slice.context();
    ParabolicProbe p;
    p.dt = slice.time_derivative(t, x);
    const auto line = slice.line_function(t);
    GeneratorScheme gs = ctx.scheme.generator;
    gs.rel_tol = std::max(gs.rel_tol, 1e-7);
    const auto res = apply_frozen_generator(*line, ctx.field, x, x, std::pow(t, 1.0 / ctx.params().alpha), gs);
    p.generator = res.value;
    p.consistency = res.consistency;
    return p;
}

CheckReport check_parabolic(const ParametrixTable& base, const ParametrixTable* refined, const VerifyOptions& opt) {
    CheckReport r;
    r.check_id = "parabolic";
    r.threshold = opt.parabolic;
    r.probe_spec = "t = " + fmt(opt.parabolic_time) + ", " +
                   std::to_string(base.backward.size() * opt.parabolic_offsets.size()) +
                   " probes x = y + offset; full generator at x";
    auto stat = [&](const ParametrixTable& tab, CheckReport&) {
        require_backward(tab);
        double worst = 0.0;
        const double t = opt.parabolic_time;
        for (const auto& sl : tab.backward)
            for (const auto& off : opt.parabolic_offsets) {
                std::vector<double> x(sl.y());
                for (std::size_t k = 0; k < x.size() && k < off.size(); ++k) x[k] += off[k];
                const auto p = parabolic_probe(sl, t, x);
                worst = std::max(worst, std::abs(p.dt - p.generator) / std::max(std::abs(p.dt), opt.parabolic_floor));
            }
        return worst;
    };
    return run_pair(std::move(r), base, refined, opt.refinement_guard, stat);
}

CheckReport check_holder(const ParametrixTable& base, const ParametrixTable* refined, double gamma,
                         const VerifyOptions& opt) {
    const double alpha = base.ctx->params().alpha;
    if (!(gamma > 0.0 && gamma < std::min(alpha, 1.0))) throw DomainError("Holder exponent must lie in (0, alpha ^ 1)");
    CheckReport r;
    r.check_id = "holder_gamma_" + fmt(gamma);
    r.threshold = kInf;
    r.probe_spec = "lattice pairs along each axis, |x-y|_inf <= " + fmt(opt.comparability_radius);
    auto stat = [&](const ParametrixTable& tab, CheckReport&) {
        require_backward(tab);
        const auto& ev = *tab.ctx->ev;
        double worst = 0.0;
        for (const auto& sl : tab.backward) {
            const int d = sl.context().dim(), n = sl.lattice().size();
            for (double t : window_times(sl.data(), opt)) {
                const auto p = sl.pA(t);
                std::vector<double> g(p.size());
                std::vector<char> inside(p.size());
                for_each_node(d, n, [&](int k, int j) { return sl.node(t, k, j); },
                              [&](std::size_t i, const std::vector<double>& x) {
                                  g[i] = unit_product(ev, t, x, sl.y());
                                  inside[i] = 1;
                                  for (int k = 0; k < d; ++k)
                                      if (std::abs(x[k] - sl.y()[k]) > opt.comparability_radius) inside[i] = 0;
                              });
                std::size_t stride = 1;
                for (int k = d - 1; k >= 0; --k) {
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        if (!inside[i]) continue;
                        const int ji = static_cast<int>((i / stride) % n);
                        for (int jj = ji + 1; jj < n; ++jj) {
                            const std::size_t i2 = i + (jj - ji) * stride;
                            if (!inside[i2]) continue;
                            const double h = std::abs(sl.node(t, k, jj) - sl.node(t, k, ji));
                            const double q = std::abs(p[i] - p[i2]) /
                                             (std::pow(h, gamma) * std::pow(t, -gamma / alpha) * (g[i] + g[i2]));
                            worst = std::max(worst, q);
                        }
                    }
                    stride *= n;
                }
            }
        }
        return worst;
    };
    return run_pair(std::move(r), base, refined, opt.refinement_guard, stat);
}

namespace {

struct GradientGrid {
    double bound = 0.0;  // max |grad p| t^{1/alpha} / p
    double fd = 0.0;     // max |grad - fd| / max |grad|
};

GradientGrid gradient_stats(const ParametrixTable& tab, const VerifyOptions& opt) {
    require_backward(tab);
    const double alpha = tab.ctx->params().alpha;
    if (!(alpha > 1.0)) throw UnsupportedError("gradient checks need alpha in (1, 2)");
    GradientGrid out;
    double gmax = 0.0, emax = 0.0;
    for (const auto& sl : tab.backward) {
        const int d = sl.context().dim();
        for (double t : window_times(sl.data(), opt)) {
            std::vector<std::vector<double>> pts(d);
            for (int k = 0; k < d; ++k)
                pts[k] = linspace(sl.y()[k] - opt.comparability_radius, sl.y()[k] + opt.comparability_radius, 21);
            const auto p = sl.evaluate(t, pts);
            std::vector<double> norm2(p.size(), 0.0);
            const double h = 1e-3 * std::pow(t, 1.0 / alpha);
            for (int k = 0; k < d; ++k) {
                const auto g = sl.gradient(t, k, pts);
                auto plus = pts, minus = pts;
                for (double& v : plus[k]) v += h;
                for (double& v : minus[k]) v -= h;
                const auto pp = sl.evaluate(t, plus), pm = sl.evaluate(t, minus);
                for (std::size_t i = 0; i < p.size(); ++i) {
                    norm2[i] += g[i] * g[i];
                    gmax = std::max(gmax, std::abs(g[i]));
                    emax = std::max(emax, std::abs(g[i] - (pp[i] - pm[i]) / (2.0 * h)));
                }
            }
            for (std::size_t i = 0; i < p.size(); ++i)
                out.bound = std::max(out.bound, std::sqrt(norm2[i]) * std::pow(t, 1.0 / alpha) / p[i]);
        }
    }
    out.fd = gmax > 0.0 ? emax / gmax : 0.0;
    return out;
}

}  // namespace

CheckReport check_gradient_bound(const ParametrixTable& base, const ParametrixTable* refined,
                                 const VerifyOptions& opt) {
    CheckReport r;
    r.check_id = "gradient_bound";
    r.threshold = kInf;
    r.probe_spec = "21^d grid on |x-y|_inf <= " + fmt(opt.comparability_radius) + ", window times";
    return run_pair(std::move(r), base, refined, opt.refinement_guard,
                    [&](const ParametrixTable& t, CheckReport&) { return gradient_stats(t, opt).bound; });
}

CheckReport check_gradient_fd(const ParametrixTable& base, const ParametrixTable* refined, const VerifyOptions& opt) {
    CheckReport r;
    r.check_id = "gradient_fd_match";
    r.threshold = opt.gradient_fd;
    r.probe_spec = "central differences with step 1e-3 t^{1/alpha} on the gradient grid";
    return run_pair(std::move(r), base, refined, opt.refinement_guard,
                    [&](const ParametrixTable& t, CheckReport&) { return gradient_stats(t, opt).fd; });
}

CheckReport check_near_diagonal(const ParametrixTable& base, const ParametrixTable* refined,
                                const VerifyOptions& opt) {
    CheckReport r;
    r.check_id = "near_diagonal_lower";
    r.threshold = opt.near_diagonal_floor;
    r.lower_bound = true;
    r.probe_spec = "11^d grid on |x-y|_inf <= t^{1/alpha}, window times";
    auto stat = [&](const ParametrixTable& tab, CheckReport&) {
        require_backward(tab);
        const double alpha = tab.ctx->params().alpha;
        double worst = kInf;
        for (const auto& sl : tab.backward) {
            const int d = sl.context().dim();
            for (double t : window_times(sl.data(), opt)) {
                const double rad = std::pow(t, 1.0 / alpha);
                std::vector<std::vector<double>> pts(d);
                for (int k = 0; k < d; ++k) pts[k] = linspace(sl.y()[k] - rad, sl.y()[k] + rad, 11);
                const auto p = sl.evaluate(t, pts);
                const double scale = std::pow(t, d / alpha);
                for (double v : p) worst = std::min(worst, v * scale);
            }
        }
        return worst;
    };
    return run_pair(std::move(r), base, refined, opt.refinement_guard, stat);
}

std::vector<CheckReport> run_checks(const ParametrixTable& base, const ParametrixTable* refined,
                                    const VerifyOptions& opt) {
    std::vector<CheckReport> out;
    const auto& p = base.ctx->params();
    out.push_back(check_positivity(base, refined, opt));
    out.push_back(check_comparability(base, refined, opt));
    if (!base.forward.empty()) {
        out.push_back(check_normalization(base, refined, opt));
        out.push_back(check_chapman_kolmogorov(base, refined, opt));
    }
    out.push_back(check_parabolic(base, refined, opt));
    out.push_back(check_holder(base, refined, p.beta / 2.0, opt));
    out.push_back(check_holder(base, refined, std::min(p.alpha, 1.0) / 2.0, opt));
    if (p.alpha > 1.0) {
        out.push_back(check_gradient_bound(base, refined, opt));
        out.push_back(check_gradient_fd(base, refined, opt));
    }
    out.push_back(check_near_diagonal(base, refined, opt));
    return out;
}

}  // namespace cylheat
