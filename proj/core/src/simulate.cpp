#include "cylheat/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "cylheat/errors.hpp"
#include "cylheat/quadrature.hpp"
#include "cylheat/random.hpp"
#include "cylheat/stable.hpp"

namespace cylheat {

namespace {

void validate(const CoefficientField& field, const SimulationSpec& s) {
    if (s.n_steps < 1) throw PreconditionError("n_steps must be at least 1");
    if (s.n_paths < 1) throw PreconditionError("n_paths must be at least 1");
    if (!(s.t_final > 0.0)) throw DomainError("t_final must be positive");
    if (static_cast<int>(s.x0.size()) != field.dim()) throw DomainError("x0 has the wrong dimension");
}

PathEnsemble empty_ensemble(const CoefficientField& field, const SimulationSpec& spec) {
    PathEnsemble e;
    e.params = field.params();
    e.field = field.spec();
    e.spec = spec;
    e.terminal.resize(static_cast<std::size_t>(spec.n_paths) * field.dim());
    e.sigma_time.assign(field.dim(), 0.0);
    e.sigma_time_var.assign(field.dim(), 0.0);
    return e;
}

// Advances one path; `dz` holds the increments step by step (n_steps x d).
void advance(const CoefficientField& field, PathEnsemble& e, int path, const std::vector<double>& dz, int n_steps,
             double dt, std::vector<double>& sig_sum) {
    const int d = field.dim();
    std::vector<double> x(e.spec.x0), a(d);
    std::fill(sig_sum.begin(), sig_sum.end(), 0.0);
    for (int j = 0; j < n_steps; ++j) {
        for (int k = 0; k < d; ++k) {
            a[k] = field.a(k, x);
            sig_sum[k] += dt * std::pow(a[k], e.params.alpha);
        }
        for (int k = 0; k < d; ++k) {
            const double z = dz[j * d + k];
            if (e.spec.log_jumps && std::abs(z) >= e.spec.delta_min)
                e.jumps.push_back({path, j, k, z, a[k] * z, x});
        }
        for (int k = 0; k < d; ++k) x[k] += a[k] * dz[j * d + k];
    }
    std::copy(x.begin(), x.end(), e.terminal.begin() + static_cast<std::ptrdiff_t>(path) * d);
}

// Welford accumulation of the per-path sigma integrals.
struct Moments {
    std::vector<double> mean, m2;
    long n = 0;
    explicit Moments(int d) : mean(d, 0.0), m2(d, 0.0) {}
    void add(const std::vector<double>& v) {
        ++n;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double delta = v[k] - mean[k];
            mean[k] += delta / n;
            m2[k] += delta * (v[k] - mean[k]);
        }
    }
    void store(PathEnsemble& e) const {
        e.sigma_time = mean;
        for (std::size_t k = 0; k < m2.size(); ++k) e.sigma_time_var[k] = n > 1 ? m2[k] / (n - 1) : 0.0;
    }
};

}  // namespace

PathEnsemble euler_paths(const CoefficientField& field, const SimulationSpec& spec) {
    validate(field, spec);
    const int d = field.dim();
    const double alpha = field.params().alpha;
    const double dt = spec.t_final / spec.n_steps;
    PathEnsemble e = empty_ensemble(field, spec);
    std::vector<double> dz(static_cast<std::size_t>(spec.n_steps) * d), sig(d);
    Moments mom(d);
    for (int p = 0; p < spec.n_paths; ++p) {
        Rng rng = Rng::stream(spec.seed, p);
        for (double& z : dz) z = sample_increment(alpha, dt, rng);
        advance(field, e, p, dz, spec.n_steps, dt, sig);
        mom.add(sig);
    }
    mom.store(e);
    return e;
}

CoupledEnsembles euler_paths_coupled(const CoefficientField& field, const SimulationSpec& spec) {
    validate(field, spec);
    const int d = field.dim();
    const double alpha = field.params().alpha;
    const double dt = spec.t_final / (2 * spec.n_steps);
    SimulationSpec fine_spec = spec;
    fine_spec.n_steps = 2 * spec.n_steps;
    CoupledEnsembles out{empty_ensemble(field, fine_spec), empty_ensemble(field, spec)};
    std::vector<double> fine(static_cast<std::size_t>(fine_spec.n_steps) * d);
    std::vector<double> coarse(static_cast<std::size_t>(spec.n_steps) * d), sig(d);
    Moments mf(d), mc(d);
    for (int p = 0; p < spec.n_paths; ++p) {
        Rng rng = Rng::stream(spec.seed, p);
        for (double& z : fine) z = sample_increment(alpha, dt, rng);
        for (int j = 0; j < spec.n_steps; ++j)
            for (int k = 0; k < d; ++k) coarse[j * d + k] = fine[2 * j * d + k] + fine[(2 * j + 1) * d + k];
        advance(field, out.fine, p, fine, fine_spec.n_steps, dt, sig);
        mf.add(sig);
        advance(field, out.coarse, p, coarse, spec.n_steps, 2.0 * dt, sig);
        mc.add(sig);
    }
    mf.store(out.fine);
    mc.store(out.coarse);
    return out;
}

std::size_t BinSpec::count() const {
    std::size_t n = 1;
    for (int b : bins) n *= static_cast<std::size_t>(b);
    return n;
}

Histogram empirical_density(const PathEnsemble& ens, const BinSpec& bins) {
    if (ens.size() == 0) throw PreconditionError("empirical density of an empty ensemble");
    const int d = ens.dim();
    if (static_cast<int>(bins.lo.size()) != d || static_cast<int>(bins.hi.size()) != d ||
        static_cast<int>(bins.bins.size()) != d)
        throw DomainError("bin specification has the wrong dimension");
    Histogram h;
    h.spec = bins;
    h.n = static_cast<long>(ens.size());
    h.counts.assign(bins.count(), 0);
    for (std::size_t p = 0; p < ens.size(); ++p) {
        std::size_t flat = 0;
        bool inside = true;
        for (int k = 0; k < d && inside; ++k) {
            const double v = ens.terminal_at(p, k);
            const double f = (v - bins.lo[k]) / (bins.hi[k] - bins.lo[k]) * bins.bins[k];
            if (!(f >= 0.0 && f < bins.bins[k])) inside = false;
            else flat = flat * bins.bins[k] + static_cast<std::size_t>(f);
        }
        if (inside) ++h.counts[flat];
    }
    for (long c : h.counts) {
        const double p = static_cast<double>(c) / h.n;
        h.prob.push_back(p);
        h.se.push_back(std::sqrt(p * (1.0 - p) / h.n));
    }
    return h;
}

std::vector<double> product_bin_masses(const BinSpec& bins, const std::vector<std::function<double(double)>>& cdf) {
    const int d = static_cast<int>(bins.bins.size());
    std::vector<std::vector<double>> m(d);
    for (int k = 0; k < d; ++k)
        for (int j = 0; j < bins.bins[k]; ++j) m[k].push_back(cdf[k](bins.edge(k, j + 1)) - cdf[k](bins.edge(k, j)));
    std::vector<double> out(bins.count());
    std::vector<int> idx(d, 0);
    for (double& v : out) {
        v = 1.0;
        for (int k = 0; k < d; ++k) v *= m[k][idx[k]];
        for (int k = d - 1; k >= 0; --k) {
            if (++idx[k] < bins.bins[k]) break;
            idx[k] = 0;
        }
    }
    return out;
}

std::vector<double> slice_bin_masses(const ForwardSlice& slice, double t, const BinSpec& bins) {
    const int d = static_cast<int>(bins.bins.size());
    const auto& gl = quad::gauss_legendre(8);
    const int q = static_cast<int>(gl.nodes.size());
    std::vector<std::vector<double>> pts(d), wts(d);
    for (int k = 0; k < d; ++k)
        for (int j = 0; j < bins.bins[k]; ++j) {
            const double a = bins.edge(k, j), b = bins.edge(k, j + 1);
            for (int i = 0; i < q; ++i) {
                pts[k].push_back(0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i]);
                wts[k].push_back(0.5 * (b - a) * gl.weights[i]);
            }
        }
    const auto v = slice.evaluate(t, pts);
    std::vector<double> out(bins.count(), 0.0);
    std::vector<int> idx(d, 0);
    for (double f : v) {
        double w = f;
        std::size_t flat = 0;
        for (int k = 0; k < d; ++k) {
            w *= wts[k][idx[k]];
            flat = flat * bins.bins[k] + idx[k] / q;
        }
        out[flat] += w;
        for (int k = d - 1; k >= 0; --k) {
            if (++idx[k] < static_cast<int>(pts[k].size())) break;
            idx[k] = 0;
        }
    }
    return out;
}

BinComparison compare_bins(const Histogram& h, const std::vector<double>& mass, double n_sigma) {
    if (mass.size() != h.counts.size()) throw DomainError("bin masses do not match the histogram");
    BinComparison c;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (h.counts[i] == 0) continue;
        ++c.occupied;
        const double m = std::clamp(mass[i], 0.0, 1.0);
        const double se = std::sqrt(m * (1.0 - m) / h.n);
        const double z = se > 0.0 ? std::abs(h.prob[i] - m) / se : std::numeric_limits<double>::infinity();
        c.max_z = std::max(c.max_z, z);
        if (z <= n_sigma) ++c.within;
    }
    c.fraction = c.occupied ? static_cast<double>(c.within) / c.occupied : 0.0;
    return c;
}

HalvingComparison compare_halving(const Histogram& fine, const Histogram& coarse) {
    if (fine.counts.size() != coarse.counts.size()) throw DomainError("histograms differ in shape");
    HalvingComparison c;
    for (std::size_t i = 0; i < fine.counts.size(); ++i) {
        const double se = std::max(fine.se[i], coarse.se[i]);
        const double diff = std::abs(fine.prob[i] - coarse.prob[i]);
        if (diff == 0.0) continue;
        const double z = se > 0.0 ? diff / se : std::numeric_limits<double>::infinity();
        c.max_shift = std::max(c.max_shift, z);
        if (z > 1.0) ++c.bins_over;
    }
    return c;
}

Interval wilson_interval(long k, long n, double z) {
    if (n <= 0) throw PreconditionError("Wilson interval needs n > 0");
    const double p = static_cast<double>(k) / n, z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

ExitTable exit_time_stats(const CoefficientField& field, const ExitSpec& spec) {
    const int d = field.dim();
    if (static_cast<int>(spec.x0.size()) != d) throw DomainError("x0 has the wrong dimension");
    if (spec.times.empty() || spec.radii.empty()) throw PreconditionError("exit grid is empty");
    if (spec.n_steps < 1 || spec.n_paths < 1) throw PreconditionError("exit simulation needs steps and paths");
    const double alpha = field.params().alpha;
    const double t_max = *std::max_element(spec.times.begin(), spec.times.end());
    const double dt = t_max / spec.n_steps;
    const int nr = static_cast<int>(spec.radii.size());
    // first step index at which each radius is reached, n_steps + 1 if never
    std::vector<std::vector<int>> first(nr, std::vector<int>(spec.n_paths));
    std::vector<double> x(d), a(d);
    for (int p = 0; p < spec.n_paths; ++p) {
        Rng rng = Rng::stream(spec.seed, p);
        x = spec.x0;
        for (int r = 0; r < nr; ++r) first[r][p] = spec.n_steps + 1;
        double sup = 0.0;
        for (int j = 1; j <= spec.n_steps; ++j) {
            for (int k = 0; k < d; ++k) a[k] = field.a(k, x);
            for (int k = 0; k < d; ++k) x[k] += a[k] * sample_increment(alpha, dt, rng);
            for (int k = 0; k < d; ++k) sup = std::max(sup, std::abs(x[k] - spec.x0[k]));
            for (int r = 0; r < nr; ++r)
                if (first[r][p] > spec.n_steps && sup >= spec.radii[r]) first[r][p] = j;
        }
    }
    ExitTable out;
    out.n = spec.n_paths;
    double su = 0.0, suu = 0.0;
    for (double t : spec.times)
        for (int r = 0; r < nr; ++r) {
            ExitRow row;
            row.t = t;
            row.R = spec.radii[r];
            row.u = t / std::pow(row.R, alpha);
            const int last = static_cast<int>(std::floor(t / dt + 1e-9));
            row.exits = std::count_if(first[r].begin(), first[r].end(), [&](int j) { return j <= last; });
            row.p_hat = static_cast<double>(row.exits) / spec.n_paths;
            row.ci = wilson_interval(row.exits, spec.n_paths, spec.z);
            su += row.p_hat * row.u;
            suu += row.u * row.u;
            out.c_envelope = std::max(out.c_envelope, row.ci.lo / row.u);
            out.rows.push_back(row);
        }
    out.c_fit = su / suu;
    out.all_below = std::all_of(out.rows.begin(), out.rows.end(),
                                [&](const ExitRow& r) { return r.ci.lo <= out.c_fit * r.u; });
    return out;
}

LevyCheck levy_system_check(const PathEnsemble& ens, const JumpBand& f) {
    const int d = ens.dim();
    if (f.coord < 0 || f.coord >= d) throw DomainError("jump band coordinate out of range");
    if (!(f.lo > 0.0 && f.hi > f.lo)) throw DomainError("jump band needs 0 < lo < hi");
    if (!ens.spec.log_jumps) throw PreconditionError("ensemble was simulated without a jump log");
    // |Delta Z| = |Delta X| / a >= lo / b2 must be covered by the log threshold
    if (f.lo / ens.params.b2 < ens.spec.delta_min)
        throw PreconditionError("jump band reaches below the jump_log threshold");
    const double alpha = ens.params.alpha;
    const long n = static_cast<long>(ens.size());
    std::vector<int> per_path(n, 0);
    for (const auto& j : ens.jumps)
        if (j.coord == f.coord && std::abs(j.dx) >= f.lo && std::abs(j.dx) <= f.hi) ++per_path[j.path];
    double s = 0.0, s2 = 0.0;
    for (int c : per_path) {
        s += c;
        s2 += static_cast<double>(c) * c;
    }
    LevyCheck out;
    out.lhs = s / n;
    out.lhs_se = std::sqrt(std::max(0.0, s2 / n - out.lhs * out.lhs) / n);
    // J(x, band) = A_alpha sigma_k(x) 2 int_lo^hi w^{-1-alpha} dw
    const double band = generator_constant(alpha) * 2.0 * (std::pow(f.lo, -alpha) - std::pow(f.hi, -alpha)) / alpha;
    out.rhs = band * ens.sigma_time[f.coord];
    out.rhs_se = band * std::sqrt(ens.sigma_time_var[f.coord] / n);
    out.relative_gap = out.rhs > 0.0 ? std::abs(out.lhs - out.rhs) / out.rhs : std::abs(out.lhs);
    return out;
}

}  // namespace cylheat
