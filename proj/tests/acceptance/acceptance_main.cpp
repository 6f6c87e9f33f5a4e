// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cylheat/config.hpp"
#include "cylheat/simulate.hpp"
#include "cylheat/stable.hpp"
#include "cylheat/verify.hpp"

using namespace cylheat;

namespace {

const std::string kConfigs = std::string(CYLHEAT_SOURCE_DIR) + "/configs/";

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string describe(const CheckReport& r) {
    return r.check_id + " " + num(r.statistic) + (r.lower_bound ? " >= " : " <= ") + num(r.threshold) +
           " (refinement delta " + num(r.refinement_delta) + ")";
}

// Base and refined tables for one config, built on first use.
struct TablePair {
    RunConfig cfg;
    bool forward = true;
    std::optional<ParametrixTable> base, refined;

    ParametrixTable build(const QuadratureScheme& scheme) const {
        TableLayout layout = cfg.layout;
        layout.series.time_derivative = forward;
        if (!forward) layout.forward_points.clear();
        auto ctx = std::make_shared<ParametrixContext>(cfg.make_field(), scheme);
        return build_table(ctx, layout);
    }
    const ParametrixTable& get_base() {
        if (!base) base = build(cfg.scheme);
        return *base;
    }
    const ParametrixTable& get_refined() {
        if (!refined) refined = build(cfg.scheme.refined());
        return *refined;
    }
};

struct Tables {
    TablePair smooth1{load_config(kConfigs + "desk_smooth_periodic.yaml"), true};
    TablePair smooth15{load_config(kConfigs + "desk_alpha_1_5.yaml"), false};
    TablePair constant{load_config(kConfigs + "constant.yaml"), true};
};

Outcome cauchy_exactness() {
    const auto ev = StableEvaluator::shared(1.0);
    double worst = 0.0;
    for (double t : {0.25, 1.0, 4.0})
        for (int i = 0; i <= 2000; ++i) {
            const double x = -50.0 * t + 100.0 * t * i / 2000;
            worst = std::max(worst, std::abs(ev->density(t, x) - t / (M_PI * (t * t + x * x))));
        }
    return {worst <= 1e-8, "max abs error " + num(worst) + " <= 1e-08"};
}

Outcome stable_normalization() {
    double worst_mass = 0.0, worst_scaling = 0.0;
    boost::math::quadrature::tanh_sinh<double> ts;
    for (double alpha : {0.6, 1.0, 1.5}) {
        const auto ev = StableEvaluator::shared(alpha);
        for (double t : {0.25, 1.0, 4.0}) {
            auto f = [&](double u) {
                const double q = 1.0 - u * u;
                return ev->density(t, u / q) * (1.0 + u * u) / (q * q);
            };
            worst_mass = std::max(worst_mass, std::abs(ts.integrate(f, -1.0, 1.0) - 1.0));
            const double s = std::pow(t, 1.0 / alpha);
            for (double x : {-7.0, -1.0, 0.0, 0.4, 3.0, 80.0}) {
                const double g = ev->density(t, x), h = ev->density(1.0, x / s) / s;
                worst_scaling = std::max(worst_scaling, std::abs(g - h) / std::max(g, 1e-300));
            }
        }
    }
    return {worst_mass <= 1e-6 && worst_scaling <= 1e-10,
            "mass residual " + num(worst_mass) + " <= 1e-06, scaling " + num(worst_scaling) + " <= 1e-10"};
}

Outcome degeneracy() {
    const auto p = ModelParams::make(1.0, 2, 0.25, 2.0, 2.0, 1.0, 1.0);
    auto ctx = std::make_shared<ParametrixContext>(CoefficientField::constant(p, 2.0));
    const std::vector<double> y = {0.5, -0.5};
    const std::vector<double> times = {0.25, 0.5, 1.0};
    const BackwardSlice s(ctx, y, times);
    double qmax = 0.0, pmax = 0.0;
    const int n = s.lattice().size();
    for (double t : times) {
        for (double v : s.q(t)) qmax = std::max(qmax, std::abs(v));
        const auto pa = s.pA(t);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double x0 = s.node(t, 0, i), x1 = s.node(t, 1, j);
                qmax = std::max(qmax, std::abs(q0(*ctx, t, std::vector<double>{x0, x1}, y)));
                // (1/a) g_t(u/a) with a = 2 is the Cauchy density of scale 2t
                auto g = [t](double u) { return 2 * t / (M_PI * (4 * t * t + u * u)); };
                const double ref = g(x0 - y[0]) * g(x1 - y[1]);
                pmax = std::max(pmax, std::abs(pa[i * n + j] - ref));
            }
    }
    return {qmax <= 1e-10 && pmax <= 1e-8, "q grid max " + num(qmax) + " <= 1e-10, |p^A - product| " + num(pmax) +
                                               " <= 1e-08"};
}

Outcome series_behavior(Tables& tabs) {
    const auto& tab = tabs.smooth1.get_base();
    bool ok = true;
    int worst_used = 0;
    double worst_C = 0.0, worst_rem = 0.0;
    for (const auto& sl : tab.backward) {
        const auto& s = sl.summary();
        for (std::size_t k = 2; k < s.term_norms.size(); ++k) ok = ok && s.term_norms[k] < s.term_norms[k - 1];
        double total = 0.0;
        for (double c : s.term_norms) total += c;
        worst_used = std::max(worst_used, s.n_used);
        worst_C = std::max(worst_C, s.ratio_constant);
        worst_rem = std::max(worst_rem, s.remainder / total);
    }
    ok = ok && worst_used <= 4 && std::isfinite(worst_C) && worst_rem <= 1e-4;
    return {ok, "strictly decreasing for n >= 1, N_used " + std::to_string(worst_used) +
                    " <= 4, factorial-law constant " + num(worst_C) + ", relative remainder " + num(worst_rem) +
                    " <= 1e-04"};
}

Outcome comparability(Tables& tabs) {
    Outcome o{true, ""};
    for (auto* pair : {&tabs.smooth1, &tabs.smooth15}) {
        const auto& base = pair->get_base();
        const auto& ref = pair->get_refined();
        const auto c = check_comparability(base, &ref, pair->cfg.verify);
        const auto p = check_positivity(base, &ref, pair->cfg.verify);
        const bool ok = c.passed && std::isfinite(c.statistic) && c.statistic >= 1.0 && p.passed;
        o.passed = o.passed && ok;
        o.detail += (o.detail.empty() ? "" : "; ") + std::string("alpha ") + num(pair->cfg.alpha) + ": c1 " +
                    num(c.statistic) + " (refinement delta " + num(c.refinement_delta) + " <= 0.25), min positivity " +
                    num(p.statistic) + " > 0";
    }
    return o;
}

Outcome semigroup(Tables& tabs) {
    auto& s1 = tabs.smooth1;
    const auto n = check_normalization(s1.get_base(), &s1.get_refined(), s1.cfg.verify);
    const auto ck = check_chapman_kolmogorov(s1.get_base(), &s1.get_refined(), s1.cfg.verify);
    const std::size_t pairs = s1.get_base().forward.size() * s1.get_base().backward.size();
    VerifyOptions exact = tabs.constant.cfg.verify;
    exact.normalization = 1e-6;
    exact.chapman_kolmogorov = 1e-3;
    const auto cn = check_normalization(tabs.constant.get_base(), nullptr, exact);
    const auto cck = check_chapman_kolmogorov(tabs.constant.get_base(), nullptr, exact);
    return {n.passed && ck.passed && pairs >= 20 && cn.passed && cck.passed,
            describe(n) + "; " + describe(ck) + " on " + std::to_string(pairs) + " pairs; constant " + describe(cn) +
                "; constant " + describe(cck)};
}

Outcome parabolic(Tables& tabs) {
    auto& s1 = tabs.smooth1;
    const auto r = check_parabolic(s1.get_base(), &s1.get_refined(), s1.cfg.verify);
    const std::size_t probes = s1.get_base().backward.size() * s1.cfg.verify.parabolic_offsets.size();
    VerifyOptions exact = tabs.constant.cfg.verify;
    exact.parabolic = 1e-3;
    const auto c = check_parabolic(tabs.constant.get_base(), nullptr, exact);
    return {r.passed && probes >= 20 && c.passed,
            describe(r) + " on " + std::to_string(probes) + " probes; constant " + describe(c)};
}

Outcome holder_gradient(Tables& tabs) {
    Outcome o{true, ""};
    for (auto* pair : {&tabs.smooth1, &tabs.smooth15}) {
        const double gamma = pair->cfg.beta / 2;
        const auto h = check_holder(pair->get_base(), &pair->get_refined(), gamma, pair->cfg.verify);
        o.passed = o.passed && h.passed && std::isfinite(h.statistic);
        o.detail += (o.detail.empty() ? "" : "; ") + std::string("alpha ") + num(pair->cfg.alpha) + " c2 (gamma " +
                    num(gamma) + ") " + num(h.statistic) + " (refinement delta " + num(h.refinement_delta) + ")";
    }
    auto& s15 = tabs.smooth15;
    const auto g = check_gradient_bound(s15.get_base(), &s15.get_refined(), s15.cfg.verify);
    const auto fd = check_gradient_fd(s15.get_base(), &s15.get_refined(), s15.cfg.verify);
    o.passed = o.passed && g.passed && std::isfinite(g.statistic) && fd.passed;
    o.detail += "; c3 " + num(g.statistic) + " (refinement delta " + num(g.refinement_delta) + "); " + describe(fd);
    return o;
}

// Shared ensembles of the Monte Carlo criteria.
struct Ensembles {
    std::optional<PathEnsemble> unit;
    std::optional<CoupledEnsembles> variable;
    RunConfig cfg = load_config(kConfigs + "desk_smooth_periodic.yaml");

    const PathEnsemble& get_unit() {
        if (!unit) {
            const auto p = ModelParams::make(1.0, 2, 0.25, 1.0, 1.0, 1.0, 1.0);
            SimulationSpec s;
            s.x0 = {0.0, 0.0};
            s.n_paths = 100000;
            s.n_steps = 64;
            s.seed = 20;
            s.log_jumps = true;
            unit = euler_paths(CoefficientField::constant(p, 1.0), s);
        }
        return *unit;
    }
    const CoupledEnsembles& get_variable() {
        if (!variable) variable = euler_paths_coupled(cfg.make_field(), cfg.simulate.paths);
        return *variable;
    }
};

Outcome monte_carlo(Tables& tabs, Ensembles& ens) {
    // A = I: each coordinate of X_1 is standard Cauchy, so P([-1,1]^2) = 1/4
    const auto& unit = ens.get_unit();
    const auto box = empirical_density(unit, BinSpec{{-1, -1}, {1, 1}, {1, 1}});
    const double se = std::sqrt(0.25 * 0.75 / box.n);
    const double z = std::abs(box.prob[0] - 0.25) / se;

    const auto& sc = ens.cfg.simulate;
    const auto& pair = ens.get_variable();
    const auto hf = empirical_density(pair.fine, sc.bins);
    const auto hc = empirical_density(pair.coarse, sc.bins);
    ForwardSlice fw(tabs.smooth1.get_base().ctx, sc.paths.x0, {sc.paths.t_final});
    const auto cmp = compare_bins(hc, slice_bin_masses(fw, sc.paths.t_final, sc.bins));
    const auto half = compare_halving(hf, hc);
    return {z <= 3.0 && cmp.fraction >= 0.95 && half.max_shift <= 1.0,
            "unit box z " + num(z) + " <= 3; " + std::to_string(cmp.within) + " of " + std::to_string(cmp.occupied) +
                " bins within 3 sigma (" + num(cmp.fraction) + " >= 0.95); halving shift " + num(half.max_shift) +
                " <= 1 sigma"};
}

Outcome exit_and_levy(Ensembles& ens) {
    const auto ex = exit_time_stats(ens.cfg.make_field(), ens.cfg.simulate.exit);
    const auto lv = levy_system_check(ens.get_unit(), JumpBand{0, 1.0, 2.0});
    const auto lv_var = levy_system_check(ens.get_variable().coarse, ens.cfg.simulate.band);
    const bool ok = ex.c_fit > 0.0 && ex.all_below && std::abs(lv.rhs - 1.0 / M_PI) <= 1e-12 &&
                    lv.relative_gap <= 0.05 && lv_var.relative_gap <= 0.05;
    return {ok, "exit c " + num(ex.c_fit) + " > 0, Wilson lower ends below c t/R^alpha: " +
                    (ex.all_below ? "yes" : "no") + "; unit band rhs " + num(lv.rhs) + " gap " +
                    num(lv.relative_gap) + " <= 0.05; variable field gap " + num(lv_var.relative_gap) + " <= 0.05"};
}

Outcome near_diagonal(Tables& tabs) {
    Outcome o{true, ""};
    for (auto* pair : {&tabs.smooth1, &tabs.smooth15}) {
        const auto r = check_near_diagonal(pair->get_base(), &pair->get_refined(), pair->cfg.verify);
        o.passed = o.passed && r.passed;
        o.detail += (o.detail.empty() ? "" : "; ") + std::string("alpha ") + num(pair->cfg.alpha) + " " + describe(r);
    }
    return o;
}

}  // namespace

int main() {
    std::unique_ptr<Tables> tabs;
    Ensembles ens;
    auto tables = [&]() -> Tables& {
        if (!tabs) tabs = std::make_unique<Tables>();
        return *tabs;
    };
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"cauchy exactness", cauchy_exactness},
        {"stable normalization and scaling", stable_normalization},
        {"constant-coefficient degeneracy", degeneracy},
        {"series behavior", [&] { return series_behavior(tables()); }},
        {"two-sided comparability and positivity", [&] { return comparability(tables()); }},
        {"semigroup identities", [&] { return semigroup(tables()); }},
        {"parabolic equation", [&] { return parabolic(tables()); }},
        {"holder and gradient estimates", [&] { return holder_gradient(tables()); }},
        {"monte carlo cross-validation", [&] { return monte_carlo(tables(), ens); }},
        {"exit time and levy system", [&] { return exit_and_levy(ens); }},
        {"near-diagonal lower bound", [&] { return near_diagonal(tables()); }},
    };
    int failed = 0, index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s [%d] %s: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", index, name.c_str(), o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        if (!o.passed) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
