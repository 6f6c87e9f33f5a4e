#include "cylheat/pipeline.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include "cylheat/config.hpp"
#include "cylheat/errors.hpp"
#include "cylheat/stable.hpp"
#include "json.hpp"

namespace cylheat {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Record {
    std::string stage, check_id, probe;
    double statistic = 0.0, threshold = 0.0;
    bool lower_bound = false, passed = false;
    double refinement_delta = 0.0;
    std::string note;
};

json num(double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : (v < 0 ? "-inf" : "nan")); }

json to_json(const Record& r) {
    return {{"stage", r.stage},         {"check_id", r.check_id},  {"probe", r.probe},
            {"statistic", num(r.statistic)}, {"threshold", num(r.threshold)}, {"lower_bound", r.lower_bound},
            {"passed", r.passed},       {"refinement_delta", num(r.refinement_delta)}, {"note", r.note}};
}

Record from_check(const CheckReport& c) {
    return {"verify", c.check_id, c.probe_spec, c.statistic, c.threshold, c.lower_bound, c.passed,
            c.refinement_delta, c.note};
}

Record upper(std::string stage, std::string id, std::string probe, double stat, double thr) {
    return {std::move(stage), std::move(id), std::move(probe), stat, thr, false, std::isfinite(stat) && stat <= thr, 0.0, ""};
}

Record lower(std::string stage, std::string id, std::string probe, double stat, double thr) {
    return {std::move(stage), std::move(id), std::move(probe), stat, thr, true, std::isfinite(stat) && stat >= thr, 0.0, ""};
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Csv {
public:
    Csv(const fs::path& p, const std::vector<std::string>& header) : os_(p) {
        if (!os_) throw ConfigError("cannot write " + p.string());
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << "\n";
    }
    Csv& operator<<(double v) { return cell(g17(v)); }
    Csv& operator<<(long v) { return cell(std::to_string(v)); }
    Csv& operator<<(int v) { return cell(std::to_string(v)); }
    Csv& operator<<(const std::string& v) { return cell(v); }
    void end() {
        os_ << "\n";
        first_ = true;
    }

private:
    Csv& cell(const std::string& s) {
        os_ << (first_ ? "" : ",") << s;
        first_ = false;
        return *this;
    }
    std::ofstream os_;
    bool first_ = true;
};

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    os << j.dump(2) << "\n";
}

json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw PreconditionError("missing stage output " + p.string() + "; run that stage first");
    return json::parse(is);
}

void write_stage(const fs::path& dir, const std::string& stage, const std::vector<Record>& recs, json extra = {}) {
    json j = {{"stage", stage}};
    json arr = json::array();
    bool ok = true;
    for (const auto& r : recs) {
        arr.push_back(to_json(r));
        ok = ok && r.passed;
    }
    j["records"] = arr;
    j["passed"] = ok;
    if (!extra.is_null()) j["details"] = std::move(extra);
    write_json(dir / (stage + ".json"), j);
    Csv csv(dir / (stage + "_checks.csv"), {"check_id", "statistic", "threshold", "passed", "refinement_delta"});
    for (const auto& r : recs) {
        csv << r.check_id << r.statistic << r.threshold << std::string(r.passed ? "true" : "false")
            << r.refinement_delta;
        csv.end();
    }
}

bool all_passed(const std::vector<Record>& recs) {
    for (const auto& r : recs)
        if (!r.passed) return false;
    return true;
}

// ---------------------------------------------------------------- density

int stage_density(const RunConfig& cfg, const fs::path& dir) {
    const auto ev = StableEvaluator::shared(cfg.alpha);
    const double a = cfg.alpha;
    Csv csv(dir / "density.csv", {"t", "x", "value", "error_estimate", "reference", "delta"});
    double worst = 0.0;
    for (double t : cfg.density.times) {
        const double sc = std::pow(t, 1.0 / a);
        for (int i = 0; i < cfg.density.points; ++i) {
            const double x = sc * cfg.density.x_max * (-1.0 + 2.0 * i / (cfg.density.points - 1));
            const double v = ev->density(t, x);
            // alpha = 1: Cauchy closed form; otherwise the scaling identity
            const double ref = a == 1.0 ? t / (M_PI * (t * t + x * x)) : ev->unit_density(x / sc) / sc;
            worst = std::max(worst, std::abs(v - ref));
            csv << t << x << v << std::abs(v - ref) << ref << v - ref;
            csv.end();
        }
    }
    std::vector<Record> recs;
    if (a == 1.0)
        recs.push_back(upper("density", "cauchy_exactness", "|x| <= x_max t, density.times", worst, 1e-8));
    else
        recs.push_back(upper("density", "scaling_identity", "|x| <= x_max t^{1/alpha}, density.times", worst, 1e-10));
    write_stage(dir, "density", recs);
    return all_passed(recs) ? kExitPass : kExitCheckFailure;
}

// ---------------------------------------------------------------- parametrix

bool same_setup(const ParametrixTable& tab, const RunConfig& cfg, const QuadratureScheme& scheme) {
    const auto& p = tab.ctx->params();
    const auto q = cfg.params();
    const auto& f = tab.ctx->field.spec();
    const auto& s = tab.ctx->scheme;
    if (p.alpha != q.alpha || p.d != q.d || p.beta != q.beta || p.beta_declared != q.beta_declared || p.b1 != q.b1 ||
        p.b2 != q.b2 || p.b3 != q.b3 || p.T != q.T)
        return false;
    const auto g = cfg.make_field().spec();
    if (f.family != g.family || f.values != g.values || f.frequency != g.frequency || f.phase != g.phase ||
        f.center != g.center || f.expressions != g.expressions)
        return false;
    if (s.space.nodes != scheme.space.nodes || s.space.extent != scheme.space.extent ||
        s.space.core != scheme.space.core || s.time_nodes != scheme.time_nodes || s.per_decade != scheme.per_decade ||
        s.tolerance != scheme.tolerance || s.fd_step != scheme.fd_step || s.t_min != scheme.t_min)
        return false;
    if (tab.backward.size() != cfg.layout.backward_points.size() || tab.forward.size() != cfg.layout.forward_points.size())
        return false;
    for (std::size_t i = 0; i < tab.backward.size(); ++i) {
        if (tab.backward[i].y() != cfg.layout.backward_points[i]) return false;
        for (double t : cfg.layout.backward_times) try {
                tab.backward[i].time_index(t);
            } catch (const PreconditionError&) {
                return false;
            }
    }
    for (std::size_t i = 0; i < tab.forward.size(); ++i) {
        if (tab.forward[i].x() != cfg.layout.forward_points[i]) return false;
        for (double t : cfg.layout.forward_times) try {
                tab.forward[i].time_index(t);
            } catch (const PreconditionError&) {
                return false;
            }
    }
    return tab.backward.empty() || tab.backward[0].data().n_max == cfg.layout.series.n_max;
}

ParametrixTable obtain_table(const RunConfig& cfg, const QuadratureScheme& scheme, const fs::path& file,
                             std::ostream& log) {
    if (fs::exists(file)) {
        try {
            auto tab = load_table(file.string());
            if (same_setup(tab, cfg, scheme)) {
                log << "using " << file.string() << "\n";
                return tab;
            }
            log << file.string() << " does not match the config; rebuilding\n";
        } catch (const ConfigError& e) {
            log << "ignoring unreadable " << file.string() << ": " << e.what() << "\n";
        }
    }
    log << "building " << file.filename().string() << "\n";
    auto tab = build_table(std::make_shared<ParametrixContext>(cfg.make_field(), scheme), cfg.layout);
    save_table(tab, file.string());
    return tab;
}

void write_table_csv(const ParametrixTable& tab, const RunConfig& cfg, const fs::path& dir) {
    const int d = cfg.d;
    std::vector<std::string> head = {"t"};
    for (int k = 0; k < d; ++k) head.push_back("x" + std::to_string(k));
    for (int k = 0; k < d; ++k) head.push_back("y" + std::to_string(k));
    head.push_back("value");
    head.push_back("error_estimate");
    Csv csv(dir / "pA.csv", head);
    for (const auto& sl : tab.backward) {
        const int n = sl.lattice().size();
        for (const auto& st : sl.data().times) {
            if (st.fd_only) continue;
            const auto p = sl.pA(st.t);
            const auto e = sl.error_estimate(st.t);
            std::vector<int> idx(d, 0);
            for (std::size_t i = 0; i < p.size(); ++i) {
                bool inside = true;
                std::vector<double> x(d);
                for (int k = 0; k < d; ++k) {
                    x[k] = sl.node(st.t, k, idx[k]);
                    inside = inside && std::abs(x[k] - sl.y()[k]) <= cfg.verify.comparability_radius;
                }
                if (inside) {
                    csv << st.t;
                    for (double v : x) csv << v;
                    for (double v : sl.y()) csv << v;
                    csv << p[i] << e[i];
                    csv.end();
                }
                for (int k = d - 1; k >= 0; --k) {
                    if (++idx[k] < n) break;
                    idx[k] = 0;
                }
            }
        }
    }
    Csv ser(dir / "series.csv", {"kind", "slice", "n", "norm", "n_used", "ratio_constant", "remainder"});
    auto emit = [&](const std::string& kind, int i, const SeriesSummary& s) {
        for (std::size_t n = 0; n < s.term_norms.size(); ++n) {
            ser << kind << i << static_cast<int>(n) << s.term_norms[n] << s.n_used << s.ratio_constant << s.remainder;
            ser.end();
        }
    };
    for (std::size_t i = 0; i < tab.backward.size(); ++i) emit("backward", static_cast<int>(i), tab.backward[i].summary());
    for (std::size_t i = 0; i < tab.forward.size(); ++i) emit("forward", static_cast<int>(i), tab.forward[i].summary());
}

std::vector<Record> series_records(const ParametrixTable& tab, double tol) {
    std::vector<Record> recs;
    int worst_n = 0;
    bool decreasing = true, degraded = false;
    for (const auto& sl : tab.backward) {
        const auto& s = sl.summary();
        worst_n = std::max(worst_n, s.n_used);
        degraded = degraded || s.degraded;
        for (std::size_t n = 2; n < s.term_norms.size(); ++n)
            if (s.term_norms[n - 1] > 0.0 && !(s.term_norms[n] < s.term_norms[n - 1])) decreasing = false;
    }
    recs.push_back(upper("parametrix", "series_n_used", "backward slices, tol " + g17(tol), worst_n, 4));
    recs.push_back(upper("parametrix", "series_norms_decreasing", "||q_n|| for n >= 1", decreasing ? 0.0 : 1.0, 0.0));
    auto deg = upper("parametrix", "lattice_extent", "fraction of q mass at the lattice edge", degraded ? 1.0 : 0.0, 0.0);
    recs.push_back(deg);
    return recs;
}

int stage_parametrix(const RunConfig& cfg, const fs::path& dir, bool refine, std::ostream& log) {
    if (cfg.layout.backward_points.empty()) throw ConfigError("probes.backward is empty; nothing to tabulate");
    const auto base = obtain_table(cfg, cfg.scheme, dir / "table.cyl", log);
    if (refine) obtain_table(cfg, cfg.scheme.refined(), dir / "table_refined.cyl", log);
    write_table_csv(base, cfg, dir);
    auto recs = series_records(base, cfg.layout.series.tol);
    write_stage(dir, "parametrix", recs);
    // the series records are informative; construction failures surface as exceptions
    return kExitPass;
}

// ---------------------------------------------------------------- verify

int stage_verify(const RunConfig& cfg, const fs::path& dir, bool refine, std::ostream& log) {
    const auto base = obtain_table(cfg, cfg.scheme, dir / "table.cyl", log);
    ParametrixTable fine;
    const ParametrixTable* ref = nullptr;
    if (refine) {
        fine = obtain_table(cfg, cfg.scheme.refined(), dir / "table_refined.cyl", log);
        ref = &fine;
    }
    const auto& o = cfg.verify;
    const auto p = cfg.params();
    std::vector<Record> recs;
    auto add = [&](const CheckReport& c) {
        log << c.check_id << ": " << c.statistic << (c.passed ? " pass" : " FAIL") << "\n";
        recs.push_back(from_check(c));
    };
    if (cfg.wants("positivity")) add(check_positivity(base, ref, o));
    if (cfg.wants("comparability")) add(check_comparability(base, ref, o));
    if (!base.forward.empty()) {
        if (cfg.wants("normalization")) add(check_normalization(base, ref, o));
        if (cfg.wants("chapman_kolmogorov")) add(check_chapman_kolmogorov(base, ref, o));
    }
    if (cfg.wants("parabolic")) add(check_parabolic(base, ref, o));
    if (cfg.wants("holder")) {
        add(check_holder(base, ref, p.beta / 2.0, o));
        add(check_holder(base, ref, std::min(p.alpha, 1.0) / 2.0, o));
    }
    const bool explicit_gradient = std::find(cfg.checks.begin(), cfg.checks.end(), "gradient") != cfg.checks.end();
    if (cfg.wants("gradient") && (p.alpha > 1.0 || explicit_gradient)) {
        add(check_gradient_bound(base, ref, o));
        add(check_gradient_fd(base, ref, o));
    }
    if (cfg.wants("near_diagonal")) add(check_near_diagonal(base, ref, o));
    write_stage(dir, "verify", recs);
    return all_passed(recs) ? kExitPass : kExitCheckFailure;
}

// ---------------------------------------------------------------- simulate

int stage_simulate(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
    if (!cfg.simulate.enabled) throw ConfigError("simulate block is disabled in the config");
    const auto& sc = cfg.simulate;
    const auto field = cfg.make_field();
    const int d = cfg.d;
    log << "simulating " << sc.paths.n_paths << " coupled path pairs\n";
    const auto ens = euler_paths_coupled(field, sc.paths);
    const auto hf = empirical_density(ens.fine, sc.bins);
    const auto hc = empirical_density(ens.coarse, sc.bins);
    const double t = sc.paths.t_final;

    // reference bin masses and the mass of the unit box around x0
    std::vector<double> ref;
    double box_ref = 0.0;
    BinSpec box;
    for (int k = 0; k < d; ++k) {
        box.lo.push_back(sc.paths.x0[k] - 1.0);
        box.hi.push_back(sc.paths.x0[k] + 1.0);
        box.bins.push_back(1);
    }
    std::string comparator;
    if (field.is_constant()) {
        const auto ev = StableEvaluator::shared(cfg.alpha);
        std::vector<std::function<double(double)>> cdf;
        for (int k = 0; k < d; ++k) {
            const double th = t * field.sigma_axis(k, 0.0);
            const double x0 = sc.paths.x0[k];
            cdf.push_back([ev, th, x0](double v) { return ev->cdf(th, v - x0); });
        }
        ref = product_bin_masses(sc.bins, cdf);
        box_ref = product_bin_masses(box, cdf)[0];
        comparator = "product of one-dimensional stable cdfs";
    } else {
        auto ctx = std::make_shared<ParametrixContext>(field, cfg.scheme);
        ForwardSlice fw(ctx, sc.paths.x0, {t});
        ref = slice_bin_masses(fw, t, sc.bins);
        box_ref = slice_bin_masses(fw, t, box)[0];
        comparator = "parametrix forward slice";
    }
    const auto cmp = compare_bins(hc, ref);
    const auto halving = compare_halving(hf, hc);
    const auto hbox = empirical_density(ens.coarse, box);
    const double box_se = std::sqrt(box_ref * (1.0 - box_ref) / hbox.n);
    const double box_z = std::abs(hbox.prob[0] - box_ref) / box_se;

    {
        std::vector<std::string> head = {"bin"};
        for (int k = 0; k < d; ++k) {
            head.push_back("lo" + std::to_string(k));
            head.push_back("hi" + std::to_string(k));
        }
        for (const char* h : {"count", "p_coarse", "p_fine", "se", "reference", "z"}) head.push_back(h);
        Csv csv(dir / "histogram.csv", head);
        std::vector<int> idx(d, 0);
        for (std::size_t i = 0; i < hc.counts.size(); ++i) {
            csv << static_cast<int>(i);
            for (int k = 0; k < d; ++k) csv << sc.bins.edge(k, idx[k]) << sc.bins.edge(k, idx[k] + 1);
            const double m = std::clamp(ref[i], 0.0, 1.0);
            const double se = std::sqrt(m * (1.0 - m) / hc.n);
            csv << hc.counts[i] << hc.prob[i] << hf.prob[i] << se << ref[i]
                << (se > 0 ? (hc.prob[i] - m) / se : 0.0);
            csv.end();
            for (int k = d - 1; k >= 0; --k) {
                if (++idx[k] < sc.bins.bins[k]) break;
                idx[k] = 0;
            }
        }
    }

    log << "exit-time grid\n";
    const auto ex = exit_time_stats(field, sc.exit);
    ExitSpec ex2_spec = sc.exit;
    ex2_spec.n_steps *= 2;
    const auto ex2 = exit_time_stats(field, ex2_spec);
    {
        Csv csv(dir / "exit.csv", {"t", "R", "u", "exits", "n", "p_hat", "wilson_lo", "wilson_hi", "c_fit_u"});
        for (const auto& r : ex.rows) {
            csv << r.t << r.R << r.u << r.exits << ex.n << r.p_hat << r.ci.lo << r.ci.hi << ex.c_fit * r.u;
            csv.end();
        }
    }
    const auto lv = levy_system_check(ens.coarse, sc.band);
    {
        Csv csv(dir / "levy.csv", {"coord", "lo", "hi", "lhs", "lhs_se", "rhs", "rhs_se", "relative_gap"});
        csv << sc.band.coord << sc.band.lo << sc.band.hi << lv.lhs << lv.lhs_se << lv.rhs << lv.rhs_se
            << lv.relative_gap;
        csv.end();
    }

    std::vector<Record> recs;
    auto box_rec = upper("simulate", "box_mass_z", "[x0-1, x0+1]^d at t_final against the " + comparator, box_z, 3.0);
    box_rec.note = "p_hat " + g17(hbox.prob[0]) + ", reference " + g17(box_ref);
    recs.push_back(box_rec);
    auto bins_rec = lower("simulate", "bins_within_3sigma", "occupied bins against the " + comparator, cmp.fraction,
                          sc.agreement);
    bins_rec.note = std::to_string(cmp.within) + " of " + std::to_string(cmp.occupied) + " bins";
    recs.push_back(bins_rec);
    recs.push_back(upper("simulate", "euler_halving_shift", "max |p_fine - p_coarse| / se over bins",
                         halving.max_shift, 1.0));
    auto exit_rec = lower("simulate", "exit_c_fit", "P(tau <= t) against t / R^alpha", ex.c_fit, 0.0);
    exit_rec.passed = ex.c_fit > 0.0 && ex.all_below;
    exit_rec.refinement_delta = std::abs(ex2.c_fit - ex.c_fit) / ex.c_fit;
    exit_rec.passed = exit_rec.passed && exit_rec.refinement_delta <= cfg.verify.refinement_guard;
    exit_rec.note = std::string("all Wilson lower ends below c u: ") + (ex.all_below ? "yes" : "no") +
                    "; doubled steps c " + g17(ex2.c_fit);
    recs.push_back(exit_rec);
    recs.push_back(upper("simulate", "levy_system_gap", "coordinate " + std::to_string(sc.band.coord) + " jumps in [" +
                                                            g17(sc.band.lo) + ", " + g17(sc.band.hi) + "]",
                         lv.relative_gap, 0.05));
    write_stage(dir, "simulate", recs);
    return all_passed(recs) ? kExitPass : kExitCheckFailure;
}

// ---------------------------------------------------------------- report

int stage_report(const RunConfig& cfg, const fs::path& dir) {
    std::vector<std::string> stages = {"density", "parametrix", "verify"};
    if (cfg.simulate.enabled) stages.push_back("simulate");
    json summary = {{"model",
                     {{"alpha", cfg.alpha}, {"d", cfg.d}, {"beta", cfg.beta}, {"b1", cfg.b1}, {"b2", cfg.b2},
                      {"b3", cfg.b3}, {"T", cfg.T}}},
                    {"field", to_string(cfg.field.family)}};
    json all = json::array();
    bool ok = true;
    Csv csv(dir / "summary.csv", {"stage", "check_id", "statistic", "threshold", "passed", "refinement_delta"});
    for (const auto& s : stages) {
        const auto j = read_json(dir / (s + ".json"));
        for (const auto& r : j.at("records")) {
            all.push_back(r);
            ok = ok && r.at("passed").get<bool>();
            auto cell = [](const json& v) { return v.is_number() ? g17(v.get<double>()) : v.get<std::string>(); };
            csv << s << r.at("check_id").get<std::string>() << cell(r.at("statistic")) << cell(r.at("threshold"))
                << std::string(r.at("passed").get<bool>() ? "true" : "false") << cell(r.at("refinement_delta"));
            csv.end();
        }
    }
    summary["records"] = all;
    summary["passed"] = ok;
    write_json(dir / "summary.json", summary);
    return ok ? kExitPass : kExitCheckFailure;
}

fs::path output_dir(const RunOptions& opt, const RunConfig& cfg) {
    if (!opt.out_dir.empty()) return opt.out_dir;
    if (const char* env = std::getenv("CYLHEAT_OUT_DIR"); env && *env) return env;
    return cfg.out_dir;
}

void write_error(const fs::path& dir, const std::string& stage, const std::string& kind, const std::string& msg) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream os(dir / "error.json");
    if (os) os << json{{"stage", stage}, {"error", kind}, {"message", msg}}.dump(2) << "\n";
}

}  // namespace

int run(const RunOptions& opt, std::ostream& log) {
    fs::path dir = opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir);
    auto fail = [&](int code, const std::string& kind, const std::string& msg) {
        log << "error (" << kind << "): " << msg << "\n";
        write_error(dir, opt.command, kind, msg);
        return code;
    };
    try {
        const auto cfg = load_config(opt.config_path);
        dir = output_dir(opt, cfg);
        fs::create_directories(dir);
        Eigen::setNbThreads(opt.threads > 0 ? opt.threads : cfg.threads);
        const bool refine = cfg.refine || opt.refine;
        if (opt.command == "density") return stage_density(cfg, dir);
        if (opt.command == "parametrix") return stage_parametrix(cfg, dir, refine, log);
        if (opt.command == "verify") return stage_verify(cfg, dir, refine, log);
        if (opt.command == "simulate") return stage_simulate(cfg, dir, log);
        if (opt.command == "report") return stage_report(cfg, dir);
        return fail(kExitConfigError, "usage", "unknown command '" + opt.command + "'");
    } catch (const ConfigError& e) {
        return fail(kExitConfigError, "config", e.what());
    } catch (const PreconditionError& e) {
        return fail(kExitConfigError, "precondition", e.what());
    } catch (const DomainError& e) {
        return fail(kExitConfigError, "domain", e.what());
    } catch (const UnsupportedError& e) {
        return fail(kExitConfigError, "unsupported", e.what());
    } catch (const ConvergenceError& e) {
        return fail(kExitNumericFailure, "convergence", e.what());
    } catch (const std::exception& e) {
        return fail(kExitNumericFailure, "numeric", e.what());
    }
}

}  // namespace cylheat
