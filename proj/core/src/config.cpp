#include "cylheat/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cylheat/errors.hpp"

namespace cylheat {

namespace {

template <class T>
void read(const YAML::Node& n, const char* key, T& out, const std::string& where) {
    if (!n || !n[key]) return;
    try {
        out = n[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void read_points(const YAML::Node& n, const char* key, std::vector<std::vector<double>>& out,
                 const std::string& where) {
    read(n, key, out, where);
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

const std::vector<std::string> kChecks = {"positivity",        "comparability", "normalization",
                                          "chapman_kolmogorov", "parabolic",     "holder",
                                          "gradient",          "near_diagonal", "all"};

void validate(RunConfig& c) {
    require(c.alpha > 0.0 && c.alpha < 2.0, "model.alpha must lie in (0, 2)");
    require(c.d >= 2, "model.d must be at least 2 (the construction is for d >= 2)");
    require(c.beta > 0.0, "model.beta must be positive");
    require(c.beta <= c.alpha / 4.0 + 1e-15,
            "model.beta must not exceed alpha/4 = " + std::to_string(c.alpha / 4.0) +
                "; a field of higher regularity can set field.holder_exponent instead");
    if (c.holder_exponent == 0.0) c.holder_exponent = c.beta;
    require(c.holder_exponent >= c.beta && c.holder_exponent <= 1.0,
            "field.holder_exponent must lie in [model.beta, 1]");
    require(c.b1 > 0.0 && c.b1 <= c.b2, "model needs 0 < b1 <= b2");
    require(c.b3 > 0.0, "model.b3 must be positive");
    require(c.T > 0.0, "model.T must be positive");
    require(c.scheme.space.nodes >= 9 && c.scheme.space.nodes % 2 == 1, "scheme.lattice_nodes must be odd and >= 9");
    require(c.scheme.time_nodes >= 2, "scheme.time_nodes must be at least 2");
    require(c.scheme.per_decade >= 1, "scheme.per_decade must be at least 1");
    require(c.layout.series.n_max >= 1, "scheme.n_max must be at least 1");
    require(c.layout.series.tol > 0.0, "scheme.series_tol must be positive");
    for (const auto& p : c.layout.backward_points)
        require(static_cast<int>(p.size()) == c.d, "probes.backward entries need d coordinates");
    for (const auto& p : c.layout.forward_points)
        require(static_cast<int>(p.size()) == c.d, "probes.forward entries need d coordinates");
    for (double t : c.layout.backward_times) require(t > 0.0, "probes.backward_times must be positive");
    for (double t : c.layout.forward_times) require(t > 0.0, "probes.forward_times must be positive");
    for (double t : c.density.times) require(t > 0.0, "density.times must be positive");
    require(c.density.points >= 2, "density.points must be at least 2");
    for (const auto& ch : c.checks)
        require(std::find(kChecks.begin(), kChecks.end(), ch) != kChecks.end(), "verify.checks: unknown check '" + ch + "'");
    require(c.verify.refinement_guard > 0.0, "verify.thresholds.refinement must be positive");
    auto& s = c.simulate;
    if (s.enabled) {
        if (s.paths.x0.empty()) s.paths.x0.assign(c.d, 0.0);
        require(static_cast<int>(s.paths.x0.size()) == c.d, "simulate.x0 needs d coordinates");
        require(s.paths.n_paths >= 1 && s.paths.n_steps >= 1, "simulate.paths and simulate.steps must be positive");
        require(s.paths.t_final > 0.0, "simulate.t_final must be positive");
        require(s.paths.delta_min > 0.0, "simulate.delta_min must be positive");
        if (s.bins.lo.empty()) s.bins.lo.assign(c.d, -3.0);
        if (s.bins.hi.empty()) s.bins.hi.assign(c.d, 3.0);
        if (s.bins.bins.empty()) s.bins.bins.assign(c.d, 12);
        require(static_cast<int>(s.bins.lo.size()) == c.d && static_cast<int>(s.bins.hi.size()) == c.d &&
                    static_cast<int>(s.bins.bins.size()) == c.d,
                "simulate.bins lo/hi/count need d entries");
        for (int k = 0; k < c.d; ++k)
            require(s.bins.hi[k] > s.bins.lo[k] && s.bins.bins[k] >= 1, "simulate.bins need hi > lo and count >= 1");
        require(s.band.coord >= 0 && s.band.coord < c.d, "simulate.jump_band.coord out of range (zero-based)");
        require(s.band.lo > 0.0 && s.band.hi > s.band.lo, "simulate.jump_band needs 0 < lo < hi");
        require(s.band.lo / c.b2 >= s.paths.delta_min,
                "simulate.jump_band.lo / b2 must be at least simulate.delta_min so the jump log covers the band");
        if (s.exit.x0.empty()) s.exit.x0 = s.paths.x0;
        require(!s.exit.times.empty() && !s.exit.radii.empty(), "simulate.exit needs times and radii");
        require(s.exit.n_steps >= 256, "simulate.exit.steps must be at least 256 (step-resolution exit detection)");
        require(s.agreement > 0.0 && s.agreement <= 1.0, "simulate.agreement must lie in (0, 1]");
    }
    require(c.threads >= 1, "threads must be at least 1");
}

}  // namespace

ModelParams RunConfig::params() const {
    ModelParams p = ModelParams::make(alpha, d, holder_exponent > 0.0 ? holder_exponent : beta, b1, b2, b3, T);
    p.beta = beta;
    return p;
}

CoefficientField RunConfig::make_field() const { return CoefficientField(params(), field); }

bool RunConfig::wants(const std::string& check) const {
    return std::find(checks.begin(), checks.end(), "all") != checks.end() ||
           std::find(checks.begin(), checks.end(), check) != checks.end();
}

RunConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    RunConfig c;
    const auto m = root["model"];
    require(static_cast<bool>(m), "config needs a model block");
    read(m, "alpha", c.alpha, "model");
    read(m, "d", c.d, "model");
    read(m, "beta", c.beta, "model");
    read(m, "b1", c.b1, "model");
    read(m, "b2", c.b2, "model");
    read(m, "b3", c.b3, "model");
    read(m, "T", c.T, "model");

    const auto f = root["field"];
    require(static_cast<bool>(f), "config needs a field block");
    std::string family = "constant";
    read(f, "family", family, "field");
    c.field.family = field_family_from_string(family);
    read(f, "values", c.field.values, "field");
    if (f["value"]) c.field.values = {f["value"].as<double>()};
    read(f, "frequency", c.field.frequency, "field");
    read(f, "phase", c.field.phase, "field");
    read(f, "center", c.field.center, "field");
    read(f, "expressions", c.field.expressions, "field");
    read(f, "holder_exponent", c.holder_exponent, "field");

    const auto s = root["scheme"];
    read(s, "lattice_nodes", c.scheme.space.nodes, "scheme");
    read(s, "lattice_core", c.scheme.space.core, "scheme");
    read(s, "lattice_extent", c.scheme.space.extent, "scheme");
    read(s, "time_nodes", c.scheme.time_nodes, "scheme");
    read(s, "per_decade", c.scheme.per_decade, "scheme");
    read(s, "t_min", c.scheme.t_min, "scheme");
    read(s, "fd_step", c.scheme.fd_step, "scheme");
    read(s, "tolerance", c.scheme.tolerance, "scheme");
    read(s, "n_max", c.layout.series.n_max, "scheme");
    read(s, "series_tol", c.layout.series.tol, "scheme");

    const auto p = root["probes"];
    read_points(p, "backward", c.layout.backward_points, "probes");
    read(p, "backward_times", c.layout.backward_times, "probes");
    read_points(p, "forward", c.layout.forward_points, "probes");
    read(p, "forward_times", c.layout.forward_times, "probes");
    c.layout.series.time_derivative = true;

    const auto dn = root["density"];
    read(dn, "times", c.density.times, "density");
    read(dn, "x_max", c.density.x_max, "density");
    read(dn, "points", c.density.points, "density");

    const auto v = root["verify"];
    read(v, "refine", c.refine, "verify");
    read(v, "checks", c.checks, "verify");
    if (v && v["thresholds"]) {
        const auto th = v["thresholds"];
        read(th, "comparability", c.verify.comparability, "verify.thresholds");
        read(th, "normalization", c.verify.normalization, "verify.thresholds");
        read(th, "chapman_kolmogorov", c.verify.chapman_kolmogorov, "verify.thresholds");
        read(th, "parabolic", c.verify.parabolic, "verify.thresholds");
        read(th, "gradient_fd", c.verify.gradient_fd, "verify.thresholds");
        read(th, "near_diagonal", c.verify.near_diagonal_floor, "verify.thresholds");
        read(th, "refinement", c.verify.refinement_guard, "verify.thresholds");
    }
    read(v, "radius", c.verify.comparability_radius, "verify");
    read(v, "t_lo", c.verify.t_lo, "verify");
    read(v, "t_hi", c.verify.t_hi, "verify");
    read(v, "parabolic_time", c.verify.parabolic_time, "verify");
    read_points(v, "parabolic_offsets", c.verify.parabolic_offsets, "verify");
    if (v && v["ck"]) {
        read(v["ck"], "s", c.verify.ck_s, "verify.ck");
        read(v["ck"], "t", c.verify.ck_t, "verify.ck");
    }

    const auto sm = root["simulate"];
    auto& sc = c.simulate;
    if (!sm) sc.enabled = false;
    read(sm, "enabled", sc.enabled, "simulate");
    read(sm, "x0", sc.paths.x0, "simulate");
    read(sm, "t_final", sc.paths.t_final, "simulate");
    read(sm, "paths", sc.paths.n_paths, "simulate");
    read(sm, "steps", sc.paths.n_steps, "simulate");
    read(sm, "seed", sc.paths.seed, "simulate");
    read(sm, "delta_min", sc.paths.delta_min, "simulate");
    read(sm, "agreement", sc.agreement, "simulate");
    sc.paths.log_jumps = true;
    if (sm && sm["bins"]) {
        read(sm["bins"], "lo", sc.bins.lo, "simulate.bins");
        read(sm["bins"], "hi", sc.bins.hi, "simulate.bins");
        read(sm["bins"], "count", sc.bins.bins, "simulate.bins");
    }
    if (sm && sm["jump_band"]) {
        read(sm["jump_band"], "coord", sc.band.coord, "simulate.jump_band");
        read(sm["jump_band"], "lo", sc.band.lo, "simulate.jump_band");
        read(sm["jump_band"], "hi", sc.band.hi, "simulate.jump_band");
    }
    if (sm && sm["exit"]) {
        const auto e = sm["exit"];
        read(e, "x0", sc.exit.x0, "simulate.exit");
        read(e, "times", sc.exit.times, "simulate.exit");
        read(e, "radii", sc.exit.radii, "simulate.exit");
        read(e, "steps", sc.exit.n_steps, "simulate.exit");
        read(e, "paths", sc.exit.n_paths, "simulate.exit");
        read(e, "seed", sc.exit.seed, "simulate.exit");
    }
    if (sc.exit.times.empty()) sc.exit.times = {0.1, 0.2, 0.4};
    if (sc.exit.radii.empty()) sc.exit.radii = {2.0, 4.0, 8.0};

    const auto o = root["output"];
    read(o, "directory", c.out_dir, "output");
    read(o, "formats", c.formats, "output");
    read(root, "threads", c.threads, "config");

    validate(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

}  // namespace cylheat
