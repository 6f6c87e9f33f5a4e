#include "cylheat/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cylheat/errors.hpp"
#include "cylheat/random.hpp"
#include "cylheat/stable.hpp"

namespace cylheat {

ModelParams ModelParams::make(double alpha, int d, double beta, double b1, double b2, double b3, double T) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("alpha must lie in (0, 2), got " + std::to_string(alpha));
    if (d < 2) throw DomainError("dimension d must be at least 2, got " + std::to_string(d));
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("beta must lie in (0, 1], got " + std::to_string(beta));
    if (!(b1 > 0.0)) throw DomainError("b1 must be positive");
    if (!(b1 <= b2)) throw DomainError("ellipticity bounds need b1 <= b2");
    if (!(b3 > 0.0)) throw DomainError("Holder constant b3 must be positive");
    if (!(T > 0.0)) throw DomainError("horizon T must be positive");
    ModelParams p;
    p.alpha = alpha;
    p.d = d;
    p.b1 = b1;
    p.b2 = b2;
    p.T = T;
    p.beta_declared = beta;
    p.b3_declared = b3;
    p.beta = std::min(beta, alpha / 4.0);
    p.b3 = beta > p.beta ? std::max(b3, b2 - b1) : b3;
    p.A_alpha = generator_constant(alpha);
    return p;
}

const char* to_string(FieldFamily f) {
    switch (f) {
        case FieldFamily::Constant: return "constant";
        case FieldFamily::SmoothPeriodic: return "smooth-periodic";
        case FieldFamily::HolderKink: return "holder-kink";
        case FieldFamily::Expression: return "expression";
    }
    return "?";
}

FieldFamily field_family_from_string(const std::string& s) {
    if (s == "constant") return FieldFamily::Constant;
    if (s == "smooth-periodic") return FieldFamily::SmoothPeriodic;
    if (s == "holder-kink") return FieldFamily::HolderKink;
    if (s == "expression") return FieldFamily::Expression;
    throw ConfigError("unknown field family '" + s + "' (constant, smooth-periodic, holder-kink, expression)");
}

CoefficientField::CoefficientField(const ModelParams& params, FieldSpec spec) : params_(params), spec_(std::move(spec)) {
    const int d = params_.d;
    auto widen = [d](std::vector<double>& v, double fill, const char* what) {
        if (v.empty()) v.assign(d, fill);
        else if (v.size() == 1) v.assign(d, v[0]);
        else if (static_cast<int>(v.size()) != d)
            throw ConfigError(std::string(what) + " needs 1 or d = " + std::to_string(d) + " entries");
    };
    switch (spec_.family) {
        case FieldFamily::Constant:
            widen(spec_.values, 1.0, "constant field values");
            for (double v : spec_.values)
                if (!(v > 0.0)) throw ConfigError("constant field values must be positive");
            break;
        case FieldFamily::SmoothPeriodic: widen(spec_.phase, 0.0, "phase"); break;
        case FieldFamily::HolderKink: widen(spec_.center, 0.0, "kink center"); break;
        case FieldFamily::Expression:
            if (static_cast<int>(spec_.expressions.size()) != d)
                throw ConfigError("expression field needs exactly d = " + std::to_string(d) + " expressions");
            for (int i = 0; i < d; ++i) {
                exprs_.push_back(Expression::parse(spec_.expressions[i], d));
                const auto& vars = exprs_.back().variables();
                if (!(vars.empty() || (vars.size() == 1 && *vars.begin() == i))) separable_ = false;
            }
            break;
    }
}

CoefficientField CoefficientField::constant(const ModelParams& p, double value) {
    FieldSpec s;
    s.family = FieldFamily::Constant;
    s.values = {value};
    return CoefficientField(p, s);
}

CoefficientField CoefficientField::smooth_periodic(const ModelParams& p, double frequency, std::vector<double> phase) {
    FieldSpec s;
    s.family = FieldFamily::SmoothPeriodic;
    s.frequency = frequency;
    s.phase = std::move(phase);
    return CoefficientField(p, s);
}

CoefficientField CoefficientField::holder_kink(const ModelParams& p, std::vector<double> center) {
    FieldSpec s;
    s.family = FieldFamily::HolderKink;
    s.center = std::move(center);
    return CoefficientField(p, s);
}

CoefficientField CoefficientField::from_expressions(const ModelParams& p, std::vector<std::string> exprs) {
    FieldSpec s;
    s.family = FieldFamily::Expression;
    s.expressions = std::move(exprs);
    return CoefficientField(p, s);
}

void CoefficientField::check_index(int i) const {
    if (i < 0 || i >= params_.d)
        throw DomainError("coordinate index " + std::to_string(i) + " outside [0, " + std::to_string(params_.d) + ")");
}

bool CoefficientField::is_constant() const {
    if (spec_.family == FieldFamily::Constant) return true;
    if (spec_.family == FieldFamily::Expression)
        return std::all_of(exprs_.begin(), exprs_.end(), [](const Expression& e) { return e.variables().empty(); });
    return params_.b1 == params_.b2;
}

double CoefficientField::a_axis(int i, double xi) const {
    const double b1 = params_.b1, b2 = params_.b2;
    switch (spec_.family) {
        case FieldFamily::Constant: return spec_.values[i];
        case FieldFamily::SmoothPeriodic:
            return b1 + (b2 - b1) * 0.5 * (1.0 + std::sin(spec_.frequency * xi + spec_.phase[i]));
        case FieldFamily::HolderKink:
            return b1 + (b2 - b1) * std::min(1.0, std::pow(std::abs(xi - spec_.center[i]), params_.beta_declared));
        case FieldFamily::Expression: {
            if (!separable_) throw UnsupportedError("expression field is not separable");
            thread_local std::vector<double> pt;
            pt.assign(params_.d, 0.0);
            pt[i] = xi;
            return exprs_[i].evaluate(pt);
        }
    }
    return 0.0;
}

double CoefficientField::a(int i, std::span<const double> x) const {
    check_index(i);
    if (spec_.family == FieldFamily::Expression) return exprs_[i].evaluate(x);
    return a_axis(i, x[i]);
}

double CoefficientField::sigma(int i, std::span<const double> x) const { return std::pow(a(i, x), params_.alpha); }

double CoefficientField::sigma_axis(int i, double xi) const { return std::pow(a_axis(i, xi), params_.alpha); }

std::vector<double> CoefficientField::breakpoints(int i) const {
    check_index(i);
    if (spec_.family != FieldFamily::HolderKink) return {};
    const double c = spec_.center[i];
    return {c - 1.0, c, c + 1.0};
}

FieldReport verify_field(const CoefficientField& field, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw DomainError("verify_field needs at least one sample");
    const auto& p = field.params();
    const int d = p.d;
    Rng rng(seed);
    FieldReport r;
    std::vector<double> x(d), y(d);
    std::normal_distribution<double> normal;
    std::mt19937_64 gauss_engine(splitmix64(seed + 1));
    auto note = [&](const std::vector<double>& u, const std::vector<double>& v) {
        double dist = 0.0;
        for (int k = 0; k < d; ++k) dist += (u[k] - v[k]) * (u[k] - v[k]);
        dist = std::sqrt(dist);
        if (dist == 0.0) return;
        for (int i = 0; i < d; ++i) {
            const double au = field.a(i, u), av = field.a(i, v);
            for (double a : {au, av}) {
                const double viol = std::isfinite(a) ? std::max({0.0, p.b1 - a, a - p.b2}) : INFINITY;
                r.max_bound_violation = std::max(r.max_bound_violation, viol);
            }
            r.max_holder_quotient = std::max(r.max_holder_quotient, std::abs(au - av) / std::pow(dist, p.beta_declared));
            const double su = std::pow(au, p.alpha), sv = std::pow(av, p.alpha);
            r.max_sigma_quotient = std::max(r.max_sigma_quotient, std::abs(su - sv) / std::min(1.0, std::pow(dist, p.beta)));
        }
    };
    for (int s = 0; s < n_samples; ++s) {
        for (int k = 0; k < d; ++k) x[k] = -5.0 + 10.0 * rng.uniform();
        double norm = 0.0;
        std::vector<double> dir(d);
        for (int k = 0; k < d; ++k) {
            dir[k] = normal(gauss_engine);
            norm += dir[k] * dir[k];
        }
        norm = std::sqrt(norm);
        const double len = std::pow(10.0, -4.0 + 5.0 * rng.uniform());
        for (int k = 0; k < d; ++k) y[k] = x[k] + len * dir[k] / norm;
        note(x, y);
    }
    // Close pairs straddling non-smooth points, where quotients peak.
    for (int i = 0; i < d; ++i) {
        for (double b : field.breakpoints(i)) {
            for (double len : {1e-6, 1e-4, 1e-2, 0.5, 1.0}) {
                std::fill(x.begin(), x.end(), 0.0);
                x[i] = b;
                y = x;
                y[i] = b + len;
                note(x, y);
                y[i] = b - len;
                note(x, y);
            }
        }
    }
    r.passed = r.max_bound_violation == 0.0 && r.max_holder_quotient <= p.b3_declared * (1.0 + 1e-12);
    return r;
}

}  // namespace cylheat
