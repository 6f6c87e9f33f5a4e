#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cylheat/expression.hpp"

namespace cylheat {

// Global problem data. `beta` and `b3` are the working values; when the
// declared exponent exceeds alpha/4 they are reduced to beta = alpha/4 and
// b3 = max(b3, b2 - b1), which keeps the Holder condition valid.
struct ModelParams {
    double alpha = 1.0;
    int d = 2;
    double beta = 0.25;
    double b1 = 1.0;
    double b2 = 1.0;
    double b3 = 1.0;
    double T = 1.0;
    double A_alpha = 0.0;
    double beta_declared = 0.25;
    double b3_declared = 1.0;

    static ModelParams make(double alpha, int d, double beta, double b1, double b2, double b3, double T);
};

enum class FieldFamily { Constant, SmoothPeriodic, HolderKink, Expression };

const char* to_string(FieldFamily f);
FieldFamily field_family_from_string(const std::string& s);

// Parameters of a field; only the members relevant to `family` are used.
struct FieldSpec {
    FieldFamily family = FieldFamily::Constant;
    std::vector<double> values;       // constant: a_ii per coordinate (or one value)
    double frequency = 1.0;           // smooth-periodic: k
    std::vector<double> phase;        // smooth-periodic: phi_i (default 0)
    std::vector<double> center;       // holder-kink: x_i^0 (default 0)
    std::vector<std::string> expressions;  // expression: a_ii as text
};

// Diagonal coefficient matrix A(x) = diag(a_11(x), ..., a_dd(x)).
class CoefficientField {
public:
    CoefficientField(const ModelParams& params, FieldSpec spec);

    static CoefficientField constant(const ModelParams& p, double value);
    static CoefficientField smooth_periodic(const ModelParams& p, double frequency, std::vector<double> phase = {});
    static CoefficientField holder_kink(const ModelParams& p, std::vector<double> center = {});
    static CoefficientField from_expressions(const ModelParams& p, std::vector<std::string> exprs);

    const ModelParams& params() const { return params_; }
    const FieldSpec& spec() const { return spec_; }
    FieldFamily family() const { return spec_.family; }
    int dim() const { return params_.d; }

    // Zero-based coordinate index i.
    double a(int i, std::span<const double> x) const;
    double sigma(int i, std::span<const double> x) const;

    // True when a_ii depends on x_i only.
    bool separable() const { return separable_; }
    bool is_constant() const;
    double a_axis(int i, double xi) const;
    double sigma_axis(int i, double xi) const;
    // Points along axis i where a_ii is not smooth.
    std::vector<double> breakpoints(int i) const;

private:
    void check_index(int i) const;

    ModelParams params_;
    FieldSpec spec_;
    std::vector<Expression> exprs_;
    bool separable_ = true;
};

struct FieldReport {
    double max_bound_violation = 0.0;
    double max_holder_quotient = 0.0;   // against the declared exponent
    double max_sigma_quotient = 0.0;    // |sigma(x)-sigma(y)| / (|x-y|^beta ^ 1)
    bool passed = true;
};

FieldReport verify_field(const CoefficientField& field, int n_samples, std::uint64_t seed);

}  // namespace cylheat
