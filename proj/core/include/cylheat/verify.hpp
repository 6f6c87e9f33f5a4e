#pragma once

#include <limits>
#include <string>
#include <vector>

#include "cylheat/table_io.hpp"

namespace cylheat {

// One quantitative check. For upper-bound checks passed requires
// statistic <= threshold, for lower-bound checks statistic >= threshold;
// in both cases the statistic must also move by at most the refinement
// guard between the base and the refined table.
struct CheckReport {
    std::string check_id;
    std::string probe_spec;
    double statistic = 0.0;
    double threshold = 0.0;
    bool lower_bound = false;
    bool passed = false;
    double refinement_delta = 0.0;
    std::string note;
};

struct VerifyOptions {
    double comparability = 10.0;
    double normalization = 5e-2;
    double chapman_kolmogorov = 5e-2;
    double parabolic = 0.1;
    double parabolic_floor = 1e-4;
    double gradient_fd = 1e-3;
    double near_diagonal_floor = 1e-3;
    double refinement_guard = 0.25;
    double comparability_radius = 5.0;  // |x - y|_inf of the comparability region
    double t_lo = 0.25, t_hi = 1.0;     // times used by the lattice-based checks
    // offsets x - y of the parabolic probes, and the probe time
    std::vector<std::vector<double>> parabolic_offsets = {{0.0, 0.0}, {0.5, -0.3}, {-1.0, 0.8}, {2.0, 1.5}};
    double parabolic_time = 0.5;
    // Chapman-Kolmogorov split s + t
    double ck_s = 0.5, ck_t = 0.5;
};

// Relative change of a statistic under refinement; residual-type checks are
// measured against their threshold so that tiny residuals do not count.
double refinement_delta(double base, double refined, double threshold, bool lower_bound);

CheckReport check_comparability(const ParametrixTable& base, const ParametrixTable* refined,
                                const VerifyOptions& opt = {});
CheckReport check_positivity(const ParametrixTable& base, const ParametrixTable* refined,
                             const VerifyOptions& opt = {});
CheckReport check_normalization(const ParametrixTable& base, const ParametrixTable* refined,
                                const VerifyOptions& opt = {});
// |mass over the box - 1|; infinite half-widths complete the tail.
double normalization_residual(const ForwardSlice& slice, double t, std::span<const double> half_width);
CheckReport check_chapman_kolmogorov(const ParametrixTable& base, const ParametrixTable* refined,
                                     const VerifyOptions& opt = {});
// int p^A(t, x, z) p^A(s, z, y) dz from a forward slice at x and a backward slice at y.
double chapman_kolmogorov_integral(const ForwardSlice& fwd, double t, const BackwardSlice& bwd, double s);
CheckReport check_parabolic(const ParametrixTable& base, const ParametrixTable* refined,
                            const VerifyOptions& opt = {});
// d/dt p^A - L p^A at one probe, both sides returned.
struct ParabolicProbe {
    double dt = 0.0;
    double generator = 0.0;
    double consistency = 0.0;
};
ParabolicProbe parabolic_probe(const BackwardSlice& slice, double t, std::span<const double> x);
CheckReport check_holder(const ParametrixTable& base, const ParametrixTable* refined, double gamma,
                         const VerifyOptions& opt = {});
CheckReport check_gradient_bound(const ParametrixTable& base, const ParametrixTable* refined,
                                 const VerifyOptions& opt = {});
CheckReport check_gradient_fd(const ParametrixTable& base, const ParametrixTable* refined,
                              const VerifyOptions& opt = {});
CheckReport check_near_diagonal(const ParametrixTable& base, const ParametrixTable* refined,
                                const VerifyOptions& opt = {});

// Every applicable check; gradient checks only when alpha > 1.
std::vector<CheckReport> run_checks(const ParametrixTable& base, const ParametrixTable* refined,
                                    const VerifyOptions& opt = {});

}  // namespace cylheat
