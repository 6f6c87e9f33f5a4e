#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cylheat/coeffs.hpp"
#include "cylheat/parametrix.hpp"

namespace cylheat {

struct SimulationSpec {
    std::vector<double> x0;
    double t_final = 1.0;
    int n_steps = 64;
    int n_paths = 100000;
    std::uint64_t seed = 1;
    double delta_min = 0.5;  // jump_log threshold on |Delta Z_k|
    bool log_jumps = false;
};

// Step in which a driving increment reached delta_min in absolute value.
struct JumpRecord {
    int path = 0;
    int step = 0;
    int coord = 0;
    double dz = 0.0;  // increment of Z_k
    double dx = 0.0;  // resulting increment of X_k
    std::vector<double> pre;
};

struct PathEnsemble {
    ModelParams params;
    FieldSpec field;
    SimulationSpec spec;
    std::vector<double> terminal;  // n_paths x d, row-major
    std::vector<JumpRecord> jumps;
    // per coordinate: mean and per-path variance of sum_steps dt sigma_k(X_step)
    std::vector<double> sigma_time, sigma_time_var;

    int dim() const { return params.d; }
    std::size_t size() const { return spec.n_paths; }
    double terminal_at(std::size_t path, int k) const { return terminal[path * params.d + k]; }
};

// X_{j+1} = X_j + A(X_j) Delta Z_j with exact stable increments; path i
// draws from the stream (seed, i).
PathEnsemble euler_paths(const CoefficientField& field, const SimulationSpec& spec);

// The same paths at 2 n_steps (fine) and n_steps (coarse); each coarse
// increment is the sum of the two fine increments it covers.
struct CoupledEnsembles {
    PathEnsemble fine, coarse;
};
CoupledEnsembles euler_paths_coupled(const CoefficientField& field, const SimulationSpec& spec);

// Axis-aligned equal-width bins on the box [lo, hi].
struct BinSpec {
    std::vector<double> lo, hi;
    std::vector<int> bins;
    std::size_t count() const;
    double edge(int k, int j) const { return lo[k] + (hi[k] - lo[k]) * j / bins[k]; }
};

struct Histogram {
    BinSpec spec;
    std::vector<long> counts;
    std::vector<double> prob, se;  // estimates and binomial standard errors
    long n = 0;
};

Histogram empirical_density(const PathEnsemble& ens, const BinSpec& bins);

// Probability of each bin under a product of independent one-dimensional
// cdfs (constant coefficients), or under a forward slice p^A(t, x0, .).
std::vector<double> product_bin_masses(const BinSpec& bins, const std::vector<std::function<double(double)>>& cdf);
std::vector<double> slice_bin_masses(const ForwardSlice& slice, double t, const BinSpec& bins);

struct BinComparison {
    int occupied = 0;
    int within = 0;
    double fraction = 0.0;   // within / occupied
    double max_z = 0.0;      // largest |p_hat - m| / se over occupied bins
};
// se from the reference mass: sqrt(m (1 - m) / n).
BinComparison compare_bins(const Histogram& h, const std::vector<double>& mass, double n_sigma = 3.0);

struct HalvingComparison {
    double max_shift = 0.0;  // largest |p_fine - p_coarse| / se over bins
    int bins_over = 0;       // bins with shift above one standard error
};
HalvingComparison compare_halving(const Histogram& fine, const Histogram& coarse);

struct Interval {
    double lo = 0.0, hi = 0.0;
};
Interval wilson_interval(long successes, long n, double z = 1.96);

struct ExitSpec {
    std::vector<double> x0;
    std::vector<double> times;
    std::vector<double> radii;
    int n_steps = 256;  // steps over the largest time
    int n_paths = 100000;
    std::uint64_t seed = 1;
    double z = 1.96;
};

struct ExitRow {
    double t = 0.0, R = 0.0, u = 0.0;  // u = t / R^alpha
    long exits = 0;
    double p_hat = 0.0;
    Interval ci;
};

struct ExitTable {
    std::vector<ExitRow> rows;
    long n = 0;
    double c_fit = 0.0;       // least squares through the origin of p_hat on u
    double c_envelope = 0.0;  // smallest c with every Wilson lower end below c u
    bool all_below = false;   // every Wilson lower end <= c_fit u
};

// P(tau_{B(x0,R)} <= t) for sup-norm balls; exits are detected at step times.
ExitTable exit_time_stats(const CoefficientField& field, const ExitSpec& spec);

// Indicator of a single-coordinate jump of X with |Delta X_coord| in [lo, hi].
struct JumpBand {
    int coord = 0;
    double lo = 1.0, hi = 2.0;
};

struct LevyCheck {
    double lhs = 0.0, lhs_se = 0.0;  // mean number of logged jumps in the band per path
    double rhs = 0.0, rhs_se = 0.0;  // E int_0^T J(X_s, band) ds
    double relative_gap = 0.0;
};

LevyCheck levy_system_check(const PathEnsemble& ens, const JumpBand& f);

}  // namespace cylheat
