#include "cylheat/parametrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cylheat/errors.hpp"
#include "cylheat/quadrature.hpp"

namespace cylheat {

QuadratureScheme QuadratureScheme::refined() const {
    QuadratureScheme r = *this;
    r.space.nodes = space.nodes + 2 * ((space.nodes - 1) / 4);
    r.time_nodes = time_nodes + time_nodes / 2;
    r.per_decade = per_decade + (per_decade + 1) / 2;
    r.product.cell_nodes = product.cell_nodes + 2;
    r.generator.epsilon_split = 0.5 * generator.epsilon_split;
    return r;
}

ParametrixContext::ParametrixContext(CoefficientField f, QuadratureScheme s)
    : field(std::move(f)), scheme(s), ev(StableEvaluator::shared(field.params().alpha)) {
    const auto& p = field.params();
    beta_decay = std::min(p.beta_declared, 1.0);
    time_power = std::min(p.alpha / p.beta, scheme.time_power_cap);
    if (!field.separable())
        throw UnsupportedError("the parametrix tables need a_ii to depend on x_i only");
    if (scheme.time_nodes < 2 || scheme.per_decade < 1 || !(scheme.t_min > 0.0 && scheme.t_min < 1.0))
        throw ConfigError("invalid time discretization");
}

double frozen_density(const ParametrixContext& ctx, double t, std::span<const double> x, std::span<const double> y) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    double v = 1.0;
    for (int k = 0; k < ctx.dim(); ++k) v *= ctx.ev->density(t * ctx.field.sigma(k, y), x[k] - y[k]);
    return v;
}

double q0(const ParametrixContext& ctx, double t, std::span<const double> x, std::span<const double> y) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    const int d = ctx.dim();
    std::vector<double> g(d), dt(d), ds(d);
    for (int k = 0; k < d; ++k) {
        const double sy = ctx.field.sigma(k, y);
        g[k] = ctx.ev->density(t * sy, x[k] - y[k]);
        dt[k] = ctx.ev->time_derivative(t * sy, x[k] - y[k]);
        ds[k] = ctx.field.sigma(k, x) - sy;
    }
    double total = 0.0;
    for (int k = 0; k < d; ++k) {
        if (ds[k] == 0.0) continue;
        double v = ds[k] * dt[k];
        for (int j = 0; j < d; ++j)
            if (j != k) v *= g[j];
        total += v;
    }
    return total;
}

GeneratorResult q0_quadrature(const ParametrixContext& ctx, double t, std::span<const double> x,
                              std::span<const double> y) {
    const int d = ctx.dim();
    const std::vector<double> yy(y.begin(), y.end());
    PointLineFunction f(
        d, [&ctx, t, yy](std::span<const double> p) { return frozen_density(ctx, t, p, yy); }, TailModel::PowerLaw,
        1.0 + ctx.params().alpha);
    std::vector<double> sigma(d);
    for (int k = 0; k < d; ++k) sigma[k] = ctx.field.sigma(k, x) - ctx.field.sigma(k, y);
    const double scale = ctx.params().b1 * std::pow(t, 1.0 / ctx.params().alpha);
    return apply_frozen_generator(f, sigma, x, ctx.params().alpha, scale, ctx.scheme.generator);
}

double q_envelope(double alpha, double beta, double t, std::span<const double> delta) {
    const double r = std::pow(t, 1.0 / alpha);
    double prod = std::pow(t, static_cast<double>(delta.size()) - 1.0);
    double bracket = std::pow(t, beta / alpha);
    for (double dl : delta) {
        const double a = std::abs(dl);
        prod *= std::pow(r + a, -1.0 - alpha);
        bracket += std::min(1.0, std::pow(a, beta));
    }
    return prod * bracket;
}

namespace {

constexpr int kGD = 0;  // outputs G and D
constexpr int kG = 1;   // G only
constexpr int kGp = 2;  // dG/da only

// Kernels as functions of the row point a and column z = a + offset.
// Backward: G = g_{tau sigma(z)}(a - z), D = (sigma(a) - sigma(z)) dg/dtheta.
template <int Mode>
struct BackwardKernel {
    const StableEvaluator* ev;
    const CoefficientField* field;
    int axis;
    double tau, alpha;
    std::vector<double> row_sigma;
    struct Ctx {
        double sigma, inv, theta;
    };
    Ctx prepare(double z) const {
        const double s = field->sigma_axis(axis, z);
        const double th = tau * s;
        return {s, std::pow(th, -1.0 / alpha), th};
    }
    void eval(int r, double o, const Ctx& c, double* out) const {
        const double v = -o * c.inv;
        double g, dg;
        ev->unit_pair(v, g, dg);
        if constexpr (Mode == kGD) {
            out[0] = c.inv * g;
            out[1] = (row_sigma[r] - c.sigma) * (-c.inv * (g + v * dg) / (alpha * c.theta));
        } else if constexpr (Mode == kG) {
            out[0] = c.inv * g;
        } else {
            out[0] = c.inv * c.inv * dg;
        }
    }
};

// Forward: G = g_{tau sigma(a)}(z - a), D = (sigma(z) - sigma(a)) dg/dtheta at theta = tau sigma(a).
struct ForwardKernel {
    const StableEvaluator* ev;
    const CoefficientField* field;
    int axis;
    double alpha;
    std::vector<double> row_sigma, row_inv, row_theta;
    struct Ctx {
        double sigma;
    };
    Ctx prepare(double z) const { return {field->sigma_axis(axis, z)}; }
    void eval(int r, double o, const Ctx& c, double* out) const {
        const double inv = row_inv[r];
        const double v = o * inv;
        double g, dg;
        ev->unit_pair(v, g, dg);
        out[0] = inv * g;
        out[1] = (c.sigma - row_sigma[r]) * (-inv * (g + v * dg) / (alpha * row_theta[r]));
    }
};

std::vector<double> outer(const std::vector<std::vector<double>>& v) {
    std::vector<double> cur = v[0];
    for (std::size_t k = 1; k < v.size(); ++k) {
        std::vector<double> next(cur.size() * v[k].size());
        for (std::size_t i = 0; i < cur.size(); ++i)
            for (std::size_t j = 0; j < v[k].size(); ++j) next[i * v[k].size() + j] = cur[i] * v[k][j];
        cur.swap(next);
    }
    return cur;
}

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

struct TableTime {
    double t;
    bool fd_only;
    bool output;
};

std::vector<TableTime> table_times(const ParametrixContext& ctx, const std::vector<double>& outputs, bool fd) {
    if (outputs.empty()) throw PreconditionError("no output times requested");
    for (double t : outputs)
        if (!(t > 0.0)) throw DomainError("output times must be positive");
    const double T = ctx.params().T;
    const double tmin = ctx.scheme.t_min * std::min(T, *std::min_element(outputs.begin(), outputs.end()));
    const double tmax = *std::max_element(outputs.begin(), outputs.end());
    const int pd = ctx.scheme.per_decade;
    const double gap = std::pow(10.0, 0.5 / pd);
    std::vector<TableTime> out;
    for (int j = 0;; ++j) {
        const double t = tmin * std::pow(10.0, static_cast<double>(j) / pd);
        if (t >= tmax) break;
        bool keep = true;
        if (j > 0)
            for (double o : outputs)
                if (t > o / gap && t < o * gap) keep = false;
        if (keep) out.push_back({t, false, false});
    }
    for (double o : outputs) {
        out.push_back({o, false, true});
        if (fd) {
            const double h = ctx.scheme.fd_step * o;
            out.push_back({o - h, true, true});
            out.push_back({o + h, true, true});
        }
    }
    std::sort(out.begin(), out.end(), [](const TableTime& a, const TableTime& b) {
        return a.t < b.t || (a.t == b.t && a.fd_only < b.fd_only);
    });
    std::vector<TableTime> uniq;
    for (const auto& tt : out)
        if (uniq.empty() || std::abs(tt.t - uniq.back().t) > 1e-13 * tt.t)
            uniq.push_back(tt);
        else
            uniq.back().output = uniq.back().output || tt.output;
    return uniq;
}

// Nodes of int_0^t ds: [0, t/2] with s = (t/2) u^p, [t/2, t] with t - s = (t/2) u^p.
void s_rule(double t, int n, double p, std::vector<double>& s, std::vector<double>& w) {
    const auto& g = quad::gauss_legendre(n);
    s.clear();
    w.clear();
    for (int side = 0; side < 2; ++side)
        for (int q = 0; q < n; ++q) {
            const double u = 0.5 * (1.0 + g.nodes[q]);
            const double off = 0.5 * t * std::pow(u, p);
            s.push_back(side == 0 ? off : t - off);
            w.push_back(0.5 * g.weights[q] * 0.5 * t * p * std::pow(u, p - 1.0));
        }
}

// Interpolation of a rescaled table in log t, from the admissible nodes.
struct Stencil {
    int count = 0;
    int idx[4] = {0, 0, 0, 0};
    double w[4] = {0, 0, 0, 0};
    bool extrapolate = false;
    double ratio = 1.0;  // s / t_first for the power-law continuation
};

// Admissible nodes for time i: regular nodes clearly below t_i, and i itself.
// Keeping a gap below t_i keeps the stencils well conditioned and makes the
// finite-difference partners of an output time share their stencils.
Stencil make_stencil(const std::vector<TableTime>& times, int i, double s, double gap) {
    std::vector<int> allowed;
    for (int j = 0; j < i; ++j)
        if (!times[j].fd_only && times[j].t * gap <= times[i].t * (1.0 + 1e-12)) allowed.push_back(j);
    allowed.push_back(i);
    Stencil st;
    if (s < times[allowed[0]].t) {
        st.extrapolate = true;
        st.count = 1;
        st.idx[0] = allowed[0];
        st.w[0] = 1.0;
        st.ratio = s / times[allowed[0]].t;
        return st;
    }
    const int L = static_cast<int>(allowed.size());
    int p = 0;
    while (p + 1 < L && times[allowed[p + 1]].t <= s) ++p;
    const int cnt = std::min(4, L);
    int lo = std::clamp(p - 1, 0, L - cnt);
    st.count = cnt;
    const double ls = std::log(s);
    for (int a = 0; a < cnt; ++a) {
        st.idx[a] = allowed[lo + a];
        double wt = 1.0;
        const double la = std::log(times[allowed[lo + a]].t);
        for (int b = 0; b < cnt; ++b) {
            if (b == a) continue;
            const double lb = std::log(times[allowed[lo + b]].t);
            wt *= (ls - lb) / (la - lb);
        }
        st.w[a] = wt;
    }
    return st;
}

std::vector<double> interpolate(const std::vector<std::vector<double>>& table, const Stencil& st, double exponent) {
    std::vector<double> out(table[st.idx[0]].size(), 0.0);
    if (st.extrapolate) {
        axpy(std::pow(st.ratio, exponent), table[st.idx[0]], out);
        return out;
    }
    for (int a = 0; a < st.count; ++a) axpy(st.w[a], table[st.idx[a]], out);
    return out;
}

// Fit of the factorial law and choice of the number of terms.
SeriesSummary summarize(const std::vector<double>& c, double beta_over_alpha, double tol) {
    SeriesSummary s;
    s.term_norms = c;
    const int K = static_cast<int>(c.size()) - 1;
    const double c0 = c.empty() ? 0.0 : c[0];
    if (!(c0 > 0.0)) {
        s.n_used = 1;
        return s;
    }
    for (int k = 4; k <= K; ++k)
        if (c[k] >= c[k - 1] && c[k] > 1e-10 * c0)
            throw ConvergenceError("series term norms stopped decreasing at n = " + std::to_string(k) +
                                   "; the quadrature resolution is too coarse");
    double C = 0.0;
    for (int k = 1; k <= K; ++k)
        if (c[k - 1] > 0.0) C = std::max(C, c[k] / c[k - 1] * std::pow(k + 1.0, beta_over_alpha));
    s.ratio_constant = C;
    // extrapolated tail beyond the last computed term
    double tail = 0.0;
    if (K >= 1) {
        double term = c[K];
        for (int j = 1; j < 400; ++j) {
            const double r = C / std::pow(K + j + 1.0, beta_over_alpha);
            term *= r;
            tail += term;
            if (r < 1.0 && term < 1e-6 * tail) break;
            if (j == 399) tail = std::numeric_limits<double>::infinity();
        }
    }
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    for (int N = 0; N <= K; ++N) {
        double rem = tail;
        for (int k = N + 1; k <= K; ++k) rem += c[k];
        if (rem <= tol * total || N == K) {
            s.n_used = N + 1;
            s.remainder = rem;
            break;
        }
    }
    return s;
}

// Shared machinery of both slice kinds.
class Engine {
public:
    Engine(const ParametrixContext& ctx, const Lattice1D& lat, SliceKind kind, std::vector<double> anchor)
        : ctx_(ctx), lat_(lat), kind_(kind), anchor_(std::move(anchor)), d_(ctx.dim()), n_(lat.size()) {
        if (static_cast<int>(anchor_.size()) != d_) throw DomainError("anchor dimension mismatch");
        alpha_ = ctx.params().alpha;
        kappa_ = (kind_ == SliceKind::Backward ? 1.0 : 0.0) + d_ / alpha_;
        shape_.assign(d_, n_);
        for (int k = 0; k < d_; ++k) {
            anchor_sigma_.push_back(ctx.field.sigma_axis(k, anchor_[k]));
            breaks_.push_back(ctx.field.breakpoints(k));
        }
    }

    double scale(double t) const { return ctx_.params().b1 * std::pow(t, 1.0 / alpha_); }

    // Closed-form first term on the lattice of time t (unrescaled).
    std::vector<double> first(double t) const {
        const double sc = scale(t);
        std::vector<std::vector<double>> g(d_, std::vector<double>(n_)), dd(d_, std::vector<double>(n_));
        for (int k = 0; k < d_; ++k)
            for (int j = 0; j < n_; ++j) {
                const double delta = sc * lat_.w(j);
                const double z = anchor_[k] + delta;
                if (kind_ == SliceKind::Backward) {
                    const double th = t * anchor_sigma_[k];
                    g[k][j] = ctx_.ev->density(th, delta);
                    dd[k][j] = (ctx_.field.sigma_axis(k, z) - anchor_sigma_[k]) * ctx_.ev->time_derivative(th, delta);
                } else {
                    g[k][j] = ctx_.ev->density(t * ctx_.field.sigma_axis(k, z), delta);
                }
            }
        if (kind_ == SliceKind::Forward) return outer(g);
        std::vector<double> total(shape_size(shape_), 0.0);
        for (int k = 0; k < d_; ++k) {
            auto v = g;
            v[k] = dd[k];
            axpy(1.0, outer(v), total);
        }
        return total;
    }

    // Row matrices from the lattice of time s to the points `rows` on axis k.
    template <int Mode, int K>
    void backward_rows(int k, double t, double s, std::span<const double> rows,
                       std::array<Eigen::MatrixXd, K>& out) const {
        BackwardKernel<Mode> ker{ctx_.ev.get(), &ctx_.field, k, t - s, alpha_, {}};
        if constexpr (Mode == kGD) {
            ker.row_sigma.resize(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) ker.row_sigma[r] = ctx_.field.sigma_axis(k, rows[r]);
        }
        const AxisFrame in{anchor_[k], scale(s)};
        const double eps = ctx_.params().b1 * std::pow(t - s, 1.0 / alpha_);
        product_rows<K>(lat_, in, rows, eps, breaks_[k], ker, ctx_.scheme.product, out);
    }

    void forward_rows(int k, double t, double s, std::span<const double> rows,
                      std::array<Eigen::MatrixXd, 2>& out) const {
        ForwardKernel ker{ctx_.ev.get(), &ctx_.field, k, alpha_, {}, {}, {}};
        const double tau = t - s;
        for (double a : rows) {
            const double sg = ctx_.field.sigma_axis(k, a);
            ker.row_sigma.push_back(sg);
            ker.row_theta.push_back(tau * sg);
            ker.row_inv.push_back(std::pow(tau * sg, -1.0 / alpha_));
        }
        const AxisFrame in{anchor_[k], scale(s)};
        const double eps = ctx_.params().b1 * std::pow(tau, 1.0 / alpha_);
        product_rows<2>(lat_, in, rows, eps, breaks_[k], ker, ctx_.scheme.product, out);
    }

    std::vector<double> lattice_points(int k, double t) const {
        std::vector<double> p(n_);
        const double sc = scale(t);
        for (int j = 0; j < n_; ++j) p[j] = anchor_[k] + sc * lat_.w(j);
        return p;
    }

    // sum_k (D on axis k, G elsewhere)[U]
    std::vector<double> apply_q0(const std::vector<std::array<Eigen::MatrixXd, 2>>& mats,
                                 const std::vector<double>& U) const {
        std::vector<double> out(U.size(), 0.0);
        for (int k = 0; k < d_; ++k) {
            std::vector<const Eigen::MatrixXd*> m(d_);
            for (int j = 0; j < d_; ++j) m[j] = j == k ? &mats[j][1] : &mats[j][0];
            axpy(1.0, multi_mode_product(U, shape_, m), out);
        }
        return out;
    }

    std::vector<double> apply_G(const std::vector<std::array<Eigen::MatrixXd, 2>>& mats,
                                const std::vector<double>& U) const {
        std::vector<const Eigen::MatrixXd*> m(d_);
        for (int j = 0; j < d_; ++j) m[j] = &mats[j][0];
        return multi_mode_product(U, shape_, m);
    }

    // Weighted sup norm envelope at the lattice of time t.
    std::vector<double> envelope(double t, int term_kind) const {
        const double sc = scale(t);
        std::vector<double> env(shape_size(shape_));
        std::vector<int> idx(d_, 0);
        std::vector<double> delta(d_);
        const double beta = ctx_.params().beta;
        for (std::size_t p = 0; p < env.size(); ++p) {
            std::size_t rem = p;
            for (int k = d_ - 1; k >= 0; --k) {
                idx[k] = static_cast<int>(rem % n_);
                rem /= n_;
                delta[k] = sc * lat_.w(idx[k]);
            }
            if (term_kind == 0) {
                env[p] = q_envelope(alpha_, beta, t, delta);
            } else {
                double e = 1.0;
                for (double dl : delta) e *= t * std::pow(std::pow(t, 1.0 / alpha_) + std::abs(dl), -1.0 - alpha_);
                env[p] = e;
            }
        }
        return env;
    }

    SliceData run(const std::vector<double>& outputs, const SeriesOptions& opt) {
        const auto times = table_times(ctx_, outputs, opt.time_derivative);
        const int I = static_cast<int>(times.size());
        const int N = std::max(0, opt.n_max);
        const bool backward = kind_ == SliceKind::Backward;
        // forward iterates carry one more term: the closed-form p_.(t, x - .)
        const int terms = backward ? N + 1 : N + 2;
        std::vector<std::vector<std::vector<double>>> V(terms, std::vector<std::vector<double>>(I));
        std::vector<double> norms(backward ? terms : terms - 1, 0.0);
        const double beta_rate = ctx_.beta_decay / alpha_;
        auto decay_exponent = [&](int n) { return backward ? (n + 1) * beta_rate : n * beta_rate; };

        SliceData data;
        data.kind = kind_;
        data.anchor = anchor_;
        data.n_max = N;
        struct Pending {
            int time;
            std::vector<std::vector<std::vector<double>>> s_terms;  // [m][n]
        };
        std::vector<Pending> pending;

        const double gap = std::pow(10.0, 0.5 / ctx_.scheme.per_decade);
        const bool trivial = ctx_.field.is_constant();
        std::vector<double> s_nodes, s_weights;
        for (int i = 0; i < I; ++i) {
            const double t = times[i].t;
            const double tk = std::pow(t, kappa_);
            V[0][i] = first(t);
            for (double& v : V[0][i]) v *= tk;

            s_rule(t, ctx_.scheme.time_nodes, ctx_.time_power, s_nodes, s_weights);
            // constant coefficients: q_0 vanishes identically and so does every iterate
            if (trivial) s_nodes.clear(), s_weights.clear();
            const int M = static_cast<int>(s_nodes.size());
            std::vector<std::vector<std::array<Eigen::MatrixXd, 2>>> mats(M, std::vector<std::array<Eigen::MatrixXd, 2>>(d_));
            std::vector<Stencil> stencils(M);
            std::vector<std::vector<double>> first_s(M);
            for (int m = 0; m < M; ++m) {
                for (int k = 0; k < d_; ++k) {
                    const auto rows = lattice_points(k, t);
                    if (backward)
                        backward_rows<kGD, 2>(k, t, s_nodes[m], rows, mats[m][k]);
                    else
                        forward_rows(k, t, s_nodes[m], rows, mats[m][k]);
                }
                stencils[m] = make_stencil(times, i, s_nodes[m], gap);
                first_s[m] = first(s_nodes[m]);
            }
            auto input = [&](int n, int m) {
                if (n == 0) return first_s[m];
                auto u = interpolate(V[n], stencils[m], decay_exponent(n));
                const double f = std::pow(s_nodes[m], -kappa_);
                for (double& x : u) x *= f;
                return u;
            };
            for (int n = 1; n < terms; ++n) {
                std::vector<double> acc(shape_size(shape_), 0.0);
                if (trivial) {
                    V[n][i] = std::move(acc);
                    continue;
                }
                for (int m = 0; m < M; ++m) axpy(s_weights[m], apply_q0(mats[m], input(n - 1, m)), acc);
                for (double& v : acc) v *= tk;
                for (double v : acc)
                    if (!std::isfinite(v))
                        throw ConvergenceError("non-finite iterate q_" + std::to_string(n) + " at t = " +
                                               std::to_string(t));
                V[n][i] = std::move(acc);
            }
            // norms over the whole table
            const auto env = envelope(t, backward ? 0 : 1);
            for (int n = backward ? 0 : 1; n < terms; ++n) {
                double mx = 0.0;
                for (std::size_t p = 0; p < env.size(); ++p) mx = std::max(mx, std::abs(V[n][i][p]) / tk / env[p]);
                norms[backward ? n : n - 1] = std::max(norms[backward ? n : n - 1], mx);
            }
            if (!times[i].output) continue;

            SliceTime st;
            st.t = t;
            st.fd_only = times[i].fd_only;
            st.scale.assign(d_, scale(t));
            for (int n = 0; n < terms; ++n) {
                st.terms.push_back(V[n][i]);
                for (double& v : st.terms.back()) v /= tk;
            }
            if (backward) {
                Pending pd{static_cast<int>(data.times.size()), {}};
                st.phi.assign(terms, std::vector<double>(shape_size(shape_), 0.0));
                st.s_nodes = s_nodes;
                st.s_weights = s_weights;
                for (int m = 0; m < M; ++m) {
                    std::vector<std::vector<double>> per_n;
                    for (int n = 0; n < terms; ++n) {
                        auto u = input(n, m);
                        axpy(s_weights[m], apply_G(mats[m], u), st.phi[n]);
                        per_n.push_back(std::move(u));
                    }
                    pd.s_terms.push_back(std::move(per_n));
                }
                pending.push_back(std::move(pd));
            }
            data.times.push_back(std::move(st));
        }

        data.summary = summarize(norms, ctx_.params().beta / alpha_, opt.tol);
        const int used = data.summary.n_used;
        for (auto& pd : pending) {
            auto& st = data.times[pd.time];
            for (auto& per_n : pd.s_terms) {
                std::vector<double> sum(shape_size(shape_), 0.0);
                for (int n = 0; n < used; ++n) axpy(1.0, per_n[n], sum);
                st.s_sum.push_back(std::move(sum));
            }
        }
        // extent check on the summed quantity
        for (const auto& st : data.times) {
            std::vector<double> sum(shape_size(shape_), 0.0);
            const int upto = backward ? used : used + 1;
            for (int n = 0; n < upto; ++n) axpy(1.0, st.terms[n], sum);
            data.summary.degraded = data.summary.degraded || edge_fraction(sum) > 0.05;
        }
        return data;
    }

    double edge_fraction(const std::vector<double>& v) const {
        double mx = 0.0, edge = 0.0;
        std::vector<int> idx(d_);
        for (std::size_t p = 0; p < v.size(); ++p) {
            std::size_t rem = p;
            bool on_edge = false;
            for (int k = d_ - 1; k >= 0; --k) {
                const int j = static_cast<int>(rem % n_);
                rem /= n_;
                on_edge = on_edge || j == 0 || j == n_ - 1;
            }
            mx = std::max(mx, std::abs(v[p]));
            if (on_edge) edge = std::max(edge, std::abs(v[p]));
        }
        return mx > 0.0 ? edge / mx : 0.0;
    }

    const Shape& shape() const { return shape_; }

private:
    const ParametrixContext& ctx_;
    const Lattice1D& lat_;
    SliceKind kind_;
    std::vector<double> anchor_;
    int d_, n_;
    double alpha_ = 1.0, kappa_ = 1.0;
    Shape shape_;
    std::vector<double> anchor_sigma_;
    std::vector<std::vector<double>> breaks_;
};

int find_time(const SliceData& data, double t) {
    for (std::size_t i = 0; i < data.times.size(); ++i)
        if (std::abs(data.times[i].t - t) <= 1e-12 * t) return static_cast<int>(i);
    throw PreconditionError("time " + std::to_string(t) + " is not tabulated in this slice");
}

void check_points(const std::vector<std::vector<double>>& points, int d) {
    if (static_cast<int>(points.size()) != d) throw DomainError("point grid dimension mismatch");
}

}  // namespace

// ---------------------------------------------------------------- backward

BackwardSlice::BackwardSlice(std::shared_ptr<const ParametrixContext> ctx, std::vector<double> y,
                             std::vector<double> times, const SeriesOptions& options)
    : ctx_(std::move(ctx)), lattice_(ctx_->scheme.space, 1.0 + ctx_->params().alpha) {
    data_.anchor = std::move(y);
    build(times, options);
}

BackwardSlice::BackwardSlice(std::shared_ptr<const ParametrixContext> ctx, SliceData data)
    : ctx_(std::move(ctx)), lattice_(ctx_->scheme.space, 1.0 + ctx_->params().alpha), data_(std::move(data)) {}

void BackwardSlice::build(const std::vector<double>& times, const SeriesOptions& options) {
    Engine eng(*ctx_, lattice_, SliceKind::Backward, data_.anchor);
    data_ = eng.run(times, options);
}

Shape BackwardSlice::shape() const { return Shape(ctx_->dim(), lattice_.size()); }

int BackwardSlice::time_index(double t) const { return find_time(data_, t); }

double BackwardSlice::node(double t, int axis, int j) const {
    return data_.anchor[axis] + at(t).scale[axis] * lattice_.w(j);
}

std::vector<double> BackwardSlice::frozen(double t) const {
    const int d = ctx_->dim();
    std::vector<std::vector<double>> pts(d);
    for (int k = 0; k < d; ++k)
        for (int j = 0; j < lattice_.size(); ++j) pts[k].push_back(node(t, k, j));
    std::vector<std::vector<double>> g(d);
    for (int k = 0; k < d; ++k) {
        const double th = t * ctx_->field.sigma_axis(k, data_.anchor[k]);
        for (double p : pts[k]) g[k].push_back(ctx_->ev->density(th, p - data_.anchor[k]));
    }
    return outer(g);
}

std::vector<double> BackwardSlice::q(double t) const {
    const auto& st = at(t);
    std::vector<double> sum(st.terms[0].size(), 0.0);
    for (int n = 0; n < data_.summary.n_used; ++n) axpy(1.0, st.terms[n], sum);
    return sum;
}

std::vector<double> BackwardSlice::pA(double t) const {
    const auto& st = at(t);
    auto out = frozen(t);
    for (int n = 0; n < data_.summary.n_used; ++n) axpy(1.0, st.phi[n], out);
    return out;
}

std::vector<double> BackwardSlice::truncation_bound(double t) const {
    const int d = ctx_->dim();
    const int n = lattice_.size();
    std::vector<double> out(shape_size(shape()));
    std::vector<double> delta(d);
    for (std::size_t p = 0; p < out.size(); ++p) {
        std::size_t rem = p;
        for (int k = d - 1; k >= 0; --k) {
            delta[k] = node(t, k, static_cast<int>(rem % n)) - data_.anchor[k];
            rem /= n;
        }
        out[p] = data_.summary.remainder * q_envelope(ctx_->params().alpha, ctx_->params().beta, t, delta);
    }
    return out;
}

std::vector<double> BackwardSlice::error_estimate(double t) const {
    const auto& st = at(t);
    const auto p = pA(t);
    const auto& c = data_.summary.term_norms;
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    const double rel = total > 0.0 ? data_.summary.remainder / total : 0.0;
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double phi = 0.0;
        for (int n = 0; n < data_.summary.n_used; ++n) phi += st.phi[n][i];
        out[i] = ctx_->scheme.tolerance * std::abs(p[i]) + rel * std::abs(phi);
    }
    return out;
}

std::vector<double> BackwardSlice::correction(double t, const std::vector<std::vector<double>>& points,
                                              int grad_axis) const {
    const int d = ctx_->dim();
    check_points(points, d);
    const auto& st = at(t);
    Engine eng(*ctx_, lattice_, SliceKind::Backward, data_.anchor);
    Shape out_shape(d);
    for (int k = 0; k < d; ++k) out_shape[k] = static_cast<int>(points[k].size());
    std::vector<double> out(shape_size(out_shape), 0.0);
    if (st.s_sum.empty()) return out;
    const Shape sh = shape();
    for (std::size_t m = 0; m < st.s_nodes.size(); ++m) {
        const double s = st.s_nodes[m];
        std::vector<Eigen::MatrixXd> M(d);
        for (int k = 0; k < d; ++k) {
            std::array<Eigen::MatrixXd, 1> r;
            if (k == grad_axis)
                eng.backward_rows<kGp, 1>(k, t, s, points[k], r);
            else
                eng.backward_rows<kG, 1>(k, t, s, points[k], r);
            M[k] = std::move(r[0]);
        }
        std::vector<const Eigen::MatrixXd*> ptr(d);
        for (int k = 0; k < d; ++k) ptr[k] = &M[k];
        axpy(st.s_weights[m], multi_mode_product(st.s_sum[m], sh, ptr), out);
    }
    return out;
}

std::vector<double> BackwardSlice::evaluate(double t, const std::vector<std::vector<double>>& points) const {
    const int d = ctx_->dim();
    check_points(points, d);
    std::vector<std::vector<double>> g(d);
    for (int k = 0; k < d; ++k) {
        const double th = t * ctx_->field.sigma_axis(k, data_.anchor[k]);
        for (double p : points[k]) g[k].push_back(ctx_->ev->density(th, p - data_.anchor[k]));
    }
    auto out = outer(g);
    axpy(1.0, correction(t, points, -1), out);
    return out;
}

double BackwardSlice::value(double t, std::span<const double> x) const {
    std::vector<std::vector<double>> pts;
    for (double v : x) pts.push_back({v});
    return evaluate(t, pts)[0];
}

std::vector<double> BackwardSlice::gradient(double t, int k, const std::vector<std::vector<double>>& points) const {
    if (!(ctx_->params().alpha > 1.0))
        throw UnsupportedError("the gradient representation is only available for alpha in (1, 2)");
    const int d = ctx_->dim();
    check_points(points, d);
    if (k < 0 || k >= d) throw DomainError("coordinate index out of range");
    std::vector<std::vector<double>> g(d);
    for (int j = 0; j < d; ++j) {
        const double th = t * ctx_->field.sigma_axis(j, data_.anchor[j]);
        for (double p : points[j])
            g[j].push_back(j == k ? ctx_->ev->derivative(th, p - data_.anchor[j])
                                  : ctx_->ev->density(th, p - data_.anchor[j]));
    }
    auto out = outer(g);
    axpy(1.0, correction(t, points, k), out);
    return out;
}

std::vector<double> BackwardSlice::gradient_at(double t, std::span<const double> x) const {
    std::vector<std::vector<double>> pts;
    for (double v : x) pts.push_back({v});
    std::vector<double> out;
    for (int k = 0; k < ctx_->dim(); ++k) out.push_back(gradient(t, k, pts)[0]);
    return out;
}

double BackwardSlice::time_derivative(double t, std::span<const double> x) const {
    const double h = ctx_->scheme.fd_step * t;
    return (value(t + h, x) - value(t - h, x)) / (2.0 * h);
}

namespace {

class SliceLine : public LineFunction {
public:
    SliceLine(const BackwardSlice& s, double t) : slice_(s), t_(t) { s.time_index(t); }
    int dim() const override { return slice_.context().dim(); }
    void line(int k, std::span<const double> x, std::span<const double> offsets,
              std::span<double> out) const override {
        std::vector<std::vector<double>> pts;
        for (std::size_t j = 0; j < x.size(); ++j) pts.push_back({x[j]});
        pts[k].clear();
        for (double o : offsets) pts[k].push_back(x[k] + o);
        const auto v = slice_.evaluate(t_, pts);
        std::copy(v.begin(), v.end(), out.begin());
    }
    TailModel tail_model() const override { return TailModel::PowerLaw; }
    double tail_exponent() const override { return 1.0 + slice_.context().params().alpha; }

private:
    const BackwardSlice& slice_;
    double t_;
};

}  // namespace

std::unique_ptr<LineFunction> BackwardSlice::line_function(double t) const {
    return std::make_unique<SliceLine>(*this, t);
}

// ---------------------------------------------------------------- forward

ForwardSlice::ForwardSlice(std::shared_ptr<const ParametrixContext> ctx, std::vector<double> x,
                           std::vector<double> times, const SeriesOptions& options)
    : ctx_(std::move(ctx)), lattice_(ctx_->scheme.space, 1.0 + ctx_->params().alpha) {
    data_.anchor = std::move(x);
    build(times, options);
}

ForwardSlice::ForwardSlice(std::shared_ptr<const ParametrixContext> ctx, SliceData data)
    : ctx_(std::move(ctx)), lattice_(ctx_->scheme.space, 1.0 + ctx_->params().alpha), data_(std::move(data)) {}

void ForwardSlice::build(const std::vector<double>& times, const SeriesOptions& options) {
    Engine eng(*ctx_, lattice_, SliceKind::Forward, data_.anchor);
    data_ = eng.run(times, options);
}

Shape ForwardSlice::shape() const { return Shape(ctx_->dim(), lattice_.size()); }

int ForwardSlice::time_index(double t) const { return find_time(data_, t); }

double ForwardSlice::node(double t, int axis, int j) const {
    return data_.anchor[axis] + at(t).scale[axis] * lattice_.w(j);
}

std::vector<double> ForwardSlice::pA(double t) const {
    const auto& st = at(t);
    std::vector<double> out(st.terms[0].size(), 0.0);
    for (int n = 0; n <= data_.summary.n_used && n < static_cast<int>(st.terms.size()); ++n)
        axpy(1.0, st.terms[n], out);
    return out;
}

std::vector<double> ForwardSlice::evaluate(double t, const std::vector<std::vector<double>>& points) const {
    const int d = ctx_->dim();
    check_points(points, d);
    const auto& st = at(t);
    std::vector<std::vector<double>> g(d);
    std::vector<Eigen::MatrixXd> W(d);
    const int n = lattice_.size();
    for (int k = 0; k < d; ++k) {
        W[k].resize(static_cast<Eigen::Index>(points[k].size()), n);
        std::vector<double> row(n);
        for (std::size_t r = 0; r < points[k].size(); ++r) {
            const double p = points[k][r];
            g[k].push_back(ctx_->ev->density(t * ctx_->field.sigma_axis(k, p), data_.anchor[k] - p));
            lattice_.weights_at((p - data_.anchor[k]) / st.scale[k], row);
            for (int j = 0; j < n; ++j) W[k](static_cast<Eigen::Index>(r), j) = row[j];
        }
    }
    auto out = outer(g);
    std::vector<double> corr(st.terms[0].size(), 0.0);
    for (int m = 1; m <= data_.summary.n_used && m < static_cast<int>(st.terms.size()); ++m)
        axpy(1.0, st.terms[m], corr);
    std::vector<const Eigen::MatrixXd*> ptr(d);
    for (int k = 0; k < d; ++k) ptr[k] = &W[k];
    axpy(1.0, multi_mode_product(corr, shape(), ptr), out);
    return out;
}

double ForwardSlice::value(double t, std::span<const double> y) const {
    std::vector<std::vector<double>> pts;
    for (double v : y) pts.push_back({v});
    return evaluate(t, pts)[0];
}

double ForwardSlice::mass(double t, std::span<const double> half_width) const {
    const int d = ctx_->dim();
    if (static_cast<int>(half_width.size()) != d) throw DomainError("half-width dimension mismatch");
    const auto& st = at(t);
    const double alpha = ctx_->params().alpha;
    // closed-form leading term: product of one-dimensional integrals
    double lead = 1.0;
    const double a1 = std::tgamma(alpha + 1.0) * std::sin(M_PI * alpha / 2.0) / M_PI;
    for (int k = 0; k < d; ++k) {
        const double xk = data_.anchor[k];
        const double sc = st.scale[k];
        auto f = [&](double z) { return ctx_->ev->density(t * ctx_->field.sigma_axis(k, z), xk - z); };
        const double R0 = 1e4 * sc;
        const double L = std::min(half_width[k], R0);
        std::vector<double> breaks;
        for (double b : {0.0, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0})
            if (b * sc < L) {
                breaks.push_back(xk + b * sc);
                breaks.push_back(xk - b * sc);
            }
        for (double b : ctx_->field.breakpoints(k)) breaks.push_back(b);
        double v = quad::gauss_kronrod_pieces(f, xk - L, xk + L, breaks, 1e-14, 1e-11).value;
        if (std::isinf(half_width[k])) {
            // g_theta(u) ~ a1 theta |u|^{-1-alpha}
            const double sp = ctx_->field.sigma_axis(k, xk + R0), sm = ctx_->field.sigma_axis(k, xk - R0);
            v += a1 * t * (sp + sm) * std::pow(R0, -alpha) / alpha;
        }
        lead *= v;
    }
    // correction terms through the spline integral weights
    std::vector<double> corr(st.terms[0].size(), 0.0);
    for (int m = 1; m <= data_.summary.n_used && m < static_cast<int>(st.terms.size()); ++m)
        axpy(1.0, st.terms[m], corr);
    std::vector<std::vector<double>> wts(d, std::vector<double>(lattice_.size()));
    std::vector<std::span<const double>> spans;
    for (int k = 0; k < d; ++k) {
        const double L = half_width[k] / st.scale[k];
        lattice_.integral_weights(-L, L, wts[k]);
        for (double& w : wts[k]) w *= st.scale[k];
        spans.emplace_back(wts[k]);
    }
    return lead + contract_vectors(corr, shape(), spans);
}

// ---------------------------------------------------------------- entry points

BackwardSlice q_sum(std::shared_ptr<const ParametrixContext> ctx, std::span<const double> y,
                    std::vector<double> times, int n_max, double tol) {
    if (n_max < 1) throw PreconditionError("q_sum needs N_max >= 1");
    SeriesOptions opt;
    opt.n_max = n_max;
    opt.tol = tol;
    return BackwardSlice(std::move(ctx), std::vector<double>(y.begin(), y.end()), std::move(times), opt);
}

BackwardSlice picard_iterate(const BackwardSlice& prev) {
    SeriesOptions opt;
    opt.n_max = prev.data().n_max + 1;
    std::vector<double> times;
    bool fd = false;
    for (const auto& st : prev.data().times) {
        if (!st.fd_only) times.push_back(st.t);
        fd = fd || st.fd_only;
    }
    opt.time_derivative = fd;
    return BackwardSlice(prev.context_ptr(), prev.y(), times, opt);
}

PointValue assemble_pA(const BackwardSlice& slice, double t, std::span<const double> x) {
    PointValue pv;
    pv.value = slice.value(t, x);
    const auto& c = slice.summary().term_norms;
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    const double rel = total > 0.0 ? slice.summary().remainder / total : 0.0;
    const double frozen = frozen_density(slice.context(), t, x, slice.y());
    pv.error_estimate = slice.context().scheme.tolerance * std::abs(pv.value) + rel * std::abs(pv.value - frozen);
    return pv;
}

std::vector<double> pA_gradient(const BackwardSlice& slice, double t, std::span<const double> x) {
    return slice.gradient_at(t, x);
}

}  // namespace cylheat
