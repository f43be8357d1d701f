#include "smm/volterra_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "smm/black_scholes.hpp"
#include "smm/parallel.hpp"

namespace smm {

namespace {

inline double pow_small(double u, int e) {
    double p = 1.0;
    for (int t = 0; t < e; ++t) p *= u;
    return p;
}

} // namespace

struct VolterraEngine::Impl {
    MarketSpec spec;
    SolverGrid grid;
    int k = 0, N = 0, M = 0;
    double dt = 0.0, ds = 0.0, K = 0.0, T = 0.0;
    PriceSurface surface;

    // Holding density in the form f(v) = coef * v^am1 * exp(-rate v).
    std::vector<int> am1;
    std::vector<double> coef;
    std::vector<double> hrate;

    std::vector<double> F;    // [i*(N+1)+l]
    std::vector<double> fl;   // pdf at l dt
    std::vector<double> er;   // exp(-r_i l dt)
    std::vector<double> erb;  // er * exp(-hrate_i l dt)
    std::vector<double> eta;  // [(i*(N+1)+n)*(M+1)+m]
    std::vector<double> etad;
    std::vector<double> logm;   // ln(m ds)
    std::vector<double> payoff; // (m ds - K)^+

    struct Band {
        int lo = 0;
        int len = 0;
        std::size_t off = 0;
    };
    std::vector<Band> bands; // [(i*N + l-1)*(M+1) + m]
    std::vector<float> w;
    // hedge-moment kernel: exact per-cell integral of the score factor
    // (ln(x/s) - (r - sigma^2/2) v) / (sigma^2 v) against the transition
    // density, divided by the source stock level. Differences of the normal
    // density at the cell edges keep it stable when the kernel is narrower
    // than one cell.
    std::vector<float> wh;
    double tail_max_full = 0.0;
    double tail_max_interior = 0.0;

    bool implicit_step = false;
    std::vector<double> lu; // k*k, factored in place
    std::vector<int> piv;

    std::vector<std::size_t> qoff; // block offset per n
    std::vector<float> qd, qh;
    std::vector<double> mix; // [(n*k+i)*(M+1)+m']

    // ---------------------------------------------------------------

    std::size_t vidx(int n, int m, int i) const {
        return (static_cast<std::size_t>(n) * (M + 1) + m) * k + i;
    }
    double p(int i, int j) const { return spec.transitions(i, j); }

    void setup(const MarketSpec& s, const SolverGrid& g) {
        require_valid(s);
        spec = s;
        grid = g;
        k = s.num_regimes();
        N = g.n_steps;
        M = g.m_max;
        dt = g.dt;
        ds = g.ds;
        K = s.strike;
        T = s.maturity;
        if (g.horizon != T) throw DomainError("grid horizon does not match spec maturity");
        if (!g.allow_unstable && g.dt > stability_bound(s) * (1.0 + 1e-12))
            throw StabilityViolation("dt exceeds the stability bound");

        am1.resize(k);
        coef.resize(k);
        hrate.resize(k);
        for (int i = 0; i < k; ++i) {
            const auto& h = s.holding[static_cast<std::size_t>(i)];
            const int a = (h.family == HoldingFamily::Gamma)
                              ? static_cast<int>(std::lround(h.shape))
                              : 1;
            am1[i] = a - 1;
            double fac = 1.0;
            for (int t = 2; t < a; ++t) fac *= t;
            coef[i] = std::pow(h.rate, a) / fac;
            hrate[i] = h.rate;
        }

        F.assign(static_cast<std::size_t>(k) * (N + 1), 0.0);
        fl = F;
        er = F;
        erb = F;
        for (int i = 0; i < k; ++i) {
            const auto& h = s.holding[static_cast<std::size_t>(i)];
            const double r = s.regimes[static_cast<std::size_t>(i)].r;
            for (int l = 0; l <= N; ++l) {
                const double v = l * dt;
                F[static_cast<std::size_t>(i) * (N + 1) + l] = h.cdf(v);
                fl[static_cast<std::size_t>(i) * (N + 1) + l] = h.pdf(v);
                er[static_cast<std::size_t>(i) * (N + 1) + l] = std::exp(-r * v);
                erb[static_cast<std::size_t>(i) * (N + 1) + l] = std::exp(-(r + hrate[i]) * v);
            }
        }

        payoff.resize(static_cast<std::size_t>(M) + 1);
        logm.assign(static_cast<std::size_t>(M) + 1, 0.0);
        for (int m = 0; m <= M; ++m) {
            payoff[static_cast<std::size_t>(m)] = std::max(m * ds - K, 0.0);
            if (m >= 1) logm[static_cast<std::size_t>(m)] = std::log(m * ds);
        }

        eta.assign(static_cast<std::size_t>(k) * (N + 1) * (M + 1), 0.0);
        etad = eta;
        parallel::parallel_for(static_cast<long>(k) * (N + 1), [&](long b, long e) {
            for (long j = b; j < e; ++j) {
                const int i = static_cast<int>(j / (N + 1));
                const int n = static_cast<int>(j % (N + 1));
                const auto& rp = spec.regimes[static_cast<std::size_t>(i)];
                for (int m = 0; m <= M; ++m) {
                    const BsQuote q = bs_call(grid.time(n), m * ds, rp.r, rp.sigma, K, T);
                    eta[(static_cast<std::size_t>(i) * (N + 1) + n) * (M + 1) + m] = q.price;
                    etad[(static_cast<std::size_t>(i) * (N + 1) + n) * (M + 1) + m] = q.delta;
                }
            }
        });

        build_kernels();
        build_coupling();

        qoff.assign(static_cast<std::size_t>(N) + 1, 0);
        for (int n = 1; n < N; ++n)
            qoff[static_cast<std::size_t>(n) + 1] =
                qoff[static_cast<std::size_t>(n)] + static_cast<std::size_t>(k) * (M + 1) * n;
        mix.assign(static_cast<std::size_t>(N + 1) * k * (M + 1), 0.0);
    }

    void build_kernels() {
        bands.assign(static_cast<std::size_t>(k) * N * (M + 1), Band{});
        std::vector<double> tails_full(static_cast<std::size_t>(k) * N, 0.0);
        std::vector<double> tails_int(static_cast<std::size_t>(k) * N, 0.0);

        // Band ranges first (cheap), then offsets, then the mass fill.
        for (int i = 0; i < k; ++i) {
            const auto& rp = spec.regimes[static_cast<std::size_t>(i)];
            for (int l = 1; l <= N; ++l) {
                const double v = l * dt;
                const double sd = rp.sigma * std::sqrt(v);
                const double drift = (rp.r - 0.5 * rp.sigma * rp.sigma) * v;
                for (int m = 1; m <= M; ++m) {
                    const double center = logm[static_cast<std::size_t>(m)] + drift;
                    const double lo_x = std::exp(center - 8.0 * sd);
                    const double hi_x = std::exp(center + 8.0 * sd);
                    int lo = std::max(1, static_cast<int>(std::llround(lo_x / ds)));
                    int hi = std::min(M, static_cast<int>(std::llround(hi_x / ds)));
                    Band& b = bands[(static_cast<std::size_t>(i) * N + l - 1) * (M + 1) + m];
                    b.lo = lo;
                    b.len = hi >= lo ? hi - lo + 1 : 0;
                }
            }
        }
        std::size_t total = 0;
        for (auto& b : bands) {
            b.off = total;
            total += static_cast<std::size_t>(b.len);
        }
        w.assign(total, 0.0f);
        wh.assign(total, 0.0f);

        parallel::parallel_for(static_cast<long>(k) * N, [&](long jb, long je) {
            for (long j = jb; j < je; ++j) {
                const int i = static_cast<int>(j / N);
                const int l = static_cast<int>(j % N) + 1;
                const auto& rp = spec.regimes[static_cast<std::size_t>(i)];
                const double v = l * dt;
                const double sd = rp.sigma * std::sqrt(v);
                const double inv_sd = 1.0 / sd;
                const double drift = (rp.r - 0.5 * rp.sigma * rp.sigma) * v;
                const double top_edge = std::log((M + 0.5) * ds);
                double tf = 0.0, ti = 0.0;
                for (int m = 1; m <= M; ++m) {
                    const Band& b = bands[(static_cast<std::size_t>(i) * N + l - 1) * (M + 1) + m];
                    const double center = logm[static_cast<std::size_t>(m)] + drift;
                    const double tail = norm_cdf(-(top_edge - center) * inv_sd);
                    tf = std::max(tf, tail);
                    if (2 * m <= M) ti = std::max(ti, tail);
                    if (b.len == 0) continue;
                    float* out = w.data() + b.off;
                    float* outh = wh.data() + b.off;
                    const double inv_source = 1.0 / (m * ds);
                    if (grid.kernel_rule == KernelRule::PointDensity) {
                        for (int t = 0; t < b.len; ++t) {
                            const double x = (b.lo + t) * ds;
                            const double lz = logm[static_cast<std::size_t>(b.lo + t)] - center;
                            const double z = lz * inv_sd;
                            const double mass = norm_pdf(z) / (x * sd) * ds;
                            out[t] = static_cast<float>(mass);
                            outh[t] = static_cast<float>(mass * lz / (sd * sd) * inv_source);
                        }
                    } else {
                        double zprev = (std::log((b.lo - 0.5) * ds) - center) * inv_sd;
                        double cprev = norm_cdf(zprev);
                        double dprev = norm_pdf(zprev);
                        for (int t = 0; t < b.len; ++t) {
                            const double zcur =
                                (std::log((b.lo + t + 0.5) * ds) - center) * inv_sd;
                            const double ccur = norm_cdf(zcur);
                            const double dcur = norm_pdf(zcur);
                            out[t] = static_cast<float>(ccur - cprev);
                            outh[t] = static_cast<float>((dprev - dcur) * inv_sd * inv_source);
                            zprev = zcur;
                            cprev = ccur;
                            dprev = dcur;
                        }
                    }
                }
                tails_full[static_cast<std::size_t>(j)] = tf;
                tails_int[static_cast<std::size_t>(j)] = ti;
            }
        });
        tail_max_full = *std::max_element(tails_full.begin(), tails_full.end());
        tail_max_interior = *std::max_element(tails_int.begin(), tails_int.end());
    }

    void build_coupling() {
        implicit_step = false;
        std::vector<double> f0(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < k; ++i) {
            f0[static_cast<std::size_t>(i)] = spec.holding[static_cast<std::size_t>(i)].pdf(0.0);
            if (f0[static_cast<std::size_t>(i)] > 0.0) implicit_step = true;
        }
        if (!implicit_step) return;
        lu.assign(static_cast<std::size_t>(k) * k, 0.0);
        piv.assign(static_cast<std::size_t>(k), 0);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                lu[static_cast<std::size_t>(i) * k + j] =
                    (i == j ? 1.0 : 0.0) - 0.5 * dt * f0[static_cast<std::size_t>(i)] * p(i, j);
        for (int c = 0; c < k; ++c) {
            int pr = c;
            for (int r2 = c + 1; r2 < k; ++r2)
                if (std::abs(lu[static_cast<std::size_t>(r2) * k + c]) >
                    std::abs(lu[static_cast<std::size_t>(pr) * k + c]))
                    pr = r2;
            piv[static_cast<std::size_t>(c)] = pr;
            if (pr != c)
                for (int j = 0; j < k; ++j)
                    std::swap(lu[static_cast<std::size_t>(c) * k + j],
                              lu[static_cast<std::size_t>(pr) * k + j]);
            const double pivot = lu[static_cast<std::size_t>(c) * k + c];
            if (std::abs(pivot) < 1e-14)
                throw NonConvergence("regime coupling system is singular");
            for (int r2 = c + 1; r2 < k; ++r2) {
                const double fmul = lu[static_cast<std::size_t>(r2) * k + c] / pivot;
                lu[static_cast<std::size_t>(r2) * k + c] = fmul;
                for (int j = c + 1; j < k; ++j)
                    lu[static_cast<std::size_t>(r2) * k + j] -=
                        fmul * lu[static_cast<std::size_t>(c) * k + j];
            }
        }
    }

    void lu_solve(double* x) const {
        for (int c = 0; c < k; ++c) {
            const int pr = piv[static_cast<std::size_t>(c)];
            if (pr != c) std::swap(x[c], x[pr]);
            for (int r2 = c + 1; r2 < k; ++r2) x[r2] -= lu[static_cast<std::size_t>(r2) * k + c] * x[c];
        }
        for (int c = k - 1; c >= 0; --c) {
            for (int j = c + 1; j < k; ++j) x[c] -= lu[static_cast<std::size_t>(c) * k + j] * x[j];
            x[c] /= lu[static_cast<std::size_t>(c) * k + c];
        }
    }

    void mix_row(int n, const std::vector<double>& values) {
        for (int i = 0; i < k; ++i) {
            double* out = mix.data() + (static_cast<std::size_t>(n) * k + i) * (M + 1);
            for (int m = 0; m <= M; ++m) {
                double acc = 0.0;
                const double* src = values.data() + vidx(n, m, 0);
                for (int j = 0; j < k; ++j) acc += p(i, j) * src[j];
                out[m] = acc;
            }
        }
    }

    /// Kernel matvecs of step n against history mixes: writes the block
    /// qdn[((i*(M+1))+m)*n + (l-1)] and optionally the hedge moments.
    void diag_block(int n, float* qdn, float* qhn) const {
        parallel::parallel_for(static_cast<long>(k) * n, [&](long jb, long je) {
            for (long j = jb; j < je; ++j) {
                const int i = static_cast<int>(j / n);
                const int l = static_cast<int>(j % n) + 1;
                const double* mrow = mix.data() + (static_cast<std::size_t>(n - l) * k + i) * (M + 1);
                for (int m = 1; m <= M; ++m) {
                    const Band& b = bands[(static_cast<std::size_t>(i) * N + l - 1) * (M + 1) + m];
                    const float* ww = w.data() + b.off;
                    const double* mx = mrow + b.lo;
                    const std::size_t out_at = (static_cast<std::size_t>(i) * (M + 1) + m) * n + l - 1;
                    if (qhn) {
                        const float* wwh = wh.data() + b.off;
                        double acc = 0.0, acch = 0.0;
                        for (int t = 0; t < b.len; ++t) {
                            acc += static_cast<double>(ww[t]) * mx[t];
                            acch += static_cast<double>(wwh[t]) * mx[t];
                        }
                        qdn[out_at] = static_cast<float>(acc);
                        qhn[out_at] = static_cast<float>(acch);
                    } else {
                        double acc = 0.0;
                        for (int t = 0; t < b.len; ++t) acc += static_cast<double>(ww[t]) * mx[t];
                        qdn[out_at] = static_cast<float>(acc);
                    }
                }
            }
        });
    }

    /// Backward march. inject >= 0 perturbs that step, inject == -2 never,
    /// inject == -1 perturbs every step 0..N-1. store_tables keeps the
    /// quadrature diagonals for later queries.
    void march(std::vector<double>& values, int inject, double delta, bool store_tables) {
        values.assign(static_cast<std::size_t>(N + 1) * (M + 1) * k, 0.0);
        for (int m = 0; m <= M; ++m)
            for (int i = 0; i < k; ++i) values[vidx(0, m, i)] = payoff[static_cast<std::size_t>(m)];

        auto maybe_inject = [&](int n) {
            if (delta == 0.0 || n >= N) return;
            if (inject == -1 || inject == n) {
                double* row = values.data() + vidx(n, 0, 0);
                const std::size_t len = static_cast<std::size_t>(M + 1) * k;
                for (std::size_t t = 0; t < len; ++t) row[t] += delta;
            }
        };
        maybe_inject(0);
        mix_row(0, values);

        std::vector<float> scratch;
        if (store_tables) {
            const std::size_t total =
                static_cast<std::size_t>(k) * (M + 1) * N * (static_cast<std::size_t>(N) + 1) / 2;
            qd.assign(total, 0.0f);
            qh.assign(total, 0.0f);
        } else {
            scratch.assign(static_cast<std::size_t>(k) * (M + 1) * N, 0.0f);
        }

        for (int n = 1; n <= N; ++n) {
            float* qdn = store_tables ? qd.data() + qoff[static_cast<std::size_t>(n)] : scratch.data();
            float* qhn = store_tables ? qh.data() + qoff[static_cast<std::size_t>(n)] : nullptr;
            diag_block(n, qdn, qhn);

            parallel::parallel_for(M, [&](long mb, long me) {
                std::vector<double> rhs(static_cast<std::size_t>(k));
                for (long mm = mb; mm < me; ++mm) {
                    const int m = static_cast<int>(mm) + 1;
                    for (int i = 0; i < k; ++i) {
                        const double* erl = er.data() + static_cast<std::size_t>(i) * (N + 1);
                        const double* fll = fl.data() + static_cast<std::size_t>(i) * (N + 1);
                        const float* q = qdn + (static_cast<std::size_t>(i) * (M + 1) + m) * n;
                        double acc = 0.0;
                        for (int l = 1; l < n; ++l) acc += erl[l] * fll[l] * q[l - 1];
                        acc += 0.5 * erl[n] * fll[n] * q[n - 1];
                        rhs[static_cast<std::size_t>(i)] =
                            (1.0 - F[static_cast<std::size_t>(i) * (N + 1) + n]) *
                                eta[(static_cast<std::size_t>(i) * (N + 1) + n) * (M + 1) + m] +
                            dt * acc;
                    }
                    if (implicit_step) lu_solve(rhs.data());
                    for (int i = 0; i < k; ++i) values[vidx(n, m, i)] = rhs[static_cast<std::size_t>(i)];
                }
            });
            maybe_inject(n);
            mix_row(n, values);
        }
    }

    void build_query_tables_from(const std::vector<double>& values) {
        const std::size_t total =
            static_cast<std::size_t>(k) * (M + 1) * N * (static_cast<std::size_t>(N) + 1) / 2;
        qd.assign(total, 0.0f);
        qh.assign(total, 0.0f);
        for (int n = 0; n <= N; ++n) mix_row(n, values);
        for (int n = 1; n <= N; ++n)
            diag_block(n, qd.data() + qoff[static_cast<std::size_t>(n)],
                       qh.data() + qoff[static_cast<std::size_t>(n)]);
    }

    // ------------------------------------------------------------------
    // queries
    // ------------------------------------------------------------------

    double survival(int i, double y) const { return spec.holding[static_cast<std::size_t>(i)].survival(y); }
    double pdf(int i, double y) const { return spec.holding[static_cast<std::size_t>(i)].pdf(y); }

    double self_mix(int n, int m, int i) const {
        double acc = 0.0;
        const double* src = surface.values.data() + vidx(n, m, 0);
        for (int j = 0; j < k; ++j) acc += p(i, j) * src[j];
        return acc;
    }

    /// Quadrature sum sum_l w_n(l) e^{-r l dt} f(l dt + y) q[l] without the
    /// common factor e^{-hrate*y}*coef (applied by the caller).
    double history_sum(const float* q, int i, int n, double y) const {
        const double* e = erb.data() + static_cast<std::size_t>(i) * (N + 1);
        const int a = am1[static_cast<std::size_t>(i)];
        double acc = 0.0;
        if (a == 0) {
            for (int l = 1; l < n; ++l) acc += e[l] * q[l - 1];
            acc += 0.5 * e[n] * q[n - 1];
        } else if (a == 1) {
            for (int l = 1; l < n; ++l) acc += e[l] * (l * dt + y) * q[l - 1];
            acc += 0.5 * e[n] * (n * dt + y) * q[n - 1];
        } else {
            for (int l = 1; l < n; ++l) acc += e[l] * pow_small(l * dt + y, a) * q[l - 1];
            acc += 0.5 * e[n] * pow_small(n * dt + y, a) * q[n - 1];
        }
        return acc;
    }

    double eval_price_node(int n, int m, int i, double y) const {
        if (m == 0) return 0.0;
        if (n == 0) return payoff[static_cast<std::size_t>(m)];
        const double sy = survival(i, y);
        if (sy <= kHoldingSaturation)
            throw SaturatedHoldingTime("price query: elapsed time saturates F(.|i)");
        const double sr = survival(i, n * dt + y) / sy;
        const float* q = qd.data() + qoff[static_cast<std::size_t>(n)] +
                         (static_cast<std::size_t>(i) * (M + 1) + m) * n;
        const double ey = std::exp(-hrate[static_cast<std::size_t>(i)] * y);
        const double acc = coef[static_cast<std::size_t>(i)] * ey * history_sum(q, i, n, y);
        return sr * eta[(static_cast<std::size_t>(i) * (N + 1) + n) * (M + 1) + m] +
               dt * (acc / sy) + dt * 0.5 * (pdf(i, y) / sy) * self_mix(n, m, i);
    }

    double eval_hedge_node(int n, int m, int i, double y) const {
        if (m == 0) return 0.0;
        if (n == 0) return m * ds > K ? 1.0 : 0.0;
        const double sy = survival(i, y);
        if (sy <= kHoldingSaturation)
            throw SaturatedHoldingTime("hedge query: elapsed time saturates F(.|i)");
        const double sr = survival(i, n * dt + y) / sy;
        const float* q = qh.data() + qoff[static_cast<std::size_t>(n)] +
                         (static_cast<std::size_t>(i) * (M + 1) + m) * n;
        const double ey = std::exp(-hrate[static_cast<std::size_t>(i)] * y);
        const double acc = coef[static_cast<std::size_t>(i)] * ey * history_sum(q, i, n, y);
        const auto& rp = spec.regimes[static_cast<std::size_t>(i)];
        const double corner = (0.5 - rp.r / (rp.sigma * rp.sigma)) / (m * ds);
        return sr * etad[(static_cast<std::size_t>(i) * (N + 1) + n) * (M + 1) + m] +
               dt * (acc / sy) + dt * 0.5 * (pdf(i, y) / sy) * corner * self_mix(n, m, i);
    }

    struct TimePos {
        int n0 = 0;
        double frac = 0.0; // weight of node n0 + 1
    };

    TimePos locate_time(double t) const {
        const double u = (T - t) / dt;
        int n0 = static_cast<int>(std::floor(u + 1e-9));
        double frac = u - n0;
        if (frac < 1e-9) frac = 0.0;
        if (frac > 1.0 - 1e-9) {
            ++n0;
            frac = 0.0;
        }
        n0 = std::clamp(n0, 0, N);
        return {n0, frac};
    }

    void check_query(double t, double s, int i, double y) const {
        if (i < 0 || i >= k) throw InvalidIndex("query: regime index out of range");
        if (t < -1e-12 || t > T + 1e-12) throw DomainError("query: t outside [0, T]");
        if (s < 0.0) throw DomainError("query: negative stock price");
        if (y < 0.0) throw DomainError("query: negative elapsed time");
    }

    double price_at(double t, double s, int i, double y) const {
        check_query(t, s, i, y);
        if (s == 0.0) return 0.0;
        const TimePos tp = locate_time(std::clamp(t, 0.0, T));
        auto at_n = [&](int n) -> double {
            if (n == 0) return std::max(s - K, 0.0);
            if (y == 0.0) {
                // stored surface: exact at nodes
                if (s >= grid.s_top()) return surface.phi(n, M, i) + (s - grid.s_top());
                const double v = s / ds;
                const int m0 = static_cast<int>(v);
                const double wsf = v - m0;
                return surface.phi(n, m0, i) +
                       wsf * (surface.phi(n, m0 + 1, i) - surface.phi(n, m0, i));
            }
            if (s >= grid.s_top()) return eval_price_node(n, M, i, y) + (s - grid.s_top());
            const double v = s / ds;
            const int m0 = static_cast<int>(v);
            const double wsf = v - m0;
            const double v0 = eval_price_node(n, m0, i, y);
            const double v1 = eval_price_node(n, m0 + 1, i, y);
            return v0 + wsf * (v1 - v0);
        };
        if (tp.frac == 0.0) return at_n(tp.n0);
        return (1.0 - tp.frac) * at_n(tp.n0) + tp.frac * at_n(tp.n0 + 1);
    }

    double xi_at(double t, double s, int i, double y) const {
        const TimePos tp = locate_time(std::clamp(t, 0.0, T));
        auto at_n = [&](int n) -> double {
            if (n == 0) return s > K ? 1.0 : 0.0;
            if (s >= grid.s_top()) return eval_hedge_node(n, M, i, y);
            const double v = s / ds;
            const int m0 = static_cast<int>(v);
            const double wsf = v - m0;
            const double v0 = eval_hedge_node(n, m0, i, y);
            const double v1 = eval_hedge_node(n, m0 + 1, i, y);
            return v0 + wsf * (v1 - v0);
        };
        if (tp.frac == 0.0) return at_n(tp.n0);
        return (1.0 - tp.frac) * at_n(tp.n0) + tp.frac * at_n(tp.n0 + 1);
    }
};

// ---------------------------------------------------------------------------

VolterraEngine::VolterraEngine(const MarketSpec& spec, const SolverGrid& grid)
    : impl_(std::make_unique<Impl>()) {
    impl_->setup(spec, grid);
    impl_->march(impl_->surface.values, /*inject=*/-2, 0.0, /*store_tables=*/true);
    impl_->surface.grid = grid;
    impl_->surface.num_regimes = impl_->k;
    impl_->surface.spec_fingerprint = fingerprint(spec);
    impl_->surface.max_truncation_tail = impl_->tail_max_interior;
}

VolterraEngine::VolterraEngine(const MarketSpec& spec, PriceSurface surface)
    : impl_(std::make_unique<Impl>()) {
    impl_->setup(spec, surface.grid);
    if (surface.num_regimes != impl_->k)
        throw DomainError("surface regime count does not match spec");
    if (surface.spec_fingerprint != fingerprint(spec))
        throw DomainError("surface fingerprint does not match spec");
    const std::size_t expect =
        static_cast<std::size_t>(impl_->N + 1) * (impl_->M + 1) * impl_->k;
    if (surface.values.size() != expect) throw DomainError("surface value array has wrong size");
    impl_->surface = std::move(surface);
    impl_->build_query_tables_from(impl_->surface.values);
}

VolterraEngine::~VolterraEngine() = default;
VolterraEngine::VolterraEngine(VolterraEngine&&) noexcept = default;
VolterraEngine& VolterraEngine::operator=(VolterraEngine&&) noexcept = default;

const MarketSpec& VolterraEngine::spec() const { return impl_->spec; }
const SolverGrid& VolterraEngine::grid() const { return impl_->grid; }
const PriceSurface& VolterraEngine::surface() const { return impl_->surface; }

double VolterraEngine::price_at(double t, double s, int i, double y) const {
    return impl_->price_at(t, s, i, y);
}

HedgeQuote VolterraEngine::hedge_at(double t, double s, int i, double y) const {
    impl_->check_query(t, s, i, y);
    if (!(s > 0.0)) throw DomainError("hedge_at: s must be > 0");
    HedgeQuote q;
    q.price = impl_->price_at(t, s, i, y);
    q.xi = impl_->xi_at(t, s, i, y);
    q.epsilon = q.price - q.xi * s;
    return q;
}

std::vector<double> VolterraEngine::perturbation_profile(int n_inject, double delta) const {
    auto& im = *impl_;
    if (n_inject >= im.N) throw DomainError("perturbation step must be below n_steps");
    std::vector<double> pert;
    im.march(pert, n_inject < 0 ? -1 : n_inject, delta, /*store_tables=*/false);
    // The experiment march reuses the shared mix buffer; restore it.
    for (int n = 0; n <= im.N; ++n) im.mix_row(n, im.surface.values);

    std::vector<double> profile(static_cast<std::size_t>(im.N) + 1, 0.0);
    const std::size_t row = static_cast<std::size_t>(im.M + 1) * im.k;
    for (int n = 0; n <= im.N; ++n) {
        double worst = 0.0;
        const double* a = pert.data() + static_cast<std::size_t>(n) * row;
        const double* b = im.surface.values.data() + static_cast<std::size_t>(n) * row;
        for (std::size_t t = 0; t < row; ++t) worst = std::max(worst, std::abs(a[t] - b[t]));
        profile[static_cast<std::size_t>(n)] = worst;
    }
    return profile;
}

ResidualStats VolterraEngine::pde_residual(double y, double dy) const {
    auto& im = *impl_;
    if (!(y > 0.0) || !(dy > 0.0)) throw DomainError("pde_residual: y and dy must be > 0");
    ResidualStats st;
    st.y = y;
    st.dy = dy;

    const int N = im.N, M = im.M, k = im.k;
    double sum = 0.0, sum_off = 0.0;
    for (int i = 0; i < k; ++i) {
        // rows of phi(.,.,i,y) and phi(.,.,i,y+dy) at every time index
        std::vector<double> ry(static_cast<std::size_t>(N + 1) * (M + 1));
        std::vector<double> ryd(static_cast<std::size_t>(N + 1) * (M + 1));
        parallel::parallel_for(N + 1, [&](long nb, long ne) {
            for (long n = nb; n < ne; ++n)
                for (int m = 0; m <= M; ++m) {
                    ry[static_cast<std::size_t>(n) * (M + 1) + m] =
                        im.eval_price_node(static_cast<int>(n), m, i, y);
                    ryd[static_cast<std::size_t>(n) * (M + 1) + m] =
                        im.eval_price_node(static_cast<int>(n), m, i, y + dy);
                }
        });
        const auto& rp = im.spec.regimes[static_cast<std::size_t>(i)];
        const double haz = im.pdf(i, y) / im.survival(i, y);
        for (int n = 1; n < N; ++n) {
            const double t = im.grid.time(n);
            if (t <= y + dy + 1e-12) continue;
            for (int m = 1; m < M; ++m) {
                const double s = m * im.ds;
                const double c = ry[static_cast<std::size_t>(n) * (M + 1) + m];
                const double phi_t = (ry[static_cast<std::size_t>(n - 1) * (M + 1) + m] -
                                      ry[static_cast<std::size_t>(n + 1) * (M + 1) + m]) /
                                     (2.0 * im.dt);
                const double phi_y = (ryd[static_cast<std::size_t>(n) * (M + 1) + m] - c) / dy;
                const double phi_s = (ry[static_cast<std::size_t>(n) * (M + 1) + m + 1] -
                                      ry[static_cast<std::size_t>(n) * (M + 1) + m - 1]) /
                                     (2.0 * im.ds);
                const double phi_ss = (ry[static_cast<std::size_t>(n) * (M + 1) + m + 1] -
                                       2.0 * c + ry[static_cast<std::size_t>(n) * (M + 1) + m - 1]) /
                                      (im.ds * im.ds);
                double couple = 0.0;
                for (int j = 0; j < k; ++j)
                    if (j != i) couple += im.p(i, j) * (im.surface.phi(n, m, j) - c);
                const double res = phi_t + phi_y + rp.r * s * phi_s +
                                   0.5 * rp.sigma * rp.sigma * s * s * phi_ss + haz * couple -
                                   rp.r * c;
                const double a = std::abs(res);
                sum += a;
                st.max_abs = std::max(st.max_abs, a);
                ++st.count;
                if (std::abs(s - im.K) > 0.1 * im.K && s <= 0.5 * im.grid.s_top()) {
                    sum_off += a;
                    st.max_abs_off_strike = std::max(st.max_abs_off_strike, a);
                    ++st.count_off_strike;
                }
            }
        }
    }
    st.mean_abs = st.count > 0 ? sum / st.count : 0.0;
    st.mean_abs_off_strike = st.count_off_strike > 0 ? sum_off / st.count_off_strike : 0.0;
    return st;
}

std::vector<double> VolterraEngine::apply_operator(const std::vector<double>& field) const {
    auto& im = *impl_;
    if (field.size() != im.surface.values.size())
        throw DomainError("apply_operator: field has wrong size");
    const int N = im.N, M = im.M, k = im.k;

    // mixes of the input field
    for (int n = 0; n <= N; ++n) im.mix_row(n, field);

    std::vector<double> out(field.size(), 0.0);
    for (int m = 0; m <= M; ++m)
        for (int i = 0; i < k; ++i) out[im.vidx(0, m, i)] = im.payoff[static_cast<std::size_t>(m)];

    std::vector<float> scratch(static_cast<std::size_t>(k) * (M + 1) * N, 0.0f);
    std::vector<double> f0(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) f0[static_cast<std::size_t>(i)] = im.pdf(i, 0.0);

    for (int n = 1; n <= N; ++n) {
        im.diag_block(n, scratch.data(), nullptr);
        parallel::parallel_for(M, [&](long mb, long me) {
            for (long mm = mb; mm < me; ++mm) {
                const int m = static_cast<int>(mm) + 1;
                for (int i = 0; i < k; ++i) {
                    const double* erl = im.er.data() + static_cast<std::size_t>(i) * (N + 1);
                    const double* fll = im.fl.data() + static_cast<std::size_t>(i) * (N + 1);
                    const float* q = scratch.data() + (static_cast<std::size_t>(i) * (M + 1) + m) * n;
                    double acc = 0.0;
                    for (int l = 1; l < n; ++l) acc += erl[l] * fll[l] * q[l - 1];
                    acc += 0.5 * erl[n] * fll[n] * q[n - 1];
                    double fieldmix = 0.0;
                    const double* src = field.data() + im.vidx(n, m, 0);
                    for (int j = 0; j < k; ++j) fieldmix += im.p(i, j) * src[j];
                    out[im.vidx(n, m, i)] =
                        (1.0 - im.F[static_cast<std::size_t>(i) * (N + 1) + n]) *
                            im.eta[(static_cast<std::size_t>(i) * (N + 1) + n) * (M + 1) + m] +
                        im.dt * acc + im.dt * 0.5 * f0[static_cast<std::size_t>(i)] * fieldmix;
                }
            }
        });
    }
    // restore the solved-surface mixes for subsequent queries
    for (int n = 0; n <= N; ++n) im.mix_row(n, im.surface.values);
    return out;
}

PriceSurface solve_surface(const MarketSpec& spec, const SolverGrid& grid) {
    return VolterraEngine(spec, grid).surface();
}

} // namespace smm
