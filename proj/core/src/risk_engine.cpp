#include "smm/risk_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "smm/parallel.hpp"

namespace smm {

namespace {

constexpr long kChunk = 4096;

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
    }
    void combine(const Moments& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
    MeasureEstimate finish(long n) const {
        MeasureEstimate e;
        e.n_paths = n;
        e.estimate = sum / n;
        const double var = std::max(0.0, sum_sq / n - e.estimate * e.estimate);
        e.std_error = std::sqrt(var / n);
        return e;
    }
};

struct ChunkSums {
    Moments qrr, qrr_cf, prr, pm_qrr, pm_prr, cash;
};

struct SojournView {
    double begin = 0.0;
    double end = 0.0;
    int regime = 0;
    double elapsed0 = 0.0; // age at `begin`
};

std::vector<SojournView> sojourns(const JumpSkeleton& sk, double horizon) {
    std::vector<SojournView> out;
    out.reserve(sk.jump_times.size() + 1);
    double start = 0.0;
    for (std::size_t q = 0; q <= sk.jump_times.size(); ++q) {
        SojournView v;
        v.begin = start;
        v.end = q < sk.jump_times.size() ? sk.jump_times[q] : horizon;
        v.regime = sk.regimes[q];
        v.elapsed0 = q == 0 ? sk.initial_elapsed : 0.0;
        out.push_back(v);
        start = v.end;
    }
    return out;
}

} // namespace

std::vector<double> uniform_rebalance_times(double maturity, int n) {
    if (n < 1) throw DomainError("rebalance count must be >= 1");
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = maturity * i / n;
    return t;
}

RiskReport estimate_risks(const VolterraEngine& engine, double s0, int x0, double y0,
                          const SimConfig& config, const RiskRequest& request) {
    const MarketSpec& spec = engine.spec();
    const double T = spec.maturity;
    const double K = spec.strike;
    if (config.n_paths < 1) throw DomainError("estimate_risks: n_paths must be >= 1");

    std::vector<double> rebalance(config.observation_times.begin(),
                                  config.observation_times.end());
    if (request.want_pm) {
        if (rebalance.empty()) throw DomainError("practitioner measures need a rebalance schedule");
        if (!std::is_sorted(rebalance.begin(), rebalance.end()) ||
            std::adjacent_find(rebalance.begin(), rebalance.end()) != rebalance.end() ||
            rebalance.front() < 0.0 || rebalance.back() >= T)
            throw DomainError("rebalance times must be strictly increasing inside [0, T)");
    }
    const double v0 = request.want_pm ? engine.price_at(0.0, s0, x0, y0) : 0.0;
    const bool need_compensator = request.want_prr;
    const int sub = std::max(1, config.compensator_substeps);

    const long n_chunks = (config.n_paths + kChunk - 1) / kChunk;
    std::vector<ChunkSums> partial(static_cast<std::size_t>(n_chunks));

    parallel::parallel_for(n_chunks, [&](long cb, long ce) {
        std::vector<double> evals;
        for (long c = cb; c < ce; ++c) {
            ChunkSums acc;
            const long pb = c * kChunk;
            const long pe = std::min(config.n_paths, pb + kChunk);
            for (long p = pb; p < pe; ++p) {
                PathRng rng(config.seed, static_cast<std::uint64_t>(p));
                JumpSkeleton sk = sample_semi_markov(spec, x0, y0, T, rng);
                const auto sjs = sojourns(sk, T);

                evals.clear();
                evals.insert(evals.end(), rebalance.begin(), rebalance.end());
                if (need_compensator)
                    for (const auto& sj : sjs)
                        for (int t = 1; t < sub; ++t)
                            evals.push_back(sj.begin + (sj.end - sj.begin) * t / sub);
                MarketPath path =
                    fill_market_path(spec, std::move(sk), s0, config.measure, evals, rng);
                const auto& skel = path.skeleton;

                // jump terms of the discounted cash flow
                double sum_gap_sq = 0.0, cash = 0.0;
                for (int jq = 0; jq < skel.num_jumps(); ++jq) {
                    const double tj = skel.jump_times[static_cast<std::size_t>(jq)];
                    const double stock = path.stock_at(tj);
                    const double disc = path.discount_at(tj);
                    const double pre_elapsed =
                        (jq == 0 ? y0 + tj : tj - skel.jump_times[static_cast<std::size_t>(jq) - 1]);
                    const int pre = skel.regimes[static_cast<std::size_t>(jq)];
                    const int post = skel.regimes[static_cast<std::size_t>(jq) + 1];
                    const double gap = disc * (engine.price_at(tj, stock, post, 0.0) -
                                               engine.price_at(tj, stock, pre, pre_elapsed));
                    sum_gap_sq += gap * gap;
                    cash += gap;
                }
                acc.qrr.add(sum_gap_sq);

                if (need_compensator) {
                    const int k = spec.num_regimes();
                    for (const auto& sj : sjs) {
                        const double len = sj.end - sj.begin;
                        if (len <= 0.0) continue;
                        const auto& h = spec.holding[static_cast<std::size_t>(sj.regime)];
                        const double h_step = len / sub;
                        double integral = 0.0;
                        for (int t = 0; t <= sub; ++t) {
                            const double u = t == 0 ? sj.begin
                                           : t == sub ? sj.end
                                                      : sj.begin + len * t / sub;
                            const double age = sj.elapsed0 + (u - sj.begin);
                            const double surv = h.survival(age);
                            if (surv <= kHoldingSaturation)
                                throw SaturatedHoldingTime("compensator integral saturates F");
                            const double haz = h.pdf(age) / surv;
                            if (haz == 0.0) continue;
                            const double stock = path.stock_at(u);
                            const double disc = path.discount_at(u);
                            const double own =
                                engine.price_at(u, stock, sj.regime, age);
                            double gapsum = 0.0;
                            for (int j = 0; j < k; ++j) {
                                if (j == sj.regime) continue;
                                const double pj = spec.transitions(sj.regime, j);
                                if (pj == 0.0) continue;
                                gapsum += pj * (engine.price_at(u, stock, j, 0.0) - own);
                            }
                            const double w = (t == 0 || t == sub) ? 0.5 : 1.0;
                            integral += w * h_step * disc * haz * gapsum;
                        }
                        cash -= integral;
                    }
                    acc.qrr_cf.add(cash * cash);
                    acc.prr.add(cash >= 0.0 ? cash * cash : 0.0);
                    acc.cash.add(cash);
                }

                if (request.want_pm) {
                    double gains = 0.0;
                    for (std::size_t ri = 0; ri < rebalance.size(); ++ri) {
                        const double ti = rebalance[ri];
                        const double tn = ri + 1 < rebalance.size() ? rebalance[ri + 1] : T;
                        double xi;
                        if (ti == 0.0) {
                            xi = engine.hedge_at(0.0, s0, x0, y0).xi;
                        } else {
                            // left-limit state: a jump exactly at ti uses the pre-jump sojourn
                            const auto it = std::lower_bound(skel.jump_times.begin(),
                                                             skel.jump_times.end(), ti);
                            int q;
                            if (it != skel.jump_times.end() && *it == ti)
                                q = static_cast<int>(it - skel.jump_times.begin());
                            else
                                q = skel.sojourn_index(ti);
                            const double start =
                                q == 0 ? 0.0 : skel.jump_times[static_cast<std::size_t>(q) - 1];
                            const double age_left = (q == 0 ? y0 : 0.0) + (ti - start);
                            xi = engine.hedge_at(ti, path.stock_at(ti),
                                                 skel.regimes[static_cast<std::size_t>(q)], age_left)
                                     .xi;
                        }
                        const double s_star_i = path.discount_at(ti) * path.stock_at(ti);
                        const double s_star_n = path.discount_at(tn) * path.stock_at(tn);
                        gains += xi * (s_star_n - s_star_i);
                    }
                    const double vt = path.discount_at(T) * std::max(path.stock_at(T) - K, 0.0);
                    const double shortfall = vt - (v0 + gains);
                    acc.pm_qrr.add(shortfall * shortfall);
                    acc.pm_prr.add(shortfall >= 0.0 ? shortfall * shortfall : 0.0);
                }
            }
            partial[static_cast<std::size_t>(c)] = acc;
        }
    });

    ChunkSums total;
    for (const auto& c : partial) {
        total.qrr.combine(c.qrr);
        total.qrr_cf.combine(c.qrr_cf);
        total.prr.combine(c.prr);
        total.pm_qrr.combine(c.pm_qrr);
        total.pm_prr.combine(c.pm_prr);
        total.cash.combine(c.cash);
    }

    RiskReport rep;
    rep.s0 = s0;
    rep.x0 = x0;
    rep.y0 = y0;
    rep.rebalance_times = rebalance;
    const long n = config.n_paths;
    if (request.want_qrr) rep.qrr = total.qrr.finish(n);
    if (request.want_prr) {
        rep.prr = total.prr.finish(n);
        rep.qrr_cashflow = total.qrr_cf.finish(n);
        rep.cash_mean = total.cash.finish(n);
    }
    if (request.want_pm) {
        rep.pm_qrr = total.pm_qrr.finish(n);
        rep.pm_prr = total.pm_prr.finish(n);
    }
    return rep;
}

MeasureEstimate qrr(const VolterraEngine& engine, double s0, int x0, double y0,
                    const SimConfig& config) {
    RiskRequest req{true, false, false};
    return estimate_risks(engine, s0, x0, y0, config, req).qrr;
}

MeasureEstimate prr(const VolterraEngine& engine, double s0, int x0, double y0,
                    const SimConfig& config) {
    RiskRequest req{false, true, false};
    return estimate_risks(engine, s0, x0, y0, config, req).prr;
}

std::pair<MeasureEstimate, MeasureEstimate> pm_risks(const VolterraEngine& engine, double s0,
                                                     int x0, double y0, const SimConfig& config) {
    RiskRequest req{false, false, true};
    const RiskReport rep = estimate_risks(engine, s0, x0, y0, config, req);
    return {rep.pm_qrr, rep.pm_prr};
}

MeasureEstimate mc_price_oracle(const MarketSpec& spec, double s0, int x0, double y0,
                                const SimConfig& config) {
    if (config.n_paths < 1) throw DomainError("mc_price_oracle: n_paths must be >= 1");
    if (s0 == 0.0) return {0.0, 0.0, config.n_paths}; // absorbing boundary

    const double T = spec.maturity;
    const double K = spec.strike;
    const long n_chunks = (config.n_paths + kChunk - 1) / kChunk;
    std::vector<Moments> partial(static_cast<std::size_t>(n_chunks));

    parallel::parallel_for(n_chunks, [&](long cb, long ce) {
        for (long c = cb; c < ce; ++c) {
            Moments acc;
            const long pb = c * kChunk;
            const long pe = std::min(config.n_paths, pb + kChunk);
            for (long p = pb; p < pe; ++p) {
                PathRng rng(config.seed, static_cast<std::uint64_t>(p));
                JumpSkeleton sk = sample_semi_markov(spec, x0, y0, T, rng);
                MarketPath path =
                    fill_market_path(spec, std::move(sk), s0, Measure::RiskNeutral, {}, rng);
                acc.add(path.discount.back() * std::max(path.stock.back() - K, 0.0));
            }
            partial[static_cast<std::size_t>(c)] = acc;
        }
    });

    Moments total;
    for (const auto& c : partial) total.combine(c);
    return total.finish(config.n_paths);
}

std::string risk_csv_header() { return "s0,regime,measure,estimate,stderr,n_paths\n"; }

void append_report_csv(const RiskReport& report, std::string& out) {
    char buf[192];
    const auto row = [&](const char* name, const MeasureEstimate& e) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%s,%.17g,%.17g,%ld\n", report.s0, report.x0 + 1,
                      name, e.estimate, e.std_error, e.n_paths);
        out += buf;
    };
    row("qrr", report.qrr);
    row("prr", report.prr);
    row("pm_qrr", report.pm_qrr);
    row("pm_prr", report.pm_prr);
}

} // namespace smm
