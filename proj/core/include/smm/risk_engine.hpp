#pragma once

#include <string>
#include <vector>

#include "smm/path_simulator.hpp"
#include "smm/volterra_engine.hpp"

namespace smm {

struct MeasureEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
};

/// Monte Carlo estimates of the residual-risk measures at one conditioning
/// point (s0, x0, y0). qrr_cashflow is the quadratic risk recomputed from
/// the full cash-flow decomposition (jump terms minus the compensator
/// integral); it estimates the same expectation as qrr and serves as the
/// two-route agreement check. cash_mean is the sample mean of the terminal
/// discounted cash flow, a zero-mean martingale increment.
struct RiskReport {
    double s0 = 0.0;
    int x0 = 0;
    double y0 = 0.0;
    MeasureEstimate qrr, prr, pm_qrr, pm_prr;
    MeasureEstimate qrr_cashflow;
    MeasureEstimate cash_mean;
    std::vector<double> rebalance_times;
};

struct RiskRequest {
    bool want_qrr = true;
    bool want_prr = true; // implies the compensator sub-grid
    bool want_pm = true;  // requires a nonempty rebalance schedule
};

/// One path ensemble, all requested measures. Paths are generated in fixed
/// chunks whose partial sums are combined in chunk order, so estimates are
/// bit-identical for every worker count. Rebalance dates are taken from
/// config.observation_times.
RiskReport estimate_risks(const VolterraEngine& engine, double s0, int x0, double y0,
                          const SimConfig& config, const RiskRequest& request = {});

MeasureEstimate qrr(const VolterraEngine& engine, double s0, int x0, double y0,
                    const SimConfig& config);
MeasureEstimate prr(const VolterraEngine& engine, double s0, int x0, double y0,
                    const SimConfig& config);
/// (pm_qrr, pm_prr); throws DomainError on an empty rebalance schedule.
std::pair<MeasureEstimate, MeasureEstimate> pm_risks(const VolterraEngine& engine, double s0,
                                                     int x0, double y0, const SimConfig& config);

/// Risk-neutral discounted-payoff mean, independent of the solver; the
/// measure in config is ignored.
MeasureEstimate mc_price_oracle(const MarketSpec& spec, double s0, int x0, double y0,
                                const SimConfig& config);

/// Evenly spaced trading dates (i-1) * T / n, i = 1..n.
std::vector<double> uniform_rebalance_times(double maturity, int n);

/// CSV rows "s0,regime,measure,estimate,stderr,n_paths" (regime 1-based).
void append_report_csv(const RiskReport& report, std::string& out);
std::string risk_csv_header();

} // namespace smm
