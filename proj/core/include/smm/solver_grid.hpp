#pragma once

#include "smm/lognormal_kernel.hpp"
#include "smm/market_spec.hpp"

namespace smm {

/// a = max_i max_{v in [0,T]} e^{-r(i) v} f(v|i), found by dense-grid scan
/// with golden-section refinement per regime.
double stability_rate(const MarketSpec& spec);

/// Largest stable time step e^{-aT}/a.
double stability_bound(const MarketSpec& spec);

/// Uniform backward-time / stock discretization. Index n counts back from
/// maturity (t = T - n*dt), index m is the stock node (s = m*ds).
struct SolverGrid {
    double dt = 0.0;
    double ds = 0.0;
    double horizon = 0.0; // T
    int n_steps = 0;      // N; dt * n_steps == T
    int m_max = 0;        // top stock node
    KernelRule kernel_rule = KernelRule::CellIntegrated;
    bool allow_unstable = false;

    double time(int n) const { return horizon - n * dt; }
    double stock(int m) const { return m * ds; }
    double s_top() const { return m_max * ds; }

    /// Repeated trapezium weights: 1/2 at l = 0 and l = n, 1 between.
    double weight(int n, int l) const { return (l == 0 || l == n) ? 0.5 : 1.0; }

    /// Snaps dt to T / ceil(T/dt) and m_max to ceil(s_max/ds), then enforces
    /// dt <= stability_bound(spec) unless allow_unstable.
    /// Throws StabilityViolation or DomainError.
    static SolverGrid make(const MarketSpec& spec, double dt, double ds, double s_max,
                           KernelRule rule = KernelRule::CellIntegrated,
                           bool allow_unstable = false);

    /// dt = 1/200, ds = K/100, s_max = 4K.
    static SolverGrid defaults(const MarketSpec& spec);
};

} // namespace smm
