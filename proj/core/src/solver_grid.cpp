#include "smm/solver_grid.hpp"

#include <cmath>
#include <functional>

namespace smm {

namespace {

// max of g on [lo, hi]: dense scan, then golden-section polish around the best cell.
double maximize_1d(const std::function<double(double)>& g, double lo, double hi) {
    constexpr int kScan = 4096;
    double best_x = lo, best = g(lo);
    for (int i = 1; i <= kScan; ++i) {
        const double x = lo + (hi - lo) * i / kScan;
        const double v = g(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    const double h = (hi - lo) / kScan;
    double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
    constexpr double kPhi = 0.6180339887498949;
    double x1 = b - kPhi * (b - a), x2 = a + kPhi * (b - a);
    double f1 = g(x1), f2 = g(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kPhi * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kPhi * (b - a);
            f1 = g(x1);
        }
    }
    return std::max(best, std::max(f1, f2));
}

} // namespace

double stability_rate(const MarketSpec& spec) {
    const double T = spec.maturity;
    double a = 0.0;
    for (int i = 0; i < spec.num_regimes(); ++i) {
        const double r = spec.regimes[static_cast<std::size_t>(i)].r;
        const auto& h = spec.holding[static_cast<std::size_t>(i)];
        a = std::max(a, maximize_1d([&](double v) { return std::exp(-r * v) * h.pdf(v); }, 0.0, T));
    }
    if (a <= 0.0) throw DomainError("stability_rate: holding densities vanish on [0,T]");
    return a;
}

double stability_bound(const MarketSpec& spec) {
    const double a = stability_rate(spec);
    return std::exp(-a * spec.maturity) / a;
}

SolverGrid SolverGrid::make(const MarketSpec& spec, double dt, double ds, double s_max,
                            KernelRule rule, bool allow_unstable) {
    if (!(dt > 0.0) || !(ds > 0.0) || !(s_max > 0.0))
        throw DomainError("SolverGrid: dt, ds and s_max must be > 0");
    SolverGrid g;
    g.horizon = spec.maturity;
    g.n_steps = static_cast<int>(std::ceil(g.horizon / dt - 1e-9));
    if (g.n_steps < 1) g.n_steps = 1;
    g.dt = g.horizon / g.n_steps;
    g.ds = ds;
    g.m_max = static_cast<int>(std::ceil(s_max / ds - 1e-9));
    if (g.m_max < 2) throw DomainError("SolverGrid: fewer than 2 stock nodes");
    g.kernel_rule = rule;
    g.allow_unstable = allow_unstable;

    const double bound = stability_bound(spec);
    if (g.dt > bound * (1.0 + 1e-12) && !allow_unstable)
        throw StabilityViolation("dt = " + std::to_string(g.dt) + " exceeds stability bound " +
                                 std::to_string(bound));
    return g;
}

SolverGrid SolverGrid::defaults(const MarketSpec& spec) {
    return make(spec, 1.0 / 200.0, spec.strike / 100.0, 4.0 * spec.strike);
}

} // namespace smm
