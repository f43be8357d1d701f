#pragma once

#include <memory>
#include <vector>

#include "smm/market_spec.hpp"
#include "smm/price_surface.hpp"
#include "smm/solver_grid.hpp"

namespace smm {

/// Price, stock position and money-market position at one query point.
/// epsilon is quoted with unit discount; path-dependent discounting is
/// applied by the caller when assembling a strategy along a trajectory.
struct HedgeQuote {
    double price = 0.0;
    double xi = 0.0;
    double epsilon = 0.0;
};

struct ResidualStats {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    long count = 0;
    // same statistics restricted to the core region |s - K| > 0.1 K and
    // s <= s_top / 2: outside it the payoff kink and the grid-top
    // truncation layer dominate the finite differences and do not shrink
    // under refinement at fixed s_max
    double max_abs_off_strike = 0.0;
    double mean_abs_off_strike = 0.0;
    long count_off_strike = 0;
    double y = 0.0;
    double dy = 0.0;
};

/// Backward quadrature solver for the pricing integral equation, plus the
/// query machinery built on the solved y = 0 surface: survival-weighted
/// closed-form leg, kernel quadrature legs for price and hedge ratio, and
/// the implicit per-node regime coupling when the holding density is
/// positive at zero.
///
/// The solve marches sequentially in time; within a step, stock nodes are
/// independent and processed in parallel with no cross-node accumulation,
/// so results are bit-identical for every worker count.
class VolterraEngine {
  public:
    /// Validates the spec, builds the kernel bands and solves the surface.
    VolterraEngine(const MarketSpec& spec, const SolverGrid& grid);

    /// Adopts an existing surface (e.g. loaded from CSV) and rebuilds the
    /// query tables for it. The fingerprint must match the spec.
    VolterraEngine(const MarketSpec& spec, PriceSurface surface);

    ~VolterraEngine();
    VolterraEngine(VolterraEngine&&) noexcept;
    VolterraEngine& operator=(VolterraEngine&&) noexcept;
    VolterraEngine(const VolterraEngine&) = delete;
    VolterraEngine& operator=(const VolterraEngine&) = delete;

    const MarketSpec& spec() const;
    const SolverGrid& grid() const;
    const PriceSurface& surface() const;

    /// phi(t, s, i, y). Off-grid (t, s) queries interpolate bilinearly;
    /// above the top stock node the price continues with unit slope.
    /// Elapsed times y > t are accepted so that trajectories conditioned on
    /// a positive initial age can be priced (the model evaluates them
    /// through the same sojourn-conditional representation).
    double price_at(double t, double s, int i, double y) const;

    /// Hedge ratio psi(t, s, i, y) by the kernel-moment representation; the
    /// surface is never differenced numerically. Requires s > 0.
    HedgeQuote hedge_at(double t, double s, int i, double y) const;

    /// Reruns the march with an additive perturbation delta applied to
    /// every node of step n_inject (or of every step 0..N-1 if n_inject < 0)
    /// and returns max |perturbed - base| per step, size n_steps + 1.
    std::vector<double> perturbation_profile(int n_inject, double delta) const;

    /// Finite-difference residual of the pricing system at interior nodes
    /// for elapsed time y (forward difference dy in the age variable).
    ResidualStats pde_residual(double y, double dy) const;

    /// One application of the discretized pricing operator to an arbitrary
    /// field with the surface layout. The solved surface is a fixed point.
    std::vector<double> apply_operator(const std::vector<double>& field) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper.
PriceSurface solve_surface(const MarketSpec& spec, const SolverGrid& grid);

} // namespace smm
