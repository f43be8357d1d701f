#pragma once

#include <vector>

namespace smm {

struct MarketSpec;
struct SolverGrid;

/// How the stock integral is discretized onto the grid.
enum class KernelRule {
    CellIntegrated, // exact lognormal mass of each grid cell (CDF differences)
    PointDensity    // density at the node times ds
};

/// Probability mass of the one-period lognormal transition over one grid cell.
struct KernelCell {
    double weight = 0.0;
};

/// Transition weights from spot s over elapsed time v under (r, sigma),
/// one entry per grid node m' = 0..m_max. Cell m' covers
/// ((m'-1/2)*ds, (m'+1/2)*ds]; cell 0 covers (0, ds/2]. Mass above the top
/// cell edge is dropped (truncation).
/// Throws DomainError if v <= 0 or s <= 0.
std::vector<KernelCell> lognormal_cell_weights(double s, double r, double sigma, double v,
                                               double ds, int m_max,
                                               KernelRule rule = KernelRule::CellIntegrated);

/// Same, taking the rate and volatility of regime i and the grid geometry.
std::vector<KernelCell> lognormal_cell_weights(const MarketSpec& spec, int i, double s, double v,
                                               const SolverGrid& grid);

/// Lognormal mass above the top cell edge (m_max + 1/2) * ds.
double lognormal_tail_mass(double s, double r, double sigma, double v, double ds, int m_max);

} // namespace smm
