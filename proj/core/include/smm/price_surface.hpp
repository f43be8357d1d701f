#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smm/solver_grid.hpp"

namespace smm {

/// phi(T - n*dt, m*ds, i, 0) on the solver grid, row n = 0 at maturity.
/// Layout: values[(n * (m_max+1) + m) * k + i].
struct PriceSurface {
    SolverGrid grid;
    int num_regimes = 0;
    std::uint64_t spec_fingerprint = 0;
    double max_truncation_tail = 0.0; // largest kernel mass lost above the grid
    std::vector<double> values;

    double phi(int n, int m, int i) const {
        return values[(static_cast<std::size_t>(n) * (grid.m_max + 1) + m) * num_regimes + i];
    }
    double& phi(int n, int m, int i) {
        return values[(static_cast<std::size_t>(n) * (grid.m_max + 1) + m) * num_regimes + i];
    }
};

/// One row per node: "n,t,m,s,regime,phi" (regime is 1-based).
void write_surface_csv(const PriceSurface& surface, const std::string& path);

/// Grid, fingerprint and truncation diagnostics for the CSV next to it.
void write_surface_meta(const PriceSurface& surface, const std::string& path);

/// Reads both files back; throws DomainError on malformed input.
PriceSurface load_surface(const std::string& csv_path, const std::string& meta_path);

/// meta path convention: surface.csv -> surface.meta.json
std::string meta_path_for(const std::string& csv_path);

} // namespace smm
