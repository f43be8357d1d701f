#include "smm/lognormal_kernel.hpp"

#include <cmath>

#include "smm/black_scholes.hpp"
#include "smm/errors.hpp"
#include "smm/solver_grid.hpp"

namespace smm {

std::vector<KernelCell> lognormal_cell_weights(double s, double r, double sigma, double v,
                                               double ds, int m_max, KernelRule rule) {
    if (!(v > 0.0)) throw DomainError("lognormal_cell_weights: v must be > 0");
    if (!(s > 0.0)) throw DomainError("lognormal_cell_weights: s must be > 0");

    const double sd = sigma * std::sqrt(v);
    const double center = std::log(s) + (r - 0.5 * sigma * sigma) * v;
    std::vector<KernelCell> out(static_cast<std::size_t>(m_max) + 1);

    if (rule == KernelRule::PointDensity) {
        for (int m = 1; m <= m_max; ++m) {
            const double x = m * ds;
            const double z = (std::log(x) - center) / sd;
            out[static_cast<std::size_t>(m)].weight = norm_pdf(z) / (x * sd) * ds;
        }
        return out;
    }

    double prev = 0.0; // CDF at the lower edge of the current cell (0 at x = 0)
    for (int m = 0; m <= m_max; ++m) {
        const double hi = (m + 0.5) * ds;
        const double cur = norm_cdf((std::log(hi) - center) / sd);
        out[static_cast<std::size_t>(m)].weight = cur - prev;
        prev = cur;
    }
    return out;
}

double lognormal_tail_mass(double s, double r, double sigma, double v, double ds, int m_max) {
    if (!(v > 0.0) || !(s > 0.0)) return 0.0;
    const double sd = sigma * std::sqrt(v);
    const double center = std::log(s) + (r - 0.5 * sigma * sigma) * v;
    const double top = (m_max + 0.5) * ds;
    return norm_cdf(-(std::log(top) - center) / sd);
}

} // namespace smm
