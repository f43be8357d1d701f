#pragma once

#include <stdexcept>
#include <string>

namespace smm {

/// Query or argument outside the model's domain (t > T, negative stock, ...).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Regime index outside {0, ..., k-1} or i == j where a jump is required.
struct InvalidIndex : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Holding-time CDF numerically saturated: F(y|i) >= 1 - 1e-12, so the
/// hazard and the conditional sojourn law are undefined.
struct SaturatedHoldingTime : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Time step exceeds the quadrature stability bound and no override was set.
struct StabilityViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The per-node regime coupling system is singular.
struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace smm
