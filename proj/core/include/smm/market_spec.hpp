#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smm/errors.hpp"

namespace smm {

/// Per-regime market parameters: drift, volatility, short rate.
struct RegimeParams {
    double mu = 0.0;
    double sigma = 0.0;
    double r = 0.0;
};

/// Row-stochastic jump matrix with zero diagonal over k >= 2 regimes.
struct TransitionMatrix {
    int k = 0;
    std::vector<double> p; // row-major k*k

    double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * k + j]; }
    double& operator()(int i, int j) { return p[static_cast<std::size_t>(i) * k + j]; }

    /// Every state reaches every other state through positive entries.
    bool irreducible() const;
};

enum class HoldingFamily {
    Exponential, // rate
    Gamma        // integer shape >= 1, rate
};

/// Conditional holding-time distribution of one regime. Both families have
/// elementary density and CDF (Gamma is restricted to integer shapes), which
/// keeps the solver kernel and the inverse-CDF sampler free of a special-
/// function error floor.
struct HoldingTimeDist {
    HoldingFamily family = HoldingFamily::Exponential;
    double shape = 1.0; // Gamma only; validated to be a positive integer
    double rate = 1.0;

    static HoldingTimeDist exponential(double rate);
    static HoldingTimeDist gamma(double shape, double rate);

    double pdf(double y) const;
    double cdf(double y) const { return 1.0 - survival(y); }
    /// 1 - F(y), computed directly to avoid cancellation in the tail.
    double survival(double y) const;
    /// Inverse CDF for p in [0, 1). Closed form for Exponential; bracketed
    /// Newton/bisection on the closed-form CDF (tol 1e-12) for Gamma.
    double quantile(double p) const;

    double mean() const;
};

/// Complete market input: regimes, jump matrix, holding-time laws, claim.
struct MarketSpec {
    std::vector<RegimeParams> regimes;
    TransitionMatrix transitions;
    std::vector<HoldingTimeDist> holding;
    double strike = 1.0;
    double maturity = 1.0;

    int num_regimes() const { return static_cast<int>(regimes.size()); }
};

/// F(y|i) is treated as saturated once 1 - F(y|i) <= this.
inline constexpr double kHoldingSaturation = 1e-12;

/// Jump intensity p_ij * f(y|i) / (1 - F(y|i)) for i != j.
/// Throws InvalidIndex for bad indices, SaturatedHoldingTime when the
/// survival probability is below kHoldingSaturation, DomainError for y < 0.
double hazard(const MarketSpec& spec, int i, int j, double y);

struct ValidationReport {
    struct Violation {
        std::string code;
        std::string message;
    };
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(const std::string& code) const;
    std::string summary() const;
};

/// Checks every structural invariant; never throws, failures are reported.
ValidationReport validate(const MarketSpec& spec);

/// Throws DomainError carrying the report summary if validation fails.
void require_valid(const MarketSpec& spec);

/// JSON I/O. Document shape:
///   {"regimes":[{"mu":..,"sigma":..,"r":..},...],
///    "transition":[[..],..],
///    "holding":[{"family":"gamma","params":{"shape":2,"rate":1}},...],
///    "strike":.., "maturity":..}
MarketSpec parse_market_spec(const std::string& json_text);
MarketSpec load_market_spec(const std::string& path);
std::string to_json_string(const MarketSpec& spec);

/// FNV-1a hash of the canonical JSON form; pairs surfaces with their spec.
std::uint64_t fingerprint(const MarketSpec& spec);

} // namespace smm
