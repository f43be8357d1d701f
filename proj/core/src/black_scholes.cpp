#include "smm/black_scholes.hpp"

#include <cmath>

#include "smm/errors.hpp"

namespace smm {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kInvSqrt2 = 0.7071067811865475244;
} // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

BsQuote bs_call(double t, double s, double r, double sigma, double strike, double maturity) {
    if (t < 0.0 || t > maturity) throw DomainError("bs_call: t outside [0, T]");
    if (s < 0.0) throw DomainError("bs_call: negative stock price");
    if (!(sigma > 0.0)) throw DomainError("bs_call: sigma must be > 0");

    if (s == 0.0) return {0.0, 0.0};
    const double tau = maturity - t;
    if (tau == 0.0) {
        const double payoff = s > strike ? s - strike : 0.0;
        return {payoff, s > strike ? 1.0 : 0.0};
    }
    const double sq = sigma * std::sqrt(tau);
    const double d1 = (std::log(s / strike) + (r + 0.5 * sigma * sigma) * tau) / sq;
    const double d2 = d1 - sq;
    const double nd1 = norm_cdf(d1);
    return {s * nd1 - strike * std::exp(-r * tau) * norm_cdf(d2), nd1};
}

} // namespace smm
