#pragma once

namespace smm {

double norm_pdf(double x);
/// Standard normal CDF via erfc; absolute error well below 1e-12.
double norm_cdf(double x);

/// Call price and hedge ratio of the constant-parameter model.
struct BsQuote {
    double price = 0.0;
    double delta = 0.0;
};

/// European call at time t, spot s, strike K, maturity T under constant
/// rate r and volatility sigma. At t == T returns the payoff and its
/// subgradient indicator; s == 0 is the absorbing boundary.
/// Throws DomainError for t > T, t < 0, s < 0 or sigma <= 0.
BsQuote bs_call(double t, double s, double r, double sigma, double strike, double maturity);

} // namespace smm
