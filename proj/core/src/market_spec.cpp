#include "smm/market_spec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace smm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TransitionMatrix
// ---------------------------------------------------------------------------

bool TransitionMatrix::irreducible() const {
    if (k <= 0 || p.size() != static_cast<std::size_t>(k) * k) return false;
    // Reachability closure (Warshall) over the positive-entry adjacency.
    std::vector<char> reach(static_cast<std::size_t>(k) * k, 0);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) reach[static_cast<std::size_t>(i) * k + j] = (i == j || (*this)(i, j) > 0.0);
    for (int m = 0; m < k; ++m)
        for (int i = 0; i < k; ++i) {
            if (!reach[static_cast<std::size_t>(i) * k + m]) continue;
            for (int j = 0; j < k; ++j)
                if (reach[static_cast<std::size_t>(m) * k + j]) reach[static_cast<std::size_t>(i) * k + j] = 1;
        }
    return std::all_of(reach.begin(), reach.end(), [](char c) { return c != 0; });
}

// ---------------------------------------------------------------------------
// HoldingTimeDist
// ---------------------------------------------------------------------------

HoldingTimeDist HoldingTimeDist::exponential(double rate) {
    return HoldingTimeDist{HoldingFamily::Exponential, 1.0, rate};
}

HoldingTimeDist HoldingTimeDist::gamma(double shape, double rate) {
    return HoldingTimeDist{HoldingFamily::Gamma, shape, rate};
}

namespace {

int integer_shape(double shape) { return static_cast<int>(std::lround(shape)); }

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

} // namespace

double HoldingTimeDist::pdf(double y) const {
    if (y < 0.0) return 0.0;
    if (family == HoldingFamily::Exponential) return rate * std::exp(-rate * y);
    const int a = integer_shape(shape);
    double t = std::pow(rate * y, a - 1) / factorial(a - 1);
    return rate * t * std::exp(-rate * y);
}

double HoldingTimeDist::survival(double y) const {
    if (y <= 0.0) return 1.0;
    if (family == HoldingFamily::Exponential) return std::exp(-rate * y);
    const int a = integer_shape(shape);
    // Erlang tail: e^{-by} * sum_{t<a} (by)^t / t!
    const double by = rate * y;
    double term = 1.0, sum = 1.0;
    for (int t = 1; t < a; ++t) {
        term *= by / t;
        sum += term;
    }
    return std::exp(-by) * sum;
}

double HoldingTimeDist::quantile(double prob) const {
    if (prob < 0.0 || prob >= 1.0) throw DomainError("HoldingTimeDist::quantile: p must be in [0,1)");
    if (prob == 0.0) return 0.0;
    if (family == HoldingFamily::Exponential) return -std::log1p(-prob) / rate;

    // Bracket the root of F(y) = prob, then Newton with bisection fallback.
    double lo = 0.0, hi = mean();
    while (cdf(hi) < prob) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6 / rate) break;
    }
    double y = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double g = cdf(y) - prob;
        if (g > 0.0) hi = y; else lo = y;
        const double d = pdf(y);
        double step = (d > 1e-300) ? g / d : 0.0;
        double next = y - step;
        if (step == 0.0 || next <= lo || next >= hi) next = 0.5 * (lo + hi);
        if (std::abs(next - y) <= 1e-12 * (1.0 + std::abs(y))) return next;
        y = next;
    }
    return y;
}

double HoldingTimeDist::mean() const {
    return (family == HoldingFamily::Exponential) ? 1.0 / rate : shape / rate;
}

// ---------------------------------------------------------------------------
// hazard
// ---------------------------------------------------------------------------

double hazard(const MarketSpec& spec, int i, int j, double y) {
    const int k = spec.num_regimes();
    if (i < 0 || i >= k || j < 0 || j >= k) throw InvalidIndex("hazard: regime index out of range");
    if (i == j) throw InvalidIndex("hazard: i == j has no jump intensity");
    if (y < 0.0) throw DomainError("hazard: y must be >= 0");
    const double surv = spec.holding[static_cast<std::size_t>(i)].survival(y);
    if (surv <= kHoldingSaturation)
        throw SaturatedHoldingTime("hazard: F(y|i) >= 1 - 1e-12 at y = " + std::to_string(y));
    return spec.transitions(i, j) * spec.holding[static_cast<std::size_t>(i)].pdf(y) / surv;
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

bool ValidationReport::has(const std::string& code) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::summary() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i].code << ": " << violations[i].message;
    }
    return os.str();
}

ValidationReport validate(const MarketSpec& spec) {
    ValidationReport rep;
    auto fail = [&](std::string code, std::string msg) {
        rep.violations.push_back({std::move(code), std::move(msg)});
    };

    const int k = spec.num_regimes();
    if (k < 2) fail("RegimeCount", "need at least 2 regimes, got " + std::to_string(k));
    if (spec.transitions.k != k)
        fail("SizeMismatch", "transition matrix is " + std::to_string(spec.transitions.k) +
                                 "x" + std::to_string(spec.transitions.k) + " for " +
                                 std::to_string(k) + " regimes");
    if (static_cast<int>(spec.holding.size()) != k)
        fail("SizeMismatch", "holding-time list has " + std::to_string(spec.holding.size()) +
                                 " entries for " + std::to_string(k) + " regimes");

    for (int i = 0; i < k; ++i) {
        const auto& rp = spec.regimes[static_cast<std::size_t>(i)];
        if (!(rp.sigma > 0.0))
            fail("SigmaPositive", "sigma(" + std::to_string(i + 1) + ") = " + std::to_string(rp.sigma));
        if (!(rp.r >= 0.0))
            fail("RateNonnegative", "r(" + std::to_string(i + 1) + ") = " + std::to_string(rp.r));
        if (!std::isfinite(rp.mu)) fail("DriftFinite", "mu(" + std::to_string(i + 1) + ") not finite");
    }

    const auto& tm = spec.transitions;
    if (tm.k == k && static_cast<int>(tm.p.size()) == k * k) {
        for (int i = 0; i < k; ++i) {
            double row = 0.0;
            for (int j = 0; j < k; ++j) {
                const double v = tm(i, j);
                if (v < 0.0 || v > 1.0)
                    fail("EntryRange", "p(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                           ") = " + std::to_string(v));
                row += v;
            }
            if (std::abs(row - 1.0) > 1e-12)
                fail("RowStochastic", "row " + std::to_string(i + 1) + " sums to " + std::to_string(row));
            if (tm(i, i) != 0.0)
                fail("ZeroDiagonal", "p(" + std::to_string(i + 1) + "," + std::to_string(i + 1) + ") != 0");
        }
        if (!tm.irreducible()) fail("Irreducible", "transition matrix is not irreducible");
    }

    for (std::size_t i = 0; i < spec.holding.size(); ++i) {
        const auto& h = spec.holding[i];
        if (!(h.rate > 0.0))
            fail("HoldingRate", "regime " + std::to_string(i + 1) + " rate = " + std::to_string(h.rate));
        if (h.family == HoldingFamily::Gamma) {
            const double rounded = std::lround(h.shape);
            if (!(h.shape >= 1.0) || std::abs(h.shape - rounded) > 1e-9)
                fail("HoldingShape", "regime " + std::to_string(i + 1) + " gamma shape " +
                                         std::to_string(h.shape) + " must be a positive integer");
        }
    }

    if (!(spec.strike > 0.0)) fail("StrikePositive", "strike = " + std::to_string(spec.strike));
    if (!(spec.maturity > 0.0)) fail("MaturityPositive", "maturity = " + std::to_string(spec.maturity));
    return rep;
}

void require_valid(const MarketSpec& spec) {
    const auto rep = validate(spec);
    if (!rep.ok()) throw DomainError("invalid market spec: " + rep.summary());
}

// ---------------------------------------------------------------------------
// JSON I/O
// ---------------------------------------------------------------------------

namespace {

json to_json(const MarketSpec& spec) {
    json j;
    j["regimes"] = json::array();
    for (const auto& rp : spec.regimes)
        j["regimes"].push_back({{"mu", rp.mu}, {"sigma", rp.sigma}, {"r", rp.r}});
    j["transition"] = json::array();
    for (int i = 0; i < spec.transitions.k; ++i) {
        json row = json::array();
        for (int c = 0; c < spec.transitions.k; ++c) row.push_back(spec.transitions(i, c));
        j["transition"].push_back(row);
    }
    j["holding"] = json::array();
    for (const auto& h : spec.holding) {
        json params;
        if (h.family == HoldingFamily::Gamma) {
            params = {{"shape", h.shape}, {"rate", h.rate}};
            j["holding"].push_back({{"family", "gamma"}, {"params", params}});
        } else {
            params = {{"rate", h.rate}};
            j["holding"].push_back({{"family", "exponential"}, {"params", params}});
        }
    }
    j["strike"] = spec.strike;
    j["maturity"] = spec.maturity;
    return j;
}

} // namespace

MarketSpec parse_market_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DomainError(std::string("spec JSON parse error: ") + e.what());
    }
    try {
        MarketSpec spec;
        for (const auto& rj : j.at("regimes"))
            spec.regimes.push_back({rj.at("mu").get<double>(), rj.at("sigma").get<double>(),
                                    rj.at("r").get<double>()});
        const auto& tj = j.at("transition");
        spec.transitions.k = static_cast<int>(tj.size());
        for (const auto& row : tj)
            for (const auto& v : row) spec.transitions.p.push_back(v.get<double>());
        for (const auto& hj : j.at("holding")) {
            const std::string family = hj.at("family").get<std::string>();
            const auto& params = hj.at("params");
            if (family == "exponential")
                spec.holding.push_back(HoldingTimeDist::exponential(params.at("rate").get<double>()));
            else if (family == "gamma")
                spec.holding.push_back(HoldingTimeDist::gamma(params.at("shape").get<double>(),
                                                              params.at("rate").get<double>()));
            else
                throw DomainError("unknown holding family '" + family + "'");
        }
        spec.strike = j.at("strike").get<double>();
        spec.maturity = j.at("maturity").get<double>();
        return spec;
    } catch (const json::exception& e) {
        throw DomainError(std::string("spec JSON shape error: ") + e.what());
    }
}

MarketSpec load_market_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open spec file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_market_spec(buf.str());
}

std::string to_json_string(const MarketSpec& spec) { return to_json(spec).dump(2); }

std::uint64_t fingerprint(const MarketSpec& spec) {
    const std::string canon = to_json(spec).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace smm
