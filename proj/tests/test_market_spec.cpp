#include <doctest.h>

#include <cmath>

#include "smm/market_spec.hpp"
#include "test_helpers.hpp"

using namespace smm;

TEST_SUITE("market_spec") {

TEST_CASE("hazard matches the Gamma(2,1) closed form") {
    const MarketSpec spec = testutil::three_regime_spec();
    // F(y) = 1 - (1+y)e^{-y}, f(y) = y e^{-y}; at y = 1 the ratio is 1/2.
    CHECK(hazard(spec, 0, 1, 1.0) == doctest::Approx(2.0 / 3.0 * 0.5).epsilon(1e-12));
    CHECK(hazard(spec, 0, 1, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(hazard(spec, 0, 1, 0.0) == 0.0); // density vanishes at 0 for shape 2
}

TEST_CASE("hazard is constant for exponential holding times") {
    MarketSpec spec = testutil::three_regime_spec();
    spec.holding.assign(3, HoldingTimeDist::exponential(0.7));
    for (double y : {0.0, 0.3, 1.9, 7.0})
        CHECK(hazard(spec, 0, 1, y) == doctest::Approx(2.0 / 3.0 * 0.7).epsilon(1e-12));
}

TEST_CASE("gamma(2,1) hazard increases like y/(1+y)") {
    const MarketSpec spec = testutil::three_regime_spec();
    double prev = -1.0;
    for (double y = 0.0; y < 5.0; y += 0.25) {
        const double h = hazard(spec, 1, 0, y);
        CHECK(h == doctest::Approx(0.5 * y / (1.0 + y)).epsilon(1e-12));
        CHECK(h > prev);
        prev = h;
    }
}

TEST_CASE("hazard error paths") {
    const MarketSpec spec = testutil::three_regime_spec();
    CHECK_THROWS_AS(hazard(spec, 0, 0, 1.0), InvalidIndex);
    CHECK_THROWS_AS(hazard(spec, 0, 3, 1.0), InvalidIndex);
    CHECK_THROWS_AS(hazard(spec, -1, 1, 1.0), InvalidIndex);
    CHECK_THROWS_AS(hazard(spec, 0, 1, -0.5), DomainError);
    CHECK_THROWS_AS(hazard(spec, 0, 1, 60.0), SaturatedHoldingTime);
}

TEST_CASE("cumulative hazard equals -log survival") {
    const MarketSpec spec = testutil::three_regime_spec();
    // integral of sum_j hazard(i,j,u) du over [0, y] with fine trapezium
    for (double y : {0.5, 1.0, 2.5}) {
        const int n = 20000;
        double acc = 0.0;
        for (int t = 0; t <= n; ++t) {
            const double u = y * t / n;
            double h = 0.0;
            for (int j = 1; j < 3; ++j) h += hazard(spec, 0, j, u);
            acc += ((t == 0 || t == n) ? 0.5 : 1.0) * h * (y / n);
        }
        const double expect = -std::log(spec.holding[0].survival(y));
        CHECK(acc == doctest::Approx(expect).epsilon(1e-8));
    }
}

TEST_CASE("validate passes the worked three-regime market") {
    CHECK(validate(testutil::three_regime_spec()).ok());
}

TEST_CASE("validate flags a non-stochastic row") {
    MarketSpec spec = testutil::three_regime_spec();
    spec.transitions(0, 1) = 0.5666666; // row now sums to 0.9
    const auto rep = validate(spec);
    CHECK_FALSE(rep.ok());
    CHECK(rep.has("RowStochastic"));
}

TEST_CASE("two-regime permutation matrix is irreducible") {
    MarketSpec spec;
    spec.regimes = {{0.1, 0.3, 0.05}, {0.2, 0.2, 0.1}};
    spec.transitions.k = 2;
    spec.transitions.p = {0.0, 1.0, 1.0, 0.0};
    spec.holding = {HoldingTimeDist::exponential(1.0), HoldingTimeDist::gamma(2, 2.0)};
    CHECK(validate(spec).ok());
}

TEST_CASE("validate catches structural breakage") {
    MarketSpec spec = testutil::three_regime_spec();
    spec.regimes[1].sigma = 0.0;
    spec.regimes[2].r = -0.1;
    spec.transitions(1, 0) = 0.0;
    spec.transitions(1, 2) = 1.0;
    spec.transitions(2, 1) = 1.0;
    spec.transitions(2, 0) = 0.0; // states 1,2 no longer reach 0
    spec.holding[0] = HoldingTimeDist::gamma(1.5, 1.0);
    const auto rep = validate(spec);
    CHECK(rep.has("SigmaPositive"));
    CHECK(rep.has("RateNonnegative"));
    CHECK(rep.has("Irreducible"));
    CHECK(rep.has("HoldingShape"));
}

TEST_CASE("holding-time quantile inverts the CDF") {
    const HoldingTimeDist g = HoldingTimeDist::gamma(2, 1.0);
    for (double p : {0.01, 0.2643, 0.5, 0.9, 0.999}) {
        const double y = g.quantile(p);
        CHECK(g.cdf(y) == doctest::Approx(p).epsilon(1e-10));
    }
    const HoldingTimeDist e = HoldingTimeDist::exponential(2.5);
    CHECK(e.quantile(0.5) == doctest::Approx(std::log(2.0) / 2.5).epsilon(1e-12));
}

TEST_CASE("JSON round trip preserves the spec and its fingerprint") {
    const MarketSpec spec = testutil::three_regime_spec();
    const MarketSpec back = parse_market_spec(to_json_string(spec));
    CHECK(fingerprint(back) == fingerprint(spec));
    CHECK(back.transitions(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(back.holding[0].family == HoldingFamily::Gamma);

    CHECK_THROWS_AS(parse_market_spec("{not json"), DomainError);
    CHECK_THROWS_AS(parse_market_spec("{\"regimes\":[]}"), DomainError);
    CHECK_THROWS_AS(load_market_spec("/nonexistent/path.json"), DomainError);
}

} // TEST_SUITE
