#include <benchmark/benchmark.h>

#include "smm/risk_engine.hpp"
#include "smm/volterra_engine.hpp"

namespace {

smm::MarketSpec three_regime() {
    smm::MarketSpec s;
    s.regimes = {{0.2, 0.2, 0.2}, {0.6, 0.4, 0.5}, {0.8, 0.3, 0.7}};
    s.transitions.k = 3;
    s.transitions.p = {0.0,       2.0 / 3.0, 1.0 / 3.0, 0.5,       0.0,
                       0.5,       1.0 / 3.0, 2.0 / 3.0, 0.0};
    s.holding = {smm::HoldingTimeDist::gamma(2, 1.0), smm::HoldingTimeDist::gamma(2, 1.0),
                 smm::HoldingTimeDist::gamma(2, 1.0)};
    return s;
}

const smm::VolterraEngine& shared_engine() {
    static smm::VolterraEngine e(three_regime(),
                                 smm::SolverGrid::make(three_regime(), 0.01, 0.02, 4.0));
    return e;
}

void BM_solve_surface(benchmark::State& state) {
    const smm::MarketSpec spec = three_regime();
    const double dt = 1.0 / static_cast<double>(state.range(0));
    const auto grid = smm::SolverGrid::make(spec, dt, 0.04, 4.0);
    for (auto _ : state) {
        smm::VolterraEngine engine(spec, grid);
        benchmark::DoNotOptimize(engine.surface().values.data());
    }
}
BENCHMARK(BM_solve_surface)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_price_query_aged(benchmark::State& state) {
    const auto& e = shared_engine();
    double s = 0.62;
    for (auto _ : state) {
        benchmark::DoNotOptimize(e.price_at(0.37, s, 1, 0.25));
        s = s < 2.0 ? s + 1e-4 : 0.62;
    }
}
BENCHMARK(BM_price_query_aged);

void BM_hedge_query(benchmark::State& state) {
    const auto& e = shared_engine();
    double s = 0.62;
    for (auto _ : state) {
        benchmark::DoNotOptimize(e.hedge_at(0.37, s, 1, 0.25).xi);
        s = s < 2.0 ? s + 1e-4 : 0.62;
    }
}
BENCHMARK(BM_hedge_query);

void BM_sample_path(benchmark::State& state) {
    const smm::MarketSpec spec = three_regime();
    smm::SimConfig cfg;
    cfg.measure = smm::Measure::RiskNeutral;
    cfg.observation_times = smm::uniform_rebalance_times(1.0, 12);
    long p = 0;
    for (auto _ : state) {
        const auto path = smm::sample_market_path(spec, 1.0, 0, 0.0, cfg, p++);
        benchmark::DoNotOptimize(path.stock.back());
    }
}
BENCHMARK(BM_sample_path);

void BM_risk_point(benchmark::State& state) {
    const auto& e = shared_engine();
    smm::SimConfig cfg;
    cfg.n_paths = state.range(0);
    cfg.observation_times = smm::uniform_rebalance_times(1.0, 12);
    for (auto _ : state) {
        const auto rep = smm::estimate_risks(e, 1.0, 0, 0.0, cfg);
        benchmark::DoNotOptimize(rep.qrr.estimate);
    }
}
BENCHMARK(BM_risk_point)->Arg(1000)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
