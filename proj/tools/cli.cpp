#include "cli.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smm/parallel.hpp"
#include "smm/risk_engine.hpp"
#include "smm/volterra_engine.hpp"

namespace smm::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStability = 3;

struct Prepared {
    MarketSpec spec;
    SolverGrid grid;
};

std::optional<Prepared> prepare(const RunConfig& cfg, int& exit_code) {
    parallel::set_max_threads(cfg.threads);
    MarketSpec spec;
    try {
        spec = load_market_spec(cfg.spec_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        exit_code = kExitConfig;
        return std::nullopt;
    }
    const ValidationReport rep = validate(spec);
    if (!rep.ok()) {
        std::cerr << "invalid market spec:\n";
        for (const auto& v : rep.violations)
            std::cerr << "  " << v.code << ": " << v.message << "\n";
        exit_code = kExitConfig;
        return std::nullopt;
    }
    const double ds = cfg.ds > 0.0 ? cfg.ds : spec.strike / 100.0;
    const double smax = cfg.smax > 0.0 ? cfg.smax : 4.0 * spec.strike;
    const KernelRule rule = cfg.point_kernel ? KernelRule::PointDensity : KernelRule::CellIntegrated;
    try {
        SolverGrid grid = SolverGrid::make(spec, cfg.dt, ds, smax, rule, cfg.force);
        return Prepared{std::move(spec), grid};
    } catch (const StabilityViolation& e) {
        std::cerr << "stability: " << e.what() << " (use --force to override)\n";
        exit_code = kExitStability;
        return std::nullopt;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        exit_code = kExitConfig;
        return std::nullopt;
    }
}

Measure parse_measure(const std::string& m) {
    if (m == "physical") return Measure::Physical;
    if (m == "riskneutral") return Measure::RiskNeutral;
    throw DomainError("unknown measure '" + m + "' (physical|riskneutral)");
}

nlohmann::json config_echo(const RunConfig& cfg, const Prepared& pr) {
    nlohmann::json j;
    j["command"] = cfg.command;
    j["spec"] = nlohmann::json::parse(to_json_string(pr.spec));
    char fp[32];
    std::snprintf(fp, sizeof fp, "%016" PRIx64, fingerprint(pr.spec));
    j["spec_fingerprint"] = fp;
    j["dt"] = pr.grid.dt;
    j["ds"] = pr.grid.ds;
    j["s_max"] = pr.grid.s_top();
    j["paths"] = cfg.paths;
    j["seed"] = cfg.seed;
    j["rebalances"] = cfg.rebalances;
    j["sweep"] = {{"lo", cfg.sweep.lo}, {"hi", cfg.sweep.hi}, {"count", cfg.sweep.count}};
    j["measure"] = cfg.measure;
    j["substeps"] = cfg.substeps;
    return j;
}

int run_price(const RunConfig& cfg) {
    int code = kExitOk;
    auto pr = prepare(cfg, code);
    if (!pr) return code;

    VolterraEngine engine(pr->spec, pr->grid);
    const std::string out = cfg.out.empty() ? "surface.csv" : cfg.out;
    write_surface_csv(engine.surface(), out);
    write_surface_meta(engine.surface(), meta_path_for(out));
    std::cout << "surface: " << out << " (" << (pr->grid.n_steps + 1) << " x "
              << (pr->grid.m_max + 1) << " x " << pr->spec.num_regimes() << " nodes)\n";
    std::cout << "max kernel tail mass (lower half of grid): "
              << engine.surface().max_truncation_tail << "\n";

    std::vector<QueryPoint> queries = cfg.queries;
    if (queries.empty()) queries.push_back({0.0, pr->spec.strike, 1, 0.0});
    for (const auto& q : queries) {
        if (q.regime < 1 || q.regime > pr->spec.num_regimes()) {
            std::cerr << "error: query regime " << q.regime << " out of range\n";
            return kExitConfig;
        }
        try {
            const double price = engine.price_at(q.t, q.s, q.regime - 1, q.y);
            const HedgeQuote h = q.s > 0.0 ? engine.hedge_at(q.t, q.s, q.regime - 1, q.y)
                                           : HedgeQuote{price, 0.0, price};
            std::printf("t=%g s=%g regime=%d y=%g  price=%.10g xi=%.10g epsilon=%.10g\n", q.t, q.s,
                        q.regime, q.y, price, h.xi, h.epsilon);
        } catch (const std::exception& e) {
            std::cerr << "error: query (t=" << q.t << ", s=" << q.s << ", i=" << q.regime
                      << ", y=" << q.y << "): " << e.what() << "\n";
            return kExitConfig;
        }
    }
    return kExitOk;
}

int run_risk(const RunConfig& cfg) {
    int code = kExitOk;
    if (cfg.rebalances < 1) {
        std::cerr << "error: --rebalances must be >= 1 (practitioner measures need a schedule)\n";
        return kExitConfig;
    }
    if (cfg.paths < 1 || cfg.sweep.count < 1 || !(cfg.sweep.lo > 0.0) ||
        cfg.sweep.hi < cfg.sweep.lo) {
        std::cerr << "error: invalid sweep or path count\n";
        return kExitConfig;
    }
    auto pr = prepare(cfg, code);
    if (!pr) return code;

    SimConfig sim;
    try {
        sim.measure = parse_measure(cfg.measure);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    sim.n_paths = cfg.paths;
    sim.seed = cfg.seed;
    sim.observation_times = uniform_rebalance_times(pr->spec.maturity, cfg.rebalances);
    sim.compensator_substeps = cfg.substeps;

    VolterraEngine engine(pr->spec, pr->grid);

    std::string csv = risk_csv_header();
    for (int c = 0; c < cfg.sweep.count; ++c) {
        const double s0 = cfg.sweep.count == 1
                              ? cfg.sweep.lo
                              : cfg.sweep.lo + (cfg.sweep.hi - cfg.sweep.lo) * c /
                                                   (cfg.sweep.count - 1);
        for (int i = 0; i < pr->spec.num_regimes(); ++i) {
            const RiskReport rep = estimate_risks(engine, s0, i, 0.0, sim);
            append_report_csv(rep, csv);
        }
    }
    const std::string out = cfg.out.empty() ? "risk.csv" : cfg.out;
    {
        std::ofstream f(out, std::ios::binary);
        if (!f) {
            std::cerr << "error: cannot write " << out << "\n";
            return kExitConfig;
        }
        f << csv;
    }
    {
        std::ofstream f(meta_path_for(out), std::ios::binary);
        f << config_echo(cfg, *pr).dump(2) << '\n';
    }
    std::cout << "risk sweep: " << out << " (" << cfg.sweep.count << " x "
              << pr->spec.num_regimes() << " points, " << cfg.paths << " paths each)\n";
    return kExitOk;
}

int run_stability(const RunConfig& cfg) {
    int code = kExitOk;
    auto pr = prepare(cfg, code);
    if (!pr) return code;

    const double a = stability_rate(pr->spec);
    const double bound = stability_bound(pr->spec);
    std::printf("a = %.6g, stability bound dt <= %.6g (grid dt = %.6g)\n", a, bound, pr->grid.dt);

    VolterraEngine engine(pr->spec, pr->grid);
    const int inject = cfg.inject == -2 ? pr->grid.n_steps / 2 : cfg.inject;
    const auto single = engine.perturbation_profile(inject, cfg.delta);
    const auto repeated = engine.perturbation_profile(-1, cfg.delta);

    const double final_single = single.back();
    const double final_repeated = repeated.back();
    const double repeat_bound = (std::exp(a * pr->spec.maturity) - 1.0) * cfg.delta;
    std::printf("single injection delta=%g at step %d: final effect %.6g (%s delta)\n", cfg.delta,
                inject, final_single, final_single < cfg.delta ? "<" : ">=");
    std::printf("repeated injections: final drift %.6g, bound (e^{aT}-1)*delta = %.6g (%s)\n",
                final_repeated, repeat_bound, final_repeated < repeat_bound ? "ok" : "exceeded");

    const std::string out = cfg.out.empty() ? "stability.csv" : cfg.out;
    std::FILE* f = std::fopen(out.c_str(), "wb");
    if (!f) {
        std::cerr << "error: cannot write " << out << "\n";
        return kExitConfig;
    }
    std::fputs("n,t,effect_single,effect_repeated\n", f);
    for (int n = 0; n <= pr->grid.n_steps; ++n)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g\n", n, pr->grid.time(n),
                     single[static_cast<std::size_t>(n)], repeated[static_cast<std::size_t>(n)]);
    std::fclose(f);
    std::cout << "profile: " << out << "\n";
    return kExitOk;
}

} // namespace

int run(const RunConfig& cfg) {
    try {
        if (cfg.command == "price") return run_price(cfg);
        if (cfg.command == "risk") return run_risk(cfg);
        if (cfg.command == "stability") return run_stability(cfg);
        std::cerr << "error: unknown command '" << cfg.command << "'\n";
        return kExitConfig;
    } catch (const StabilityViolation& e) {
        std::cerr << "stability: " << e.what() << "\n";
        return kExitStability;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"semi-Markov regime-switching option pricing and hedging"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::vector<std::string> at_args;
    std::string sweep_arg;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--spec", cfg.spec_path, "market spec JSON")->required();
        sub->add_option("--dt", cfg.dt, "time step");
        sub->add_option("--ds", cfg.ds, "stock step (default strike/100)");
        sub->add_option("--smax", cfg.smax, "grid top (default 4*strike)");
        sub->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
        sub->add_option("--out", cfg.out, "output CSV path");
        sub->add_flag("--force", cfg.force, "run despite a stability violation");
        sub->add_flag("--point-kernel", cfg.point_kernel, "pointwise density kernel rule");
    };

    CLI::App* price = app.add_subcommand("price", "solve the price surface and query it");
    add_common(price);
    price->add_option("--at", at_args, "query point t:s:i:y (repeatable)");

    CLI::App* risk = app.add_subcommand("risk", "Monte Carlo residual-risk sweep");
    add_common(risk);
    risk->add_option("--paths", cfg.paths, "paths per conditioning point");
    risk->add_option("--seed", cfg.seed, "master seed");
    risk->add_option("--rebalances", cfg.rebalances, "rebalance count for PM measures");
    risk->add_option("--sweep", sweep_arg, "initial stock sweep lo:hi:count");
    risk->add_option("--measure", cfg.measure, "physical|riskneutral");
    risk->add_option("--substeps", cfg.substeps, "compensator sub-steps per sojourn");

    CLI::App* stab = app.add_subcommand("stability", "bound and perturbation profile");
    add_common(stab);
    stab->add_option("--delta", cfg.delta, "perturbation magnitude");
    stab->add_option("--inject", cfg.inject, "injection step (-1: every step)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    for (const auto& a : at_args) {
        QueryPoint q;
        if (std::sscanf(a.c_str(), "%lg:%lg:%d:%lg", &q.t, &q.s, &q.regime, &q.y) != 4) {
            std::cerr << "error: bad --at value '" << a << "' (want t:s:i:y)\n";
            return kExitConfig;
        }
        cfg.queries.push_back(q);
    }
    if (!sweep_arg.empty()) {
        if (std::sscanf(sweep_arg.c_str(), "%lg:%lg:%d", &cfg.sweep.lo, &cfg.sweep.hi,
                        &cfg.sweep.count) != 3) {
            std::cerr << "error: bad --sweep value '" << sweep_arg << "' (want lo:hi:count)\n";
            return kExitConfig;
        }
    }
    for (auto* sub : {price, risk, stab})
        if (sub->parsed()) cfg.command = sub->get_name();
    return run(cfg);
}

} // namespace smm::cli
