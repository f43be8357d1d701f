#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "smm/market_spec.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using smm::cli::RunConfig;

namespace {

struct TempDir {
    fs::path dir;
    TempDir(const std::string& name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string path(const std::string& f) const { return (dir / f).string(); }
};

std::string write_spec(const TempDir& td, const smm::MarketSpec& spec) {
    const std::string p = td.path("spec.json");
    std::ofstream f(p);
    f << smm::to_json_string(spec);
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("missing or invalid spec files exit with code 2") {
    CHECK(smm::cli::run_cli({"price", "--spec", "/no/such/file.json"}) == 2);

    TempDir td("smm_cli_invalid");
    smm::MarketSpec broken = testutil::three_regime_spec();
    broken.transitions(0, 1) = 0.2; // row sum 0.533...
    CHECK(smm::cli::run_cli({"price", "--spec", write_spec(td, broken)}) == 2);
}

TEST_CASE("stability violations exit with code 3 unless forced") {
    TempDir td("smm_cli_stab");
    // fast switching: bound e^{-4}/4 ~ 0.0046, so dt = 0.05 is refused
    smm::MarketSpec fast = testutil::three_regime_spec();
    fast.holding.assign(3, smm::HoldingTimeDist::exponential(4.0));
    const std::string spec = write_spec(td, fast);
    CHECK(smm::cli::run_cli({"price", "--spec", spec, "--dt", "0.05", "--ds", "0.1",
                             "--out", td.path("s.csv")}) == 3);
    CHECK(smm::cli::run_cli({"price", "--spec", spec, "--dt", "0.05", "--ds", "0.1", "--force",
                             "--out", td.path("s.csv")}) == 0);
}

TEST_CASE("price writes the surface pair and answers maturity queries") {
    TempDir td("smm_cli_price");
    const std::string spec = write_spec(td, testutil::three_regime_spec());
    const std::string out = td.path("surface.csv");
    CHECK(smm::cli::run_cli({"price", "--spec", spec, "--dt", "0.05", "--ds", "0.1", "--out", out,
                             "--at", "0:1:1:0", "--at", "1:1.5:2:0.4"}) == 0);
    CHECK(fs::exists(out));
    CHECK(fs::exists(td.path("surface.meta.json")));
    const std::string head = slurp(out).substr(0, 22);
    CHECK(head == "n,t,m,s,regime,phi\n0,1");
    CHECK(smm::cli::run_cli({"price", "--spec", spec, "--dt", "0.05", "--ds", "0.1", "--out", out,
                             "--at", "0:1:9:0"}) == 2); // bad regime
    CHECK(smm::cli::run_cli({"price", "--spec", spec, "--at", "zzz"}) == 2);
}

TEST_CASE("risk sweep emits one row per point and measure") {
    TempDir td("smm_cli_risk");
    const std::string spec = write_spec(td, testutil::three_regime_spec());
    const std::string out = td.path("risk.csv");
    RunConfig cfg;
    cfg.command = "risk";
    cfg.spec_path = spec;
    cfg.dt = 0.02;
    cfg.ds = 0.04;
    cfg.paths = 300;
    cfg.sweep = {0.5, 1.3, 5};
    cfg.rebalances = 4;
    cfg.out = out;
    CHECK(smm::cli::run(cfg) == 0);
    std::ifstream f(out);
    std::string line;
    long rows = 0;
    std::getline(f, line);
    CHECK(line == "s0,regime,measure,estimate,stderr,n_paths");
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 5 * 3 * 4);
    CHECK(fs::exists(td.path("risk.meta.json")));

    cfg.rebalances = 0;
    CHECK(smm::cli::run(cfg) == 2);
}

TEST_CASE("identical configuration and seed reproduce output bytes across worker counts") {
    TempDir td("smm_cli_det");
    const std::string spec = write_spec(td, testutil::three_regime_spec());

    auto run_risk = [&](const std::string& out, int threads) {
        RunConfig cfg;
        cfg.command = "risk";
        cfg.spec_path = spec;
        cfg.dt = 0.02;
        cfg.ds = 0.04;
        cfg.paths = 2000;
        cfg.seed = 7;
        cfg.sweep = {0.8, 1.2, 3};
        cfg.rebalances = 4;
        cfg.threads = threads;
        cfg.out = td.path(out);
        REQUIRE(smm::cli::run(cfg) == 0);
        return slurp(td.path(out));
    };
    const std::string a = run_risk("r1.csv", 1);
    const std::string b = run_risk("r8.csv", 8);
    CHECK(a == b);
    CHECK(a.size() > 100);

    auto run_stab = [&](const std::string& out, int threads) {
        RunConfig cfg;
        cfg.command = "stability";
        cfg.spec_path = spec;
        cfg.dt = 0.02;
        cfg.ds = 0.04;
        cfg.threads = threads;
        cfg.out = td.path(out);
        REQUIRE(smm::cli::run(cfg) == 0);
        return slurp(td.path(out));
    };
    CHECK(run_stab("p1.csv", 1) == run_stab("p8.csv", 8));
}

} // TEST_SUITE
