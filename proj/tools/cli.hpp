#pragma once

#include <string>
#include <vector>

namespace smm::cli {

struct QueryPoint {
    double t = 0.0;
    double s = 0.0;
    int regime = 1; // 1-based on the command line
    double y = 0.0;
};

struct SweepRange {
    double lo = 0.3;
    double hi = 1.3;
    int count = 101;
};

struct RunConfig {
    std::string command; // price | risk | stability
    std::string spec_path;
    double dt = 1.0 / 200.0;
    double ds = 0.0;   // 0: strike / 100
    double smax = 0.0; // 0: 4 * strike
    long paths = 100000;
    unsigned long long seed = 1;
    int rebalances = 12;
    SweepRange sweep;
    std::string out;
    bool force = false;
    std::string measure = "physical"; // physical | riskneutral
    int threads = 0;
    std::vector<QueryPoint> queries; // price command
    double delta = 1e-3;             // stability command
    int inject = -2;                 // -2: midpoint step, -1: every step
    int substeps = 50;
    bool point_kernel = false; // pointwise density rule instead of cell masses
};

/// Exit codes: 0 ok, 2 configuration or validation failure, 3 stability
/// violation without --force.
int run(const RunConfig& config);

/// Full command line, e.g. {"price", "--spec", "market.json"}.
int run_cli(const std::vector<std::string>& args);

} // namespace smm::cli
