#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "smm/market_spec.hpp"

namespace smm {

enum class Measure { Physical, RiskNeutral };

/// Monte Carlo run configuration. observation_times doubles as the
/// rebalance schedule for the practitioner's measures.
struct SimConfig {
    Measure measure = Measure::Physical;
    long n_paths = 100000;
    std::uint64_t seed = 1;
    std::vector<double> observation_times;
    int compensator_substeps = 50; // trapezium sub-intervals per sojourn
};

/// Deterministic per-path random stream: the engine state depends only on
/// (seed, path_index), never on which worker runs the path.
class PathRng {
  public:
    PathRng(std::uint64_t seed, std::uint64_t path_index);
    double uniform(); // [0, 1)
    double normal();

  private:
    std::mt19937_64 eng_;
};

/// Jump skeleton of one trajectory: regimes_[q] holds on
/// [jump_times_[q-1], jump_times_[q]) with jump_times_[-1] := 0, and the
/// first sojourn started initial_elapsed before time 0.
struct JumpSkeleton {
    std::vector<double> jump_times; // strictly inside (0, horizon)
    std::vector<int> regimes;       // size jump_times.size() + 1
    double initial_elapsed = 0.0;

    int num_jumps() const { return static_cast<int>(jump_times.size()); }
    /// Regime active over [t, next jump); t in [0, horizon].
    int regime_at(double t) const;
    /// Elapsed time Y_t (right-continuous: 0 at a jump instant).
    double elapsed_at(double t) const;
    /// Sojourn index whose half-open interval contains t.
    int sojourn_index(double t) const;
};

/// Samples holding times from the conditional law given the initial elapsed
/// time (inverse CDF restricted to (F(y0|i), 1)), next regimes from the
/// matrix row, truncated at the horizon.
/// Throws SaturatedHoldingTime when F(y0|x0) is saturated.
JumpSkeleton sample_semi_markov(const MarketSpec& spec, int x0, double y0, double horizon,
                                PathRng& rng);

/// One trajectory of (S, X, Y) with exact lognormal stock increments and
/// exact piecewise-constant-rate discounting on the union of jump times,
/// observation times and {0, horizon}.
struct MarketPath {
    JumpSkeleton skeleton;
    std::vector<double> times;
    std::vector<double> stock;
    std::vector<double> discount; // exp(-int_0^t r)
    std::vector<int> regime;      // right-continuous state at times[q]
    std::vector<double> elapsed;  // Y at times[q]

    double at_time(const std::vector<double>& field, double t) const;
    double stock_at(double t) const { return at_time(stock, t); }
    double discount_at(double t) const { return at_time(discount, t); }
};

MarketPath sample_market_path(const MarketSpec& spec, double s0, int x0, double y0,
                              const SimConfig& config, long path_index,
                              std::span<const double> extra_times = {});

/// Fills stock and discount for an already-sampled skeleton. eval_times is
/// augmented with {0, horizon} and the jump times, then sorted and deduped.
/// Draws one normal per resulting segment, in time order.
MarketPath fill_market_path(const MarketSpec& spec, JumpSkeleton skeleton, double s0,
                            Measure measure, std::vector<double> eval_times, PathRng& rng);

/// CSV dump "path_id,t,S,X,Y,discount" (regime 1-based), appending rows.
void append_path_csv(const MarketPath& path, long path_id, std::string& out);

} // namespace smm
