#include "smm/path_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace smm {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t path_index)
    : eng_([&] {
          std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (path_index + 1));
          const std::uint64_t a = splitmix64(s);
          const std::uint64_t b = splitmix64(s);
          return std::mt19937_64(a ^ (b << 1));
      }()) {}

double PathRng::uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
}

double PathRng::normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }

// ---------------------------------------------------------------------------
// JumpSkeleton
// ---------------------------------------------------------------------------

int JumpSkeleton::sojourn_index(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return static_cast<int>(it - jump_times.begin());
}

int JumpSkeleton::regime_at(double t) const {
    return regimes[static_cast<std::size_t>(sojourn_index(t))];
}

double JumpSkeleton::elapsed_at(double t) const {
    const int q = sojourn_index(t);
    const double start = q == 0 ? 0.0 : jump_times[static_cast<std::size_t>(q) - 1];
    return (q == 0 ? initial_elapsed : 0.0) + (t - start);
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

JumpSkeleton sample_semi_markov(const MarketSpec& spec, int x0, double y0, double horizon,
                                PathRng& rng) {
    const int k = spec.num_regimes();
    if (x0 < 0 || x0 >= k) throw InvalidIndex("sample_semi_markov: regime index out of range");
    if (y0 < 0.0) throw DomainError("sample_semi_markov: y0 must be >= 0");

    JumpSkeleton sk;
    sk.initial_elapsed = y0;
    sk.regimes.push_back(x0);

    int regime = x0;
    double elapsed = y0;
    double t = 0.0;
    while (true) {
        const auto& h = spec.holding[static_cast<std::size_t>(regime)];
        const double surv = h.survival(elapsed);
        if (surv <= kHoldingSaturation)
            throw SaturatedHoldingTime("sample_semi_markov: initial elapsed time saturates F");
        const double u = rng.uniform();
        const double target = h.cdf(elapsed) + u * surv;
        double remaining = h.quantile(std::min(target, 1.0 - 1e-16)) - elapsed;
        if (remaining < 1e-15) remaining = 1e-15;
        const double t_next = t + remaining;
        if (t_next >= horizon) break;

        // next regime from the matrix row
        const double u2 = rng.uniform();
        double cum = 0.0;
        int next = -1;
        for (int j = 0; j < k; ++j) {
            cum += spec.transitions(regime, j);
            if (u2 < cum) {
                next = j;
                break;
            }
        }
        if (next < 0) { // row sums to 1 up to rounding
            for (int j = k - 1; j >= 0; --j)
                if (spec.transitions(regime, j) > 0.0) {
                    next = j;
                    break;
                }
        }
        sk.jump_times.push_back(t_next);
        sk.regimes.push_back(next);
        regime = next;
        elapsed = 0.0;
        t = t_next;
    }
    return sk;
}

double MarketPath::at_time(const std::vector<double>& field, double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end() || *it != t)
        throw DomainError("MarketPath: time " + std::to_string(t) + " is not an evaluation time");
    return field[static_cast<std::size_t>(it - times.begin())];
}

MarketPath fill_market_path(const MarketSpec& spec, JumpSkeleton skeleton, double s0,
                            Measure measure, std::vector<double> eval_times, PathRng& rng) {
    if (!(s0 > 0.0)) throw DomainError("fill_market_path: s0 must be > 0");
    const double T = spec.maturity;

    MarketPath path;
    path.skeleton = std::move(skeleton);

    std::vector<double>& times = eval_times;
    times.push_back(0.0);
    times.push_back(T);
    times.insert(times.end(), path.skeleton.jump_times.begin(), path.skeleton.jump_times.end());
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    if (times.front() < 0.0 || times.back() > T)
        throw DomainError("fill_market_path: evaluation time outside [0, horizon]");

    const std::size_t q = times.size();
    path.times = std::move(times);
    path.stock.resize(q);
    path.discount.resize(q);
    path.regime.resize(q);
    path.elapsed.resize(q);

    path.stock[0] = s0;
    path.discount[0] = 1.0;
    path.regime[0] = path.skeleton.regimes[0];
    path.elapsed[0] = path.skeleton.initial_elapsed;

    for (std::size_t idx = 1; idx < q; ++idx) {
        const double a = path.times[idx - 1];
        const double b = path.times[idx];
        const double d = b - a;
        // the sojourn active on (a, b): left endpoint state is right-continuous
        const int i = path.skeleton.regime_at(a);
        const auto& rp = spec.regimes[static_cast<std::size_t>(i)];
        const double drift = (measure == Measure::RiskNeutral ? rp.r : rp.mu);
        const double z = rng.normal();
        path.stock[idx] = path.stock[idx - 1] *
                          std::exp((drift - 0.5 * rp.sigma * rp.sigma) * d +
                                   rp.sigma * std::sqrt(d) * z);
        path.discount[idx] = path.discount[idx - 1] * std::exp(-rp.r * d);
        path.regime[idx] = path.skeleton.regime_at(b);
        path.elapsed[idx] = path.skeleton.elapsed_at(b);
    }
    return path;
}

MarketPath sample_market_path(const MarketSpec& spec, double s0, int x0, double y0,
                              const SimConfig& config, long path_index,
                              std::span<const double> extra_times) {
    PathRng rng(config.seed, static_cast<std::uint64_t>(path_index));
    JumpSkeleton sk = sample_semi_markov(spec, x0, y0, spec.maturity, rng);
    std::vector<double> evals(config.observation_times.begin(), config.observation_times.end());
    evals.insert(evals.end(), extra_times.begin(), extra_times.end());
    return fill_market_path(spec, std::move(sk), s0, config.measure, std::move(evals), rng);
}

void append_path_csv(const MarketPath& path, long path_id, std::string& out) {
    char buf[160];
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%d,%.17g,%.17g\n", path_id, path.times[i],
                      path.stock[i], path.regime[i] + 1, path.elapsed[i], path.discount[i]);
        out += buf;
    }
}

} // namespace smm
