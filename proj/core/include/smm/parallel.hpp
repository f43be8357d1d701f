#pragma once

#include <functional>

namespace smm::parallel {

/// Caps the number of worker threads used by the engines. 0 restores the
/// hardware default. Results are identical for every setting: work is split
/// into fixed ranges and nothing is reduced across threads out of order.
void set_max_threads(int n);
int max_threads();

/// Runs fn(begin, end) over a static partition of [0, n).
void parallel_for(long n, const std::function<void(long, long)>& fn);

} // namespace smm::parallel
