#pragma once

#include <functional>

namespace nearps {

/// Worker count: NEARPS_NUM_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
int thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are
/// disjoint, so bodies that only write their own range need no locking.
void parallel_for(int n, const std::function<void(int, int)>& body);

}  // namespace nearps
