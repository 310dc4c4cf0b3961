#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace rtr {

/// Global worker count used by parallel_for. Defaults to 1 so that all
/// results are deterministic unless the caller opts in via --threads.
int thread_count();
void set_thread_count(int n);

/// Splits [begin, end) into `thread_count()` contiguous chunks and runs
/// `fn(chunk_begin, chunk_end, chunk_index)` on each. Partitioning
/// depends only on the configured thread count, never on scheduling, so
/// any per-chunk accumulation combined in chunk order is reproducible.
void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t, int)>& fn);

/// Convenience wrapper for element-wise loops: fn(index).
void parallel_for_each(int64_t begin, int64_t end,
                       const std::function<void(int64_t)>& fn);

}  // namespace rtr
