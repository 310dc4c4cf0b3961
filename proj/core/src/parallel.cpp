#include "rtr/parallel.hpp"

#include <algorithm>

namespace rtr {

namespace {
int g_thread_count = 1;
}

int thread_count() { return g_thread_count; }

void set_thread_count(int n) { g_thread_count = std::max(1, n); }

void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t, int)>& fn) {
    const int64_t total = end - begin;
    if (total <= 0) return;

    const int chunks = int(std::min<int64_t>(g_thread_count, total));
    if (chunks == 1) {
        fn(begin, end, 0);
        return;
    }

    // Contiguous static partition: first `rem` chunks get one extra element.
    const int64_t base = total / chunks;
    const int64_t rem = total % chunks;
    std::vector<std::thread> workers;
    workers.reserve(chunks);
    int64_t cursor = begin;
    for (int c = 0; c < chunks; ++c) {
        const int64_t len = base + (c < rem ? 1 : 0);
        const int64_t lo = cursor;
        const int64_t hi = cursor + len;
        cursor = hi;
        workers.emplace_back([&fn, lo, hi, c] { fn(lo, hi, c); });
    }
    for (auto& w : workers) w.join();
}

void parallel_for_each(int64_t begin, int64_t end,
                       const std::function<void(int64_t)>& fn) {
    parallel_for(begin, end, [&fn](int64_t lo, int64_t hi, int) {
        for (int64_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace rtr
