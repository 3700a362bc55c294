#pragma once

#include <thread>
#include <vector>

namespace smp {

// Static range partition over workers.  Each worker owns a contiguous,
// disjoint index block, so results written per index are independent of
// scheduling; with identical per-index arithmetic the output is bitwise
// reproducible for any worker count.
template <typename Fn>
void parallel_for_blocks(long n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        fn(0, 0L, n);
        return;
    }
    if (workers > n) workers = static_cast<int>(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        const long lo = n * w / workers;
        const long hi = n * (w + 1) / workers;
        pool.emplace_back([&fn, w, lo, hi] { fn(w, lo, hi); });
    }
    for (auto& th : pool) th.join();
}

} // namespace smp
