#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace utvi {

/// Worker count from the UTVI_THREADS environment variable; unset, empty, or
/// unparseable values mean 1. Clamped to [1, 64].
std::size_t thread_count();

/// Runs fn(begin, end) over a contiguous partition of [0, n) using
/// thread_count() workers. fn must write only to disjoint preallocated
/// slots, so the result is identical for every worker count.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
    const std::size_t t = thread_count();
    if (t <= 1 || n < 2 * t) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t w = 0; w < t; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (std::thread& th : pool) th.join();
}

}  // namespace utvi
