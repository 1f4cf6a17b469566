#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ipseg {

// Worker cap for engine-internal loops. Initialised from IPSEG_THREADS on first
// use (unset or 0 = hardware concurrency).
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Splits [begin, end) into contiguous chunks and runs fn(lo, hi) on each.
// Callers only pass loops whose iterations write disjoint outputs, so the
// result never depends on the worker count.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, std::size_t min_chunk, Fn&& fn)
{
    if (end <= begin)
        return;
    const std::size_t total = end - begin;
    std::size_t workers = std::min(thread_count(), std::max<std::size_t>(1, total / std::max<std::size_t>(1, min_chunk)));
    if (workers <= 1) {
        fn(begin, end);
        return;
    }
    const std::size_t chunk = (total + workers - 1) / workers;
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo < hi)
            pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    fn(begin, std::min(end, begin + chunk));
}

}  // namespace ipseg
