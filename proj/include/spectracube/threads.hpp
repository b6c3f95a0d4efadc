#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace spectracube {

// Worker count: explicit request > SPECTRACUBE_THREADS > hardware concurrency.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SPECTRACUBE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Splits [0, count) into contiguous chunks, one worker thread each. Work
// items must write to disjoint locations; results do not depend on the
// thread count.
inline void parallel_for(int count, int threads, const std::function<void(int, int)>& body) {
    threads = std::min(resolve_threads(threads), std::max(count, 1));
    if (threads <= 1 || count <= 1) {
        body(0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    const int chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, lo, hi);
    }
    for (auto& th : pool) th.join();
}

}  // namespace spectracube
