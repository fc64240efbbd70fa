#pragma once

// Minimal deterministic parallel map. Results land in caller-indexed slots,
// so aggregation order never depends on scheduling.

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace plnoise {

/// Worker count: PLNOISE_THREADS overrides hardware_concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("PLNOISE_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = thread_count()) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const unsigned k = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    pool.reserve(k - 1);
    for (unsigned t = 1; t < k; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

} // namespace plnoise
