#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace liptok {

// Runs jobs[0..n) on up to `workers` threads. Each job owns its thread-local
// tape; results land in pre-sized slots so completion order does not matter.
inline void run_parallel(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& job) {
    if (n == 0) return;
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                job(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace liptok
