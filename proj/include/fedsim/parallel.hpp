#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fedsim {

// Runs fn(i) for i in [0, n). Each index must be an independent pure
// computation; results may be written to disjoint slots only. Output is then
// identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (workers > n) workers = static_cast<unsigned>(n);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

// Worker cap from the environment; 0 means "not set".
inline unsigned env_worker_cap() {
    const char* v = std::getenv("FEDSIM_WORKERS");
    if (!v) return 0;
    const long n = std::strtol(v, nullptr, 10);
    if (n < 1) return 0;
    return static_cast<unsigned>(n);
}

}  // namespace fedsim
