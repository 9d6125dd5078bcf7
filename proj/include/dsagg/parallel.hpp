#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dsagg {

/// Process-wide thread budget used by the parallel loops. 0 means "use hardware concurrency".
void set_thread_budget(unsigned threads) noexcept;
unsigned thread_budget() noexcept;

/// Runs fn(i) for i in [0, n) over contiguous index blocks.
///
/// Callers must make fn(i) depend only on i (seed from the index, write to slot i); reductions are
/// then done by the caller in index order, which keeps results identical for every thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned budget = thread_budget();
    const std::size_t workers = std::min<std::size_t>(budget == 0 ? 1 : budget, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t block = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * block;
        const std::size_t hi = std::min(n, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace dsagg
