#include "dsagg/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace dsagg {

namespace {
std::atomic<unsigned> g_budget{0};
}

void set_thread_budget(unsigned threads) noexcept { g_budget.store(threads); }

unsigned thread_budget() noexcept {
    const unsigned b = g_budget.load();
    if (b != 0) return b;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace dsagg
