#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace asianop {

// Worker count for block-parallel loops, taken from ASIANOP_THREADS
// (default 1). Results never depend on it: work is split into fixed-size
// blocks and block results are combined in block order.
inline int& thread_count_ref() {
    static int n = [] {
        if (const char* env = std::getenv("ASIANOP_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1 && v <= 1024) return v;
        }
        return 1;
    }();
    return n;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) {
    if (n >= 1) thread_count_ref() = n;
}

inline constexpr std::size_t kParallelBlock = 8192;

inline std::size_t block_count(std::size_t n) {
    return (n + kParallelBlock - 1) / kParallelBlock;
}

// Runs fn(block_index, begin, end) over [0, n). fn must only touch state
// owned by its block index.
template <class Fn>
void for_each_block(std::size_t n, Fn&& fn) {
    const std::size_t nblocks = block_count(n);
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(thread_count()), std::max<std::size_t>(nblocks, 1));
    if (workers <= 1) {
        for (std::size_t b = 0; b < nblocks; ++b)
            fn(b, b * kParallelBlock, std::min(n, (b + 1) * kParallelBlock));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t b = next.fetch_add(1); b < nblocks; b = next.fetch_add(1))
                fn(b, b * kParallelBlock, std::min(n, (b + 1) * kParallelBlock));
        });
    }
    for (auto& t : pool) t.join();
}

// Blockwise sum with a fixed reduction order (independent of thread layout).
template <class Fn>
double block_sum(std::size_t n, Fn&& per_item) {
    std::vector<double> partial(block_count(n), 0.0);
    for_each_block(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += per_item(i);
        partial[b] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

}  // namespace asianop
