#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace cg {

/// Splits replications [0, n) into contiguous shards and runs the worker once
/// per shard, possibly on a thread pool.  Each shard must write only its own
/// accumulator slot; merging in shard order afterwards keeps results
/// bit-identical for a fixed shard count regardless of thread count.
inline void for_each_shard(std::uint64_t n, int shards, int threads,
                           const std::function<void(int shard, std::uint64_t lo, std::uint64_t hi)>& work) {
    if (shards < 1) shards = 1;
    auto bounds = [&](int s) {
        const std::uint64_t lo = n * static_cast<std::uint64_t>(s) / static_cast<std::uint64_t>(shards);
        const std::uint64_t hi = n * (static_cast<std::uint64_t>(s) + 1) / static_cast<std::uint64_t>(shards);
        return std::pair<std::uint64_t, std::uint64_t>(lo, hi);
    };
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || shards == 1) {
        for (int s = 0; s < shards; ++s) {
            auto [lo, hi] = bounds(s);
            work(s, lo, hi);
        }
        return;
    }
    std::atomic<int> next{0};
    auto runner = [&]() {
        for (;;) {
            const int s = next.fetch_add(1);
            if (s >= shards) return;
            auto [lo, hi] = bounds(s);
            work(s, lo, hi);
        }
    };
    const int pool = threads < shards ? threads : shards;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(pool));
    for (int i = 0; i < pool; ++i) workers.emplace_back(runner);
    for (auto& w : workers) w.join();
}

} // namespace cg
