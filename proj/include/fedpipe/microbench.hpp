#pragma once
#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>
#include <vector>

#include "fedpipe/aggregator.hpp"

namespace fedpipe {

struct ContentionResult {
    unsigned workers = 0;
    std::size_t elements = 0;
    std::uint64_t adds_per_worker = 0;
    double exact_mops = 0.0;
    double approx_mops = 0.0;

    double ratio() const { return exact_mops > 0 ? approx_mops / exact_mops : 0.0; }
};

// Fully contended element-wise adds: every worker sweeps the same small
// array. Measures the exact (atomic RMW) against the approximate (racy
// load/store) discipline.
inline ContentionResult contention_benchmark(unsigned workers = 4, std::size_t elements = 64,
                                             std::uint64_t adds_per_worker = 4'000'000) {
    ContentionResult result{workers, elements, adds_per_worker, 0.0, 0.0};

    auto run = [&](AggMode mode) {
        std::vector<float> array(elements, 0.0f);
        std::atomic<bool> go{false};
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
                std::uint64_t done = 0;
                while (done < adds_per_worker) {
                    for (std::size_t i = 0; i < elements && done < adds_per_worker; ++i, ++done) {
                        if (mode == AggMode::Exact) {
                            std::atomic_ref<float>(array[i]).fetch_add(1.0f,
                                                                       std::memory_order_relaxed);
                        } else {
                            std::atomic_ref<float> cell(array[i]);
                            cell.store(cell.load(std::memory_order_relaxed) + 1.0f,
                                       std::memory_order_relaxed);
                        }
                    }
                }
            });
        }
        const auto t0 = std::chrono::steady_clock::now();
        go.store(true, std::memory_order_release);
        for (auto& t : threads) t.join();
        const auto t1 = std::chrono::steady_clock::now();
        const double secs = std::chrono::duration<double>(t1 - t0).count();
        return static_cast<double>(adds_per_worker) * workers / secs / 1e6;
    };

    result.exact_mops = run(AggMode::Exact);
    result.approx_mops = run(AggMode::Approximate);
    return result;
}

}  // namespace fedpipe
