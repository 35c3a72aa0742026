#pragma once

#include "vvord/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace vvord {

/// Worker cap for scenario-parallel loops. 0 means "available parallelism".
/// Results never depend on this value: every parallel loop writes into a
/// per-index slot and reductions run afterwards in a fixed order.
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, n). If any call throws, the exception from the
/// lowest failing index is rethrown after all workers have joined.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) guarded(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) guarded(i);
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Pairwise (cascade) summation in a fixed association order.
double pairwise_sum(std::span<const double> values);

/// Elementwise pairwise summation of equally sized vectors.
Vector pairwise_sum(std::span<const Vector> values);

}  // namespace vvord
