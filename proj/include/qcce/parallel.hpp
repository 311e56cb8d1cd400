// parallel.hpp — Minimal blocking parallel-for over an index range.
//
// Work items are dispatched in chunks through an atomic cursor; callers that
// need deterministic results write into per-index slots and do any ordered
// reduction themselves afterwards.

#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qcce::parallel {

// Worker-count resolution: explicit request > QCCE_THREADS > hardware.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("QCCE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

template <class Fn> // Fn: void(std::size_t index)
void parallel_for(std::size_t n, Fn&& fn, int threads = 0, std::size_t chunk = 0) {
    const int workers = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (chunk == 0) chunk = std::max<std::size_t>(1, n / (static_cast<std::size_t>(workers) * 8));

    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto body = [&]() {
        for (;;) {
            const std::size_t begin = cursor.fetch_add(chunk);
            if (begin >= n) return;
            const std::size_t end = std::min(begin + chunk, n);
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace qcce::parallel
