#pragma once

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace speedscale {

/**
 * Run fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
 * concurrency).  Each index is processed exactly once; callers write results
 * into per-index slots so the merged output is independent of scheduling.
 * The first exception thrown by any worker is rethrown.
 */
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    if (threads > n) threads = n > 0 ? n : 1;
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (int i = t; i < n; i += threads) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace speedscale
