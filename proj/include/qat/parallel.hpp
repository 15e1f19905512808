#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qat {

/// Process-wide worker count used by the parallel loops; 0 means hardware
/// concurrency.
inline std::atomic<int>& worker_count() {
    static std::atomic<int> n{0};
    return n;
}

inline int resolved_workers() {
    const int n = worker_count().load();
    if (n > 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs f(i) for i in [0, n). Each index is written by exactly one worker, so
/// results stored per index are deterministic regardless of thread count.
template <class F>
void parallel_for(int n, F&& f) {
    const int workers = std::min(resolved_workers(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace qat
