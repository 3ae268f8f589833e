#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace fvr {

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested != 0) return requested;
    std::size_t hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [begin, end) on up to `threads` workers (0 = hardware
/// concurrency). Static blocked partition; the first exception thrown by any
/// worker is rethrown after all join. Callers get deterministic results by
/// writing to per-index slots.
inline void parallel_for(std::size_t begin, std::size_t end, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
    const std::size_t n = end > begin ? end - begin : 0;
    std::size_t workers = resolve_threads(threads);
    if (workers > n) workers = n;
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }

    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = lo + chunk < end ? lo + chunk : end;
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace fvr
