#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <vector>

namespace stablecap {

/// Evenly spaced grid over [lo, hi], endpoints included. A single-point
/// grid collapses to {lo}. Values are computed as lo + i*step so that the
/// same (lo, hi, n) always reproduces bit-identical points.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) throw std::invalid_argument("linspace: need at least one point");
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

/// Grid over [lo, hi) with a fixed step; hi itself is excluded.
/// Used for the interest-rate grid on [0, 1).
inline std::vector<double> step_grid(double lo, double hi, double step) {
    if (step <= 0.0) throw std::invalid_argument("step_grid: step must be > 0");
    std::vector<double> out;
    for (std::size_t i = 0;; ++i) {
        const double v = lo + step * static_cast<double>(i);
        if (v >= hi - 1e-15) break;
        out.push_back(v);
    }
    if (out.empty()) out.push_back(lo);
    return out;
}

inline std::size_t nearest_index(const std::vector<double>& grid, double value) {
    if (grid.empty()) throw std::invalid_argument("nearest_index: empty grid");
    std::size_t best = 0;
    double best_d = std::abs(grid[0] - value);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double d = std::abs(grid[i] - value);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// processed exactly once; fn must write only to its own slot so results
/// are identical to the sequential order.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    unsigned workers = std::min<unsigned>(threads == 0 ? hw : threads,
                                          static_cast<unsigned>(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace stablecap
