#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pixelnet {

// Thread cap: PIXELNET_THREADS env var, else hardware concurrency.
inline int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("PIXELNET_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return cached;
}

// Splits [0, n) into contiguous chunks, one per worker. Each index is
// processed exactly once with a fixed per-index evaluation order, so results
// are bit-identical for any thread count. f(begin, end) must only write to
// state owned by its index range.
template <typename F>
void parallel_for(std::int64_t n, F&& f) {
    if (n <= 0) return;
    int nt = std::min<std::int64_t>(max_threads(), n);
    if (nt <= 1) {
        f(std::int64_t{0}, n);
        return;
    }
    std::int64_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> workers;
    workers.reserve(nt - 1);
    for (int t = 1; t < nt; ++t) {
        std::int64_t b = t * chunk;
        std::int64_t e = std::min<std::int64_t>(n, b + chunk);
        if (b >= e) break;
        workers.emplace_back([&f, b, e] { f(b, e); });
    }
    f(std::int64_t{0}, std::min<std::int64_t>(n, chunk));
    for (auto& w : workers) w.join();
}

}  // namespace pixelnet
