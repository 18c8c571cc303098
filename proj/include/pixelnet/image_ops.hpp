#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pixelnet/hypercolumn.hpp"
#include "pixelnet/tensor.hpp"

namespace pixelnet {

// Bilinear resize of [C,H,W] under the same center-aligned convention as the
// sampling layer: destination pixel (y,x) reads source ((y+0.5)*H/H2 - 0.5, ...).
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& src, int h2, int w2) {
    if (src.ndim() != 3) throw ConfigError("resize_bilinear expects [C,H,W]");
    const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
    if (h2 < 1 || w2 < 1) throw ConfigError("resize_bilinear target must be positive");
    if (h2 == h && w2 == w) return src;
    Tensor<T> dst({c, h2, w2});
    const double sy = static_cast<double>(h) / h2;
    const double sx = static_cast<double>(w) / w2;
    const std::int64_t splane = static_cast<std::int64_t>(h) * w;
    for (int y = 0; y < h2; ++y) {
        const double r = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < w2; ++x) {
            const double cc = (x + 0.5) * sx - 0.5;
            const auto g = make_gather_point<T>(r, cc, h, w);
            for (int k = 0; k < c; ++k) {
                dst.at(k, y, x) = gather_one(src.data() + k * splane, g);
            }
        }
    }
    return dst;
}

// Nearest-neighbor resize for categorical/binary label maps.
template <typename L>
std::vector<L> resize_nearest(const std::vector<L>& src, int h, int w, int h2, int w2) {
    if (static_cast<std::int64_t>(src.size()) != static_cast<std::int64_t>(h) * w) {
        throw ConfigError("resize_nearest size mismatch");
    }
    if (h2 == h && w2 == w) return src;
    std::vector<L> dst(static_cast<std::size_t>(h2) * w2);
    const double sy = static_cast<double>(h) / h2;
    const double sx = static_cast<double>(w) / w2;
    for (int y = 0; y < h2; ++y) {
        int iy = static_cast<int>(std::floor((y + 0.5) * sy));
        iy = std::clamp(iy, 0, h - 1);
        for (int x = 0; x < w2; ++x) {
            int ix = static_cast<int>(std::floor((x + 0.5) * sx));
            ix = std::clamp(ix, 0, w - 1);
            dst[static_cast<std::size_t>(y) * w2 + x] = src[static_cast<std::size_t>(iy) * w + ix];
        }
    }
    return dst;
}

}  // namespace pixelnet
