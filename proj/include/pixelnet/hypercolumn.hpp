#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pixelnet/parallel.hpp"
#include "pixelnet/pyramid.hpp"
#include "pixelnet/tape.hpp"

namespace pixelnet {

struct PixelCoord {
    int row = 0;
    int col = 0;
};

// Center-aligned mapping from input pixel coordinates to continuous
// feature-map coordinates. No clamping here; the gather clamps neighbors.
inline void map_pixel_to_feature(int p_row, int p_col, int stride, double& r, double& c) {
    r = (p_row + 0.5) / stride - 0.5;
    c = (p_col + 0.5) / stride - 0.5;
}

// Four clamped neighbor indices (flat into the H*W plane) and bilinear
// weights computed from the unclamped fractional parts.
template <typename T>
struct GatherPoint {
    std::int32_t idx[4];
    T w[4];
};

template <typename T>
GatherPoint<T> make_gather_point(double r, double c, int h, int w) {
    const double rf = std::floor(r);
    const double cf = std::floor(c);
    const double fr = r - rf;
    const double fc = c - cf;
    auto clampi = [](double v, int hi) {
        if (v < 0) return 0;
        if (v > hi) return hi;
        return static_cast<int>(v);
    };
    const int r0 = clampi(rf, h - 1), r1 = clampi(rf + 1, h - 1);
    const int c0 = clampi(cf, w - 1), c1 = clampi(cf + 1, w - 1);
    GatherPoint<T> g;
    g.idx[0] = static_cast<std::int32_t>(r0 * w + c0);
    g.idx[1] = static_cast<std::int32_t>(r0 * w + c1);
    g.idx[2] = static_cast<std::int32_t>(r1 * w + c0);
    g.idx[3] = static_cast<std::int32_t>(r1 * w + c1);
    g.w[0] = static_cast<T>((1.0 - fr) * (1.0 - fc));
    g.w[1] = static_cast<T>((1.0 - fr) * fc);
    g.w[2] = static_cast<T>(fr * (1.0 - fc));
    g.w[3] = static_cast<T>(fr * fc);
    return g;
}

template <typename T>
inline T gather_one(const T* plane, const GatherPoint<T>& g) {
    return g.w[0] * plane[g.idx[0]] + g.w[1] * plane[g.idx[1]] + g.w[2] * plane[g.idx[2]] +
           g.w[3] * plane[g.idx[3]];
}

// Interpolated feature column c_i(p) of one map at a continuous coordinate.
template <typename T>
std::vector<T> bilinear_gather(const Tensor<T>& map, double r, double c) {
    if (map.ndim() != 3 || map.size() == 0) {
        throw ConfigError("bilinear_gather expects a non-empty map[C,H,W]");
    }
    if (!std::isfinite(r) || !std::isfinite(c)) {
        throw ConfigError("bilinear_gather got a non-finite coordinate");
    }
    const int ch = map.dim(0), h = map.dim(1), w = map.dim(2);
    const auto g = make_gather_point<T>(r, c, h, w);
    std::vector<T> out(static_cast<std::size_t>(ch));
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (int k = 0; k < ch; ++k) out[static_cast<std::size_t>(k)] = gather_one(map.data() + k * plane, g);
    return out;
}

// Adjoint of the gather: adds w_k * upstream into the four source cells.
template <typename T>
void bilinear_scatter(Tensor<T>& grad_map, double r, double c, const T* upstream) {
    const int ch = grad_map.dim(0), h = grad_map.dim(1), w = grad_map.dim(2);
    const auto g = make_gather_point<T>(r, c, h, w);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (int k = 0; k < ch; ++k) {
        T* p = grad_map.data() + k * plane;
        for (int q = 0; q < 4; ++q) p[g.idx[q]] += g.w[q] * upstream[k];
    }
}

// Per-sample, per-layer source indices and weights recorded by the forward
// gather, reused verbatim by the backward scatter.
template <typename T>
struct Provenance {
    // provenance[layer][sample]
    std::vector<std::vector<GatherPoint<T>>> points;
};

template <typename T>
void scatter_gradients(const Tensor<T>& upstream,
                       const std::vector<typename FeaturePyramid<T>::Entry>& entries,
                       const Provenance<T>& prov, int n, int d);

template <typename T>
struct HypercolumnBatch {
    NodePtr<T> features;  // [N_samples, D]
    std::shared_ptr<Provenance<T>> provenance;
};

// The multi-scale sampling layer: maps each pixel into every tapped feature
// map and gathers its hypercolumn on demand. Row j is the concatenation over
// pyramid entries (shallow to deep) of the bilinear gather at pixel j.
template <typename T>
HypercolumnBatch<T> extract_hypercolumns(Tape<T>& tape, const FeaturePyramid<T>& pyramid,
                                         const std::vector<PixelCoord>& pixels) {
    if (pyramid.entries.empty()) throw ConfigError("extract_hypercolumns on an empty pyramid");
    const int n = static_cast<int>(pixels.size());
    for (int j = 0; j < n; ++j) {
        const auto& p = pixels[static_cast<std::size_t>(j)];
        if (p.row < 0 || p.row >= pyramid.input_h || p.col < 0 || p.col >= pyramid.input_w) {
            throw DataError("pixel " + std::to_string(j) + " at (" + std::to_string(p.row) + "," +
                            std::to_string(p.col) + ") outside image " +
                            std::to_string(pyramid.input_h) + "x" + std::to_string(pyramid.input_w));
        }
    }
    const int d = pyramid.total_dim();

    auto prov = std::make_shared<Provenance<T>>();
    prov->points.resize(pyramid.entries.size());
    bool ng = false;

    Tensor<T> feats({n, d});
    int offset = 0;
    for (std::size_t li = 0; li < pyramid.entries.size(); ++li) {
        const auto& entry = pyramid.entries[li];
        const Tensor<T>& map = entry.features->value;
        const int ch = map.dim(0), h = map.dim(1), w = map.dim(2);
        const std::int64_t plane = static_cast<std::int64_t>(h) * w;
        auto& pts = prov->points[li];
        pts.resize(static_cast<std::size_t>(n));
        ng = ng || entry.features->needs_grad;

        parallel_for(n, [&](std::int64_t j0, std::int64_t j1) {
            for (std::int64_t j = j0; j < j1; ++j) {
                double r, c;
                map_pixel_to_feature(pixels[static_cast<std::size_t>(j)].row,
                                     pixels[static_cast<std::size_t>(j)].col, entry.stride, r, c);
                const auto g = make_gather_point<T>(r, c, h, w);
                pts[static_cast<std::size_t>(j)] = g;
                T* row = feats.data() + j * d + offset;
                for (int k = 0; k < ch; ++k) row[k] = gather_one(map.data() + k * plane, g);
            }
        });
        offset += ch;
    }

    HypercolumnBatch<T> batch;
    batch.features = tape.output(std::move(feats), ng, "hypercolumn_batch");
    batch.provenance = prov;

    if (batch.features->needs_grad) {
        auto out = batch.features;
        auto entries = pyramid.entries;
        tape.record([out, entries, prov, n, d] {
            scatter_gradients<T>(out->grad, entries, *prov, n, d);
        });
    }
    return batch;
}

// Backward of the sampling layer: each sample adds w_k * upstream into its 4
// source locations of every tapped map; contributions accumulate across
// samples in sample order.
template <typename T>
void scatter_gradients(const Tensor<T>& upstream,
                       const std::vector<typename FeaturePyramid<T>::Entry>& entries,
                       const Provenance<T>& prov, int n, int d) {
    if (upstream.dim(0) != n || upstream.dim(1) != d) {
        throw InternalError("scatter_gradients upstream " + upstream.shape_string() +
                            " does not match provenance for " + std::to_string(n) + " samples");
    }
    // Each layer owns a disjoint gradient map, so layers scatter in parallel;
    // within a layer, samples accumulate in a fixed order.
    std::vector<int> offsets(entries.size());
    int off = 0;
    for (std::size_t li = 0; li < entries.size(); ++li) {
        offsets[li] = off;
        off += entries[li].features->value.dim(0);
    }
    parallel_for(static_cast<std::int64_t>(entries.size()), [&](std::int64_t l0, std::int64_t l1) {
        for (std::int64_t li = l0; li < l1; ++li) {
            const auto& entry = entries[static_cast<std::size_t>(li)];
            if (!entry.features->needs_grad) continue;
            Tensor<T>& gmap = entry.features->grad;
            const int ch = gmap.dim(0);
            const std::int64_t plane = static_cast<std::int64_t>(gmap.dim(1)) * gmap.dim(2);
            const auto& pts = prov.points[static_cast<std::size_t>(li)];
            for (int j = 0; j < n; ++j) {
                const auto& g = pts[static_cast<std::size_t>(j)];
                const T* up = upstream.data() + static_cast<std::int64_t>(j) * d + offsets[static_cast<std::size_t>(li)];
                for (int k = 0; k < ch; ++k) {
                    T* p = gmap.data() + k * plane;
                    for (int q = 0; q < 4; ++q) p[g.idx[q]] += g.w[q] * up[k];
                }
            }
        }
    });
}

// Dense reference path: every tapped map bilinearly upsampled to the input
// resolution under the same coordinate convention and concatenated
// channel-wise into [D,H,W]. Uses the identical per-pixel gather arithmetic
// as the sparse path, which is what makes the two paths bit-comparable.
template <typename T>
NodePtr<T> dense_hypercolumn_grid(Tape<T>& tape, const FeaturePyramid<T>& pyramid,
                                  std::int64_t budget_bytes = 0) {
    if (pyramid.entries.empty()) throw ConfigError("dense_hypercolumn_grid on an empty pyramid");
    const int h = pyramid.input_h, w = pyramid.input_w;
    const int d = pyramid.total_dim();
    const std::int64_t bytes = static_cast<std::int64_t>(d) * h * w * static_cast<std::int64_t>(sizeof(T));
    if (budget_bytes > 0 && bytes > budget_bytes) {
        throw ResourceError("dense hypercolumn grid needs " + std::to_string(bytes) +
                            " bytes, over the " + std::to_string(budget_bytes) +
                            " byte budget; use the sparse path");
    }

    Tensor<T> grid({d, h, w});
    const std::int64_t pix = static_cast<std::int64_t>(h) * w;
    bool ng = false;
    int offset = 0;
    for (const auto& entry : pyramid.entries) {
        const Tensor<T>& map = entry.features->value;
        const int ch = map.dim(0), mh = map.dim(1), mw = map.dim(2);
        const std::int64_t plane = static_cast<std::int64_t>(mh) * mw;
        ng = ng || entry.features->needs_grad;
        parallel_for(h, [&](std::int64_t y0, std::int64_t y1) {
            for (std::int64_t y = y0; y < y1; ++y) {
                for (int x = 0; x < w; ++x) {
                    double r, c;
                    map_pixel_to_feature(static_cast<int>(y), x, entry.stride, r, c);
                    const auto g = make_gather_point<T>(r, c, mh, mw);
                    const std::int64_t o = y * w + x;
                    for (int k = 0; k < ch; ++k) {
                        grid[(offset + k) * pix + o] = gather_one(map.data() + k * plane, g);
                    }
                }
            }
        });
        offset += ch;
    }

    auto out = tape.output(std::move(grid), ng, "dense_hypercolumn_grid");
    if (out->needs_grad) {
        auto entries = pyramid.entries;
        tape.record([out, entries, h, w, pix] {
            int off2 = 0;
            for (const auto& entry : entries) {
                const int ch = entry.features->value.dim(0);
                if (entry.features->needs_grad) {
                    Tensor<T>& gmap = entry.features->grad;
                    const int mh = gmap.dim(1), mw = gmap.dim(2);
                    const std::int64_t plane = static_cast<std::int64_t>(mh) * mw;
                    for (int y = 0; y < h; ++y) {
                        for (int x = 0; x < w; ++x) {
                            double r, c;
                            map_pixel_to_feature(y, x, entry.stride, r, c);
                            const auto g = make_gather_point<T>(r, c, mh, mw);
                            const std::int64_t o = static_cast<std::int64_t>(y) * w + x;
                            for (int k = 0; k < ch; ++k) {
                                T* p = gmap.data() + k * plane;
                                const T up = out->grad[(off2 + k) * pix + o];
                                for (int q = 0; q < 4; ++q) p[g.idx[q]] += g.w[q] * up;
                            }
                        }
                    }
                }
                off2 += ch;
            }
        });
    }
    return out;
}

}  // namespace pixelnet
