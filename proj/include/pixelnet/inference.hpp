#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pixelnet/image_ops.hpp"
#include "pixelnet/losses.hpp"
#include "pixelnet/model.hpp"

namespace pixelnet {

// Per-pixel outputs: class probabilities [K,H,W], edge probability [1,H,W],
// or unit normals [3,H,W].
template <typename T>
struct PredictionMap {
    Tensor<T> values;
    std::vector<double> scales = {1.0};
};

struct PredictOptions {
    std::int64_t memory_budget_bytes = 256ll << 20;
    int tile_pixels = 4096;  // sparse-path chunk when over budget
};

namespace detail {

// logits [N,K] -> task outputs written in place.
template <typename T>
void postprocess_rows(Tensor<T>& rows, Task task) {
    const int n = rows.dim(0), k = rows.dim(1);
    if (task == Task::multiclass) {
        Tensor<T> probs({n, k});
        softmax_rows(rows, probs);
        rows = std::move(probs);
    } else if (task == Task::binary_edge) {
        for (std::int64_t i = 0; i < rows.size(); ++i) rows[i] = sigmoid(rows[i]);
    } else {
        for (int i = 0; i < n; ++i) {
            T* r = rows.data() + static_cast<std::int64_t>(i) * k;
            const T nrm = std::max(static_cast<T>(std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])),
                                   static_cast<T>(1e-12));
            for (int j = 0; j < k; ++j) r[j] /= nrm;
        }
    }
}

// [N,K] rows in row-major pixel order -> [K,H,W]
template <typename T>
Tensor<T> rows_to_map(const Tensor<T>& rows, int h, int w) {
    const int k = rows.dim(1);
    Tensor<T> map({k, h, w});
    const std::int64_t pix = static_cast<std::int64_t>(h) * w;
    for (std::int64_t p = 0; p < pix; ++p) {
        for (int j = 0; j < k; ++j) map[j * pix + p] = rows.at(static_cast<int>(p), j);
    }
    return map;
}

}  // namespace detail

// Dense test-time path: dense hypercolumn grid when it fits the budget,
// otherwise the pixel grid is processed in tiles through the sparse path.
// Both paths run the identical per-pixel gather arithmetic, so the results
// agree bit for bit.
template <typename T>
PredictionMap<T> predict_dense(PixelNetModel<T>& model, const Tensor<T>& image,
                               const PredictOptions& options = {}) {
    if (image.ndim() != 3) throw ConfigError("predict_dense expects image[C,H,W]");
    const int h = image.dim(1), w = image.dim(2);
    const std::int64_t pix = static_cast<std::int64_t>(h) * w;
    const int d = model.config.hypercolumn_dim();
    const std::int64_t grid_bytes = static_cast<std::int64_t>(d) * pix * static_cast<std::int64_t>(sizeof(T));

    Tape<T> tape(false);
    auto bound = bind_model(tape, model);
    auto img = tape.constant(image, "image");
    auto pyramid = model_pyramid(tape, model, bound, img);
    Rng dummy(0);

    Tensor<T> rows;
    if (options.memory_budget_bytes <= 0 || grid_bytes <= options.memory_budget_bytes) {
        auto grid = dense_hypercolumn_grid(tape, pyramid);
        auto flat = reshape(tape, grid, {d, static_cast<int>(pix)});
        auto row_node = transpose2d(tape, flat);
        auto logits = model_head(tape, model, bound, row_node, false, dummy);
        rows = logits->value;
    } else {
        // tiled fallback via the sparse path
        rows = Tensor<T>({static_cast<int>(pix), model.head.config.output_dim});
        std::vector<PixelCoord> chunk;
        chunk.reserve(static_cast<std::size_t>(options.tile_pixels));
        std::int64_t written = 0;
        while (written < pix) {
            chunk.clear();
            const std::int64_t end = std::min<std::int64_t>(pix, written + options.tile_pixels);
            for (std::int64_t p = written; p < end; ++p) {
                chunk.push_back({static_cast<int>(p / w), static_cast<int>(p % w)});
            }
            auto hyper = extract_hypercolumns(tape, pyramid, chunk);
            auto logits = model_head(tape, model, bound, hyper.features, false, dummy);
            std::copy(logits->value.data(), logits->value.data() + logits->value.size(),
                      rows.data() + written * model.head.config.output_dim);
            written = end;
        }
    }

    detail::postprocess_rows(rows, model.head.config.task);
    PredictionMap<T> out;
    out.values = detail::rows_to_map(rows, h, w);
    out.scales = {1.0};
    return out;
}

// Test-time averaging over rescaled inputs: predict at each scale, resize the
// probability maps back to native resolution, average, renormalize. A saved
// {1.0} scale list short-circuits to the dense path so the two are identical.
template <typename T>
PredictionMap<T> predict_multiscale(PixelNetModel<T>& model, const Tensor<T>& image,
                                    const std::vector<double>& scales,
                                    const PredictOptions& options = {}) {
    if (scales.empty()) throw ConfigError("predict_multiscale needs at least one scale");
    for (double s : scales) {
        if (s <= 0.0) throw ConfigError("scales must be positive");
    }
    if (scales.size() == 1 && scales[0] == 1.0) {
        return predict_dense(model, image, options);
    }

    const int h = image.dim(1), w = image.dim(2);
    const int k = model.head.config.output_dim;
    Tensor<double> accum({k, h, w});
    for (double s : scales) {
        const int h2 = std::max(1, static_cast<int>(std::lround(h * s)));
        const int w2 = std::max(1, static_cast<int>(std::lround(w * s)));
        Tensor<T> scaled = resize_bilinear(image, h2, w2);
        PredictionMap<T> pred = predict_dense(model, scaled, options);
        Tensor<T> back = resize_bilinear(pred.values, h, w);
        for (std::int64_t i = 0; i < accum.size(); ++i) accum[i] += static_cast<double>(back[i]);
    }
    const double inv = 1.0 / static_cast<double>(scales.size());
    for (std::int64_t i = 0; i < accum.size(); ++i) accum[i] *= inv;

    // renormalize after averaging
    const std::int64_t pix = static_cast<std::int64_t>(h) * w;
    const Task task = model.head.config.task;
    if (task == Task::multiclass) {
        for (std::int64_t p = 0; p < pix; ++p) {
            double z = 0.0;
            for (int j = 0; j < k; ++j) z += accum[j * pix + p];
            if (z > 0.0) {
                for (int j = 0; j < k; ++j) accum[j * pix + p] /= z;
            }
        }
    } else if (task == Task::normals) {
        for (std::int64_t p = 0; p < pix; ++p) {
            double nrm = 0.0;
            for (int j = 0; j < k; ++j) nrm += accum[j * pix + p] * accum[j * pix + p];
            nrm = std::max(std::sqrt(nrm), 1e-12);
            for (int j = 0; j < k; ++j) accum[j * pix + p] /= nrm;
        }
    }

    PredictionMap<T> out;
    out.values = accum.template cast<T>();
    out.scales = scales;
    return out;
}

// Argmax class map with ties broken toward the lowest class index.
template <typename T>
std::vector<int> argmax_class_map(const Tensor<T>& probs) {
    const int k = probs.dim(0);
    const std::int64_t pix = static_cast<std::int64_t>(probs.dim(1)) * probs.dim(2);
    std::vector<int> cls(static_cast<std::size_t>(pix));
    for (std::int64_t p = 0; p < pix; ++p) {
        int best = 0;
        T bv = probs[p];
        for (int j = 1; j < k; ++j) {
            const T v = probs[j * pix + p];
            if (v > bv) {
                bv = v;
                best = j;
            }
        }
        cls[static_cast<std::size_t>(p)] = best;
    }
    return cls;
}

}  // namespace pixelnet
