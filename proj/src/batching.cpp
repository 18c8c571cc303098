#include "pixelnet/batching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pixelnet/image_ops.hpp"

namespace pixelnet {

namespace {

// Partial Fisher-Yates: first n entries of a shuffled [0, pool) range.
std::vector<int> draw_without_replacement(int pool, int n, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(pool));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) {
        const int j = i + rng.uniform_int(pool - i);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(n));
    return idx;
}

PixelCoord coord_of(int flat, int w) { return {flat / w, flat % w}; }

}  // namespace

PixelSampleSet sample_uniform(int h, int w, int n, Rng& rng) {
    const std::int64_t total = static_cast<std::int64_t>(h) * w;
    if (n < 1) throw ConfigError("sample_uniform needs n >= 1");
    if (n > total) {
        throw ConfigError("cannot sample " + std::to_string(n) + " distinct pixels from " +
                          std::to_string(total));
    }
    PixelSampleSet set;
    set.coords.reserve(static_cast<std::size_t>(n));
    for (int flat : draw_without_replacement(static_cast<int>(total), n, rng)) {
        set.coords.push_back(coord_of(flat, w));
    }
    set.weights.assign(static_cast<std::size_t>(n), 1.0f);
    return set;
}

PixelSampleSet sample_biased(const std::vector<std::uint8_t>& binary_map, int h, int w, int n,
                             double positive_fraction, Rng& rng, bool* fell_back) {
    if (fell_back) *fell_back = false;
    if (n < 2) throw ConfigError("sample_biased needs n >= 2");
    if (positive_fraction < 0.0 || positive_fraction > 1.0) {
        throw ConfigError("positive_fraction must be in [0,1]");
    }
    if (static_cast<std::int64_t>(binary_map.size()) != static_cast<std::int64_t>(h) * w) {
        throw ConfigError("sample_biased label map size mismatch");
    }

    std::vector<int> pos, neg;
    for (int i = 0; i < static_cast<int>(binary_map.size()); ++i) {
        (binary_map[static_cast<std::size_t>(i)] ? pos : neg).push_back(i);
    }
    if (pos.empty() && positive_fraction > 0.0) {
        if (fell_back) *fell_back = true;
        return sample_uniform(h, w, n, rng);
    }

    const int want_pos = static_cast<int>(std::lround(n * positive_fraction));
    const int want_neg = n - want_pos;

    PixelSampleSet set;
    set.coords.reserve(static_cast<std::size_t>(n));
    auto draw_class = [&](const std::vector<int>& pool, int quota) {
        if (quota == 0) return;
        if (quota <= static_cast<int>(pool.size())) {
            for (int k : draw_without_replacement(static_cast<int>(pool.size()), quota, rng)) {
                set.coords.push_back(coord_of(pool[static_cast<std::size_t>(k)], w));
            }
        } else {
            // pool smaller than quota: with replacement to preserve the mix
            for (int i = 0; i < quota; ++i) {
                set.coords.push_back(
                    coord_of(pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))], w));
            }
        }
    };
    draw_class(pos, want_pos);
    draw_class(neg, want_neg);
    set.weights.assign(static_cast<std::size_t>(n), 1.0f);
    return set;
}

void attach_labels(PixelSampleSet& set, Task task, const std::vector<int>& class_map,
                   const std::vector<std::uint8_t>& edge_map, const Tensor<float>& normal_map,
                   int h, int w) {
    const std::size_t n = set.coords.size();
    if (task == Task::multiclass) {
        set.class_labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            set.class_labels[i] = class_map[static_cast<std::size_t>(set.coords[i].row) * w + set.coords[i].col];
        }
    } else if (task == Task::binary_edge) {
        set.edge_labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            set.edge_labels[i] = edge_map[static_cast<std::size_t>(set.coords[i].row) * w + set.coords[i].col];
        }
    } else {
        set.normal_labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int y = set.coords[i].row, x = set.coords[i].col;
            set.normal_labels[i] = {normal_map.at(0, y, x), normal_map.at(1, y, x),
                                    normal_map.at(2, y, x)};
        }
    }
    (void)h;
}

std::vector<BatchItem> build_batch(const Dataset& data, const std::vector<int>& image_indices,
                                   const BatchPlan& plan, Task task, Rng& rng,
                                   int* biased_fallbacks) {
    if (plan.scale_jitter.empty()) throw ConfigError("scale_jitter must not be empty");
    if (biased_fallbacks) *biased_fallbacks = 0;
    std::vector<BatchItem> batch;
    batch.reserve(image_indices.size());
    for (int idx : image_indices) {
        const SyntheticScene& scene = data.scenes[static_cast<std::size_t>(idx)];
        BatchItem item;
        item.image_index = idx;
        item.scale = plan.scale_jitter[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(plan.scale_jitter.size())))];

        int h = scene.h, w = scene.w;
        const std::vector<int>* class_map = &scene.class_map;
        const std::vector<std::uint8_t>* edge_map = &scene.edge_map;
        const Tensor<float>* normal_map = &scene.normal_map;
        std::vector<int> scaled_class;
        std::vector<std::uint8_t> scaled_edge;
        Tensor<float> scaled_normals;
        if (item.scale != 1.0) {
            const int h2 = std::max(1, static_cast<int>(std::lround(scene.h * item.scale)));
            const int w2 = std::max(1, static_cast<int>(std::lround(scene.w * item.scale)));
            item.image = resize_bilinear(scene.image, h2, w2);
            scaled_class = resize_nearest(scene.class_map, scene.h, scene.w, h2, w2);
            scaled_edge = resize_nearest(scene.edge_map, scene.h, scene.w, h2, w2);
            if (task == Task::normals) {
                // nearest keeps normals exactly unit
                scaled_normals = Tensor<float>({3, h2, w2});
                for (int y = 0; y < h2; ++y) {
                    int iy = std::clamp(static_cast<int>(std::floor((y + 0.5) * scene.h / static_cast<double>(h2))), 0, scene.h - 1);
                    for (int x = 0; x < w2; ++x) {
                        int ix = std::clamp(static_cast<int>(std::floor((x + 0.5) * scene.w / static_cast<double>(w2))), 0, scene.w - 1);
                        for (int c = 0; c < 3; ++c) scaled_normals.at(c, y, x) = scene.normal_map.at(c, iy, ix);
                    }
                }
                normal_map = &scaled_normals;
            }
            class_map = &scaled_class;
            edge_map = &scaled_edge;
            h = h2;
            w = w2;
        } else {
            item.image = scene.image;
        }

        if (plan.strategy == SamplingStrategy::uniform || task != Task::binary_edge) {
            item.samples = sample_uniform(h, w, plan.pixels_per_image, rng);
        } else {
            bool fell_back = false;
            item.samples = sample_biased(*edge_map, h, w, plan.pixels_per_image,
                                         plan.positive_fraction, rng, &fell_back);
            if (fell_back && biased_fallbacks) ++*biased_fallbacks;
        }
        item.samples.image_id = idx;
        attach_labels(item.samples, task, *class_map, *edge_map, *normal_map, h, w);
        batch.push_back(std::move(item));
    }
    return batch;
}

EpochSampler::EpochSampler(int dataset_size, int images_per_batch, Rng rng)
    : order_(static_cast<std::size_t>(dataset_size)), m_(images_per_batch) {
    if (dataset_size < images_per_batch) {
        throw ConfigError("dataset of " + std::to_string(dataset_size) +
                          " images is smaller than the batch of " + std::to_string(images_per_batch));
    }
    std::iota(order_.begin(), order_.end(), 0);
    for (std::size_t i = order_.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
        std::swap(order_[i - 1], order_[j]);
    }
}

int EpochSampler::steps_per_epoch() const {
    return static_cast<int>((order_.size() + m_ - 1) / m_);
}

std::vector<int> EpochSampler::batch_indices(int step) const {
    const std::size_t b = static_cast<std::size_t>(step) * m_;
    const std::size_t e = std::min(order_.size(), b + m_);
    if (b >= order_.size()) throw InternalError("batch step out of range");
    return std::vector<int>(order_.begin() + static_cast<std::ptrdiff_t>(b),
                            order_.begin() + static_cast<std::ptrdiff_t>(e));
}

}  // namespace pixelnet
