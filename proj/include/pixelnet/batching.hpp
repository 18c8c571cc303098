#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pixelnet/head.hpp"
#include "pixelnet/hypercolumn.hpp"
#include "pixelnet/rng.hpp"
#include "pixelnet/scene.hpp"

namespace pixelnet {

enum class SamplingStrategy { uniform, biased };

// N x M mini-batch plan: N pixels sampled from each of M images per step.
struct BatchPlan {
    int images_per_batch = 5;   // M
    int pixels_per_image = 2000;  // N
    SamplingStrategy strategy = SamplingStrategy::uniform;
    double positive_fraction = 0.5;       // biased strategy only
    std::vector<double> scale_jitter = {1.0};
    std::uint64_t seed = 0;

    int samples_per_step() const { return images_per_batch * pixels_per_image; }
};

// Sampled pixel coordinates for one image, with the labels looked up at
// those coordinates (post-rescale) and unit sample weights.
struct PixelSampleSet {
    int image_id = 0;
    std::vector<PixelCoord> coords;
    std::vector<int> class_labels;
    std::vector<std::uint8_t> edge_labels;
    std::vector<std::array<float, 3>> normal_labels;
    std::vector<float> weights;
};

// N distinct positions, uniform without replacement.
PixelSampleSet sample_uniform(int h, int w, int n, Rng& rng);

// round(N * positive_fraction) positives and the remainder negatives, each
// class uniform; a class pool smaller than its quota is sampled with
// replacement. An image with zero positives (and fraction > 0) falls back to
// uniform sampling; *fell_back reports it so the caller can log.
PixelSampleSet sample_biased(const std::vector<std::uint8_t>& binary_map, int h, int w, int n,
                             double positive_fraction, Rng& rng, bool* fell_back = nullptr);

// One image of a training step: the (possibly rescaled) input and its sample
// set with labels attached.
struct BatchItem {
    int image_index = 0;
    double scale = 1.0;
    Tensor<float> image;
    PixelSampleSet samples;
};

// Draws labels for already-sampled coordinates from (possibly rescaled) maps.
void attach_labels(PixelSampleSet& set, Task task, const std::vector<int>& class_map,
                   const std::vector<std::uint8_t>& edge_map, const Tensor<float>& normal_map,
                   int h, int w);

// Builds the M-image mini-batch for one step: optional per-image scale
// jitter, then pixel sampling, then label lookup on the rescaled grid.
std::vector<BatchItem> build_batch(const Dataset& data, const std::vector<int>& image_indices,
                                   const BatchPlan& plan, Task task, Rng& rng,
                                   int* biased_fallbacks = nullptr);

// Epoch-scoped image order: a seeded permutation of the dataset, handed out
// M at a time; every image appears exactly once per epoch.
class EpochSampler {
  public:
    EpochSampler(int dataset_size, int images_per_batch, Rng rng);
    int steps_per_epoch() const;
    // Image indices for step s in [0, steps_per_epoch).
    std::vector<int> batch_indices(int step) const;

  private:
    std::vector<int> order_;
    int m_;
};

}  // namespace pixelnet
