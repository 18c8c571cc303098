#pragma once

#include <cstdint>
#include <vector>

#include "pixelnet/tensor.hpp"

namespace pixelnet {

// K x K counts, rows = ground truth, cols = prediction.
struct ConfusionMatrix {
    int k = 0;
    std::vector<std::int64_t> counts;

    explicit ConfusionMatrix(int k_classes = 0)
        : k(k_classes), counts(static_cast<std::size_t>(k_classes) * k_classes, 0) {}

    void add(int gt, int pred, std::int64_t n = 1) {
        counts[static_cast<std::size_t>(gt) * k + pred] += n;
    }
    std::int64_t at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * k + pred];
    }
    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    void merge(const ConfusionMatrix& o) {
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    }
};

ConfusionMatrix confusion_from_maps(const std::vector<int>& gt, const std::vector<int>& pred,
                                    int k);

// IU_k = tp/(tp+fp+fn), averaged over classes present in ground truth.
double mean_iu(const ConfusionMatrix& cm);
// Mean over present classes of tp/(tp+fn).
double pixel_accuracy(const ConfusionMatrix& cm);

// 51 evenly spaced thresholds in the open interval (0,1): i/(n+1).
std::vector<double> edge_threshold_grid(int n = 51);

struct EdgePrPoint {
    double threshold = 0.0;
    std::int64_t tp = 0, fp = 0, fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
    bool recall_defined = true;
};

struct EdgePrResult {
    std::vector<EdgePrPoint> curve;  // pooled over the whole evaluation set
    double best_f = 0.0;             // ODS analogue: one threshold for the set
    double best_threshold = 0.0;
    double per_image_best_f = 0.0;  // OIS analogue: mean of per-image best F
    bool any_positive = false;
};

// Per-pixel precision/recall over a set of probability maps; prediction at
// threshold t is prob >= t.
EdgePrResult edge_pr(const std::vector<std::vector<float>>& prob_maps,
                     const std::vector<std::vector<std::uint8_t>>& gt_maps,
                     const std::vector<double>& thresholds);

struct AngularStats {
    double mean_deg = 0.0;
    double median_deg = 0.0;  // lower middle element for even counts
    double rmse_deg = 0.0;
    double frac_11_25 = 0.0;
    double frac_22_5 = 0.0;
    double frac_30 = 0.0;
};

// Angular error arccos(clamp(<pred,gt>,-1,1)) in degrees over masked pixels;
// both inputs are [3,H,W] with unit-norm rows. Empty mask vector = all pixels.
AngularStats angular_stats(const Tensor<float>& pred, const Tensor<float>& gt,
                           const std::vector<std::uint8_t>& mask);

// Same statistics pooled over several images.
AngularStats angular_stats_pooled(const std::vector<Tensor<float>>& preds,
                                  const std::vector<Tensor<float>>& gts);

}  // namespace pixelnet
