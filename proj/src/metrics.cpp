#include "pixelnet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "pixelnet/errors.hpp"

namespace pixelnet {

ConfusionMatrix confusion_from_maps(const std::vector<int>& gt, const std::vector<int>& pred,
                                    int k) {
    if (gt.size() != pred.size()) throw ConfigError("confusion matrix input size mismatch");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] < 0 || gt[i] >= k || pred[i] < 0 || pred[i] >= k) {
            throw DataError("class index out of range at pixel " + std::to_string(i));
        }
        cm.add(gt[i], pred[i]);
    }
    return cm;
}

double mean_iu(const ConfusionMatrix& cm) {
    if (cm.k < 2) throw ConfigError("mean_iu needs K >= 2");
    if (cm.total() == 0) throw DataError("mean_iu on an empty confusion matrix");
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < cm.k; ++c) {
        std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < cm.k; ++o) {
            if (o != c) {
                fp += cm.at(o, c);
                fn += cm.at(c, o);
            }
        }
        if (tp + fn == 0) continue;  // class absent from ground truth
        ++present;
        sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
    return present ? sum / present : 0.0;
}

double pixel_accuracy(const ConfusionMatrix& cm) {
    if (cm.k < 2) throw ConfigError("pixel_accuracy needs K >= 2");
    if (cm.total() == 0) throw DataError("pixel_accuracy on an empty confusion matrix");
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < cm.k; ++c) {
        std::int64_t tp = cm.at(c, c), row = 0;
        for (int o = 0; o < cm.k; ++o) row += cm.at(c, o);
        if (row == 0) continue;
        ++present;
        sum += static_cast<double>(tp) / static_cast<double>(row);
    }
    return present ? sum / present : 0.0;
}

std::vector<double> edge_threshold_grid(int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) t[static_cast<std::size_t>(i - 1)] = static_cast<double>(i) / (n + 1);
    return t;
}

namespace {

void check_thresholds(const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw ConfigError("edge_pr needs at least one threshold");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (thresholds[i] <= 0.0 || thresholds[i] >= 1.0) {
            throw ConfigError("edge thresholds must lie in (0,1)");
        }
        if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
            throw ConfigError("edge thresholds must be ascending");
        }
    }
}

double f_measure(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

EdgePrResult edge_pr(const std::vector<std::vector<float>>& prob_maps,
                     const std::vector<std::vector<std::uint8_t>>& gt_maps,
                     const std::vector<double>& thresholds) {
    check_thresholds(thresholds);
    if (prob_maps.size() != gt_maps.size() || prob_maps.empty()) {
        throw ConfigError("edge_pr needs matching, non-empty map lists");
    }
    const std::size_t nt = thresholds.size();

    EdgePrResult result;
    result.curve.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) result.curve[t].threshold = thresholds[t];

    double ois_sum = 0.0;
    int ois_count = 0;
    for (std::size_t img = 0; img < prob_maps.size(); ++img) {
        const auto& prob = prob_maps[img];
        const auto& gt = gt_maps[img];
        if (prob.size() != gt.size()) throw ConfigError("edge_pr map size mismatch");
        std::vector<std::int64_t> tp(nt, 0), fp(nt, 0), fn(nt, 0);
        std::int64_t npos = 0;
        for (std::size_t i = 0; i < prob.size(); ++i) {
            const bool g = gt[i] != 0;
            npos += g;
            for (std::size_t t = 0; t < nt; ++t) {
                const bool p = prob[i] >= thresholds[t];
                if (p && g) {
                    ++tp[t];
                } else if (p) {
                    ++fp[t];
                } else if (g) {
                    ++fn[t];
                }
            }
        }
        double img_best = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
            result.curve[t].tp += tp[t];
            result.curve[t].fp += fp[t];
            result.curve[t].fn += fn[t];
            if (npos > 0) {
                const double p = (tp[t] + fp[t]) > 0
                                     ? static_cast<double>(tp[t]) / (tp[t] + fp[t])
                                     : 0.0;
                const double r = static_cast<double>(tp[t]) / npos;
                img_best = std::max(img_best, f_measure(p, r));
            }
        }
        if (npos > 0) {
            result.any_positive = true;
            ois_sum += img_best;
            ++ois_count;
        }
    }
    result.per_image_best_f = ois_count ? ois_sum / ois_count : 0.0;

    for (std::size_t t = 0; t < nt; ++t) {
        EdgePrPoint& pt = result.curve[t];
        pt.precision = (pt.tp + pt.fp) > 0 ? static_cast<double>(pt.tp) / (pt.tp + pt.fp) : 0.0;
        if (pt.tp + pt.fn > 0) {
            pt.recall = static_cast<double>(pt.tp) / (pt.tp + pt.fn);
            pt.recall_defined = true;
        } else {
            pt.recall = 0.0;
            pt.recall_defined = false;  // no positive ground truth anywhere
        }
        pt.f = pt.recall_defined ? f_measure(pt.precision, pt.recall) : 0.0;
    }
    // ties keep the lowest threshold
    double best = -1.0;
    for (const EdgePrPoint& pt : result.curve) {
        if (pt.f > best) {
            best = pt.f;
            result.best_threshold = pt.threshold;
        }
    }
    result.best_f = best;
    return result;
}

namespace {

void collect_angular_errors(const Tensor<float>& pred, const Tensor<float>& gt,
                            const std::vector<std::uint8_t>& mask, std::vector<double>& errors) {
    if (pred.ndim() != 3 || pred.dim(0) != 3 || !pred.same_shape(gt)) {
        throw ConfigError("angular_stats expects matching [3,H,W] tensors");
    }
    const std::int64_t n = static_cast<std::int64_t>(pred.dim(1)) * pred.dim(2);
    if (!mask.empty() && static_cast<std::int64_t>(mask.size()) != n) {
        throw ConfigError("angular_stats mask size mismatch");
    }
    const float* px = pred.data();
    const float* py = pred.data() + n;
    const float* pz = pred.data() + 2 * n;
    const float* gx = gt.data();
    const float* gy = gt.data() + n;
    const float* gz = gt.data() + 2 * n;
    for (std::int64_t i = 0; i < n; ++i) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(i)]) continue;
        double dot = static_cast<double>(px[i]) * gx[i] + static_cast<double>(py[i]) * gy[i] +
                     static_cast<double>(pz[i]) * gz[i];
        dot = std::clamp(dot, -1.0, 1.0);
        errors.push_back(std::acos(dot) * 180.0 / 3.14159265358979323846);
    }
}

AngularStats stats_from_errors(std::vector<double>& errors) {
    if (errors.empty()) throw DataError("angular_stats: empty evaluation mask");
    AngularStats s;
    double sum = 0.0, sumsq = 0.0;
    std::int64_t c11 = 0, c22 = 0, c30 = 0;
    for (double e : errors) {
        sum += e;
        sumsq += e * e;
        c11 += e < 11.25;
        c22 += e < 22.5;
        c30 += e < 30.0;
    }
    const double cnt = static_cast<double>(errors.size());
    s.mean_deg = sum / cnt;
    s.rmse_deg = std::sqrt(sumsq / cnt);
    s.frac_11_25 = c11 / cnt;
    s.frac_22_5 = c22 / cnt;
    s.frac_30 = c30 / cnt;
    std::vector<double> sorted(errors);
    std::sort(sorted.begin(), sorted.end());
    s.median_deg = sorted[(sorted.size() - 1) / 2];
    return s;
}

}  // namespace

AngularStats angular_stats(const Tensor<float>& pred, const Tensor<float>& gt,
                           const std::vector<std::uint8_t>& mask) {
    std::vector<double> errors;
    collect_angular_errors(pred, gt, mask, errors);
    return stats_from_errors(errors);
}

AngularStats angular_stats_pooled(const std::vector<Tensor<float>>& preds,
                                  const std::vector<Tensor<float>>& gts) {
    if (preds.size() != gts.size() || preds.empty()) {
        throw ConfigError("angular_stats_pooled needs matching, non-empty lists");
    }
    std::vector<double> errors;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        collect_angular_errors(preds[i], gts[i], {}, errors);
    }
    return stats_from_errors(errors);
}

}  // namespace pixelnet
