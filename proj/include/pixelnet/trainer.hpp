#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pixelnet/batching.hpp"
#include "pixelnet/losses.hpp"
#include "pixelnet/model.hpp"

namespace pixelnet {

// Piecewise-constant learning-rate schedule keyed by epoch.
struct LrSchedule {
    std::vector<std::pair<int, double>> points;  // (epoch, lr), epochs ascending

    void validate() const {
        if (points.empty()) throw ConfigError("empty learning-rate schedule");
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i].first <= points[i - 1].first) {
                throw ConfigError("schedule epochs must be ascending");
            }
        }
    }
};

inline double lr_at(const LrSchedule& schedule, int epoch) {
    schedule.validate();
    double lr = schedule.points.front().second;
    for (const auto& [e, v] : schedule.points) {
        if (epoch >= e) lr = v;
    }
    return lr;
}

template <typename T>
struct OptimizerState {
    LrSchedule schedule;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int step = 0;
    int epoch = 0;
    std::map<std::string, Tensor<T>> velocity;  // shapes mirror the parameters

    double current_lr() const { return lr_at(schedule, epoch); }
};

template <typename T>
OptimizerState<T> make_optimizer(PixelNetModel<T>& model, LrSchedule schedule, double momentum,
                                 double weight_decay) {
    OptimizerState<T> opt;
    opt.schedule = std::move(schedule);
    opt.schedule.validate();
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    for (const auto& ref : param_refs(model)) {
        opt.velocity.emplace(ref.name, Tensor<T>(ref.tensor->shape()));
    }
    return opt;
}

// v <- momentum*v - lr*(g + weight_decay*theta); theta <- theta + v.
// Weight decay applies to weights only (ParamRef::decay).
template <typename T>
void sgd_step(std::vector<ParamRef<T>>& params, const std::vector<NodePtr<T>>& bound,
              OptimizerState<T>& opt) {
    const T lr = static_cast<T>(opt.current_lr());
    const T mom = static_cast<T>(opt.momentum);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor<T>& g = bound[i]->grad;
        for (std::int64_t j = 0; j < g.size(); ++j) {
            if (!std::isfinite(g[j])) {
                throw InternalError("non-finite gradient in " + params[i].name + " at step " +
                                    std::to_string(opt.step));
            }
        }
        const T wd = params[i].decay ? static_cast<T>(opt.weight_decay) : T(0);
        Tensor<T>& v = opt.velocity.at(params[i].name);
        Tensor<T>& theta = *params[i].tensor;
        for (std::int64_t j = 0; j < g.size(); ++j) {
            v[j] = mom * v[j] - lr * (g[j] + wd * theta[j]);
            theta[j] += v[j];
        }
    }
    ++opt.step;
}

// A training batch converted to the model dtype.
template <typename T>
struct StepBatch {
    std::vector<Tensor<T>> images;
    std::vector<PixelSampleSet> samples;

    int total_samples() const {
        int n = 0;
        for (const auto& s : samples) n += static_cast<int>(s.coords.size());
        return n;
    }
};

template <typename T>
StepBatch<T> to_step_batch(const std::vector<BatchItem>& batch) {
    StepBatch<T> sb;
    for (const auto& item : batch) {
        if constexpr (std::is_same_v<T, float>) {
            sb.images.push_back(item.image);
        } else {
            sb.images.push_back(item.image.template cast<T>());
        }
        sb.samples.push_back(item.samples);
    }
    return sb;
}

template <typename T>
struct ForwardResult {
    NodePtr<T> loss;
    BoundModel<T> bound;
    std::vector<NodePtr<T>> image_nodes;
    std::int64_t hypercolumn_bytes = 0;  // bytes of the sampled feature matrix
};

// Shared step graph: per-image pyramid, sparse hypercolumn gather, row
// concatenation across images, MLP head, task loss.
template <typename T>
ForwardResult<T> forward_loss(Tape<T>& tape, PixelNetModel<T>& model, const StepBatch<T>& batch,
                              bool train_mode, Rng& dropout_rng, bool image_grads = false) {
    if (batch.images.empty()) throw ConfigError("empty batch");
    ForwardResult<T> result;
    result.bound = bind_model(tape, model);

    std::vector<NodePtr<T>> rows;
    for (std::size_t i = 0; i < batch.images.size(); ++i) {
        NodePtr<T> img = image_grads ? tape.leaf(batch.images[i], "image")
                                     : tape.constant(batch.images[i], "image");
        result.image_nodes.push_back(img);
        auto pyramid = model_pyramid(tape, model, result.bound, img);
        auto hyper = extract_hypercolumns(tape, pyramid, batch.samples[i].coords);
        result.hypercolumn_bytes += hyper.features->value.bytes();
        rows.push_back(hyper.features);
    }
    NodePtr<T> all_rows = rows.size() == 1 ? rows[0] : concat_rows(tape, rows);
    NodePtr<T> logits = model_head(tape, model, result.bound, all_rows, train_mode, dropout_rng);

    const Task task = model.head.config.task;
    if (task == Task::multiclass) {
        std::vector<int> labels;
        for (const auto& s : batch.samples) {
            labels.insert(labels.end(), s.class_labels.begin(), s.class_labels.end());
        }
        result.loss = softmax_xent(tape, logits, labels);
    } else if (task == Task::binary_edge) {
        std::vector<std::uint8_t> labels;
        for (const auto& s : batch.samples) {
            labels.insert(labels.end(), s.edge_labels.begin(), s.edge_labels.end());
        }
        result.loss = balanced_sigmoid_xent(tape, logits, labels);
    } else {
        const int n = batch.total_samples();
        Tensor<T> gt({n, 3});
        int r = 0;
        for (const auto& s : batch.samples) {
            for (const auto& v : s.normal_labels) {
                gt.at(r, 0) = static_cast<T>(v[0]);
                gt.at(r, 1) = static_cast<T>(v[1]);
                gt.at(r, 2) = static_cast<T>(v[2]);
                ++r;
            }
        }
        result.loss = cosine_normal_loss(tape, logits, gt);
    }
    return result;
}

template <typename T>
struct StepResult {
    double loss = 0.0;
    std::int64_t activation_bytes = 0;
    std::int64_t hypercolumn_bytes = 0;
};

template <typename T>
StepResult<T> train_step(PixelNetModel<T>& model, const std::vector<BatchItem>& batch,
                         OptimizerState<T>& opt, Rng& dropout_rng) {
    Tape<T> tape;
    auto sb = to_step_batch<T>(batch);
    auto fwd = forward_loss(tape, model, sb, true, dropout_rng);
    tape.backward(fwd.loss);
    auto refs = param_refs(model);
    sgd_step(refs, fwd.bound.all, opt);
    StepResult<T> res;
    res.loss = static_cast<double>(fwd.loss->value[0]);
    res.activation_bytes = tape.value_bytes();
    res.hypercolumn_bytes = fwd.hypercolumn_bytes;
    return res;
}

// ---------------------------------------------------------------------------
// Finite-difference harness

struct GradCheckOptions {
    double tolerance = 1e-4;
    int min_coords = 200;
    double fd_step = 1e-5;
    std::uint64_t seed = 17;
};

struct GradCheckReport {
    bool passed = false;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    std::string worst_coordinate;
    int coords_checked = 0;
};

// Central differences over a random subset of coordinates spanning every
// parameter tensor and the input image (the path into the sampling layer).
// Requires a 64-bit model; dropout is off because the forward runs in eval
// mode.
template <typename T>
GradCheckReport grad_check(PixelNetModel<T>& model, const std::vector<BatchItem>& batch,
                           const GradCheckOptions& options = {}) {
    static_assert(std::is_same_v<T, double>, "grad_check requires the 64-bit mode");
    auto sb = to_step_batch<T>(batch);
    Rng dummy(0);

    // analytic gradients
    Tape<T> tape;
    auto fwd = forward_loss(tape, model, sb, false, dummy, true);
    tape.backward(fwd.loss);

    auto refs = param_refs(model);
    struct Coord {
        int tensor;  // index into refs, or -1-i for image i
        std::int64_t index;
        double analytic;
        std::string name;
    };
    std::vector<Coord> coords;
    Rng rng(options.seed);
    const int per_tensor = std::max(
        1, static_cast<int>(options.min_coords /
                            std::max<std::size_t>(1, refs.size() + sb.images.size())) +
               1);
    for (std::size_t t = 0; t < refs.size(); ++t) {
        const auto& g = fwd.bound.all[t]->grad;
        for (int c = 0; c < per_tensor; ++c) {
            const std::int64_t j = rng.uniform_int(static_cast<int>(g.size()));
            coords.push_back({static_cast<int>(t), j, static_cast<double>(g[j]),
                              refs[t].name + "[" + std::to_string(j) + "]"});
        }
    }
    for (std::size_t i = 0; i < sb.images.size(); ++i) {
        const auto& g = fwd.image_nodes[i]->grad;
        for (int c = 0; c < per_tensor; ++c) {
            const std::int64_t j = rng.uniform_int(static_cast<int>(g.size()));
            coords.push_back({-1 - static_cast<int>(i), j, static_cast<double>(g[j]),
                              "image" + std::to_string(i) + "[" + std::to_string(j) + "]"});
        }
    }

    auto eval_loss = [&]() {
        Tape<T> t2(false);
        Rng d2(0);
        auto f2 = forward_loss(t2, model, sb, false, d2);
        return static_cast<double>(f2.loss->value[0]);
    };

    GradCheckReport report;
    report.tolerance = options.tolerance;
    const double h = options.fd_step;
    for (const auto& c : coords) {
        T* slot = c.tensor >= 0 ? &(*refs[static_cast<std::size_t>(c.tensor)].tensor)[c.index]
                                : &sb.images[static_cast<std::size_t>(-1 - c.tensor)][c.index];
        const T saved = *slot;
        *slot = saved + static_cast<T>(h);
        const double lp = eval_loss();
        *slot = saved - static_cast<T>(h);
        const double lm = eval_loss();
        *slot = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(c.analytic), 1e-6});
        const double rel = std::abs(fd - c.analytic) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_coordinate = c.name;
        }
    }
    report.coords_checked = static_cast<int>(coords.size());
    report.passed = report.max_rel_err < options.tolerance;
    return report;
}

// Re-randomizes parameters at a healthy scale so finite differences are well
// conditioned at the test point.
template <typename T>
void randomize_params(PixelNetModel<T>& model, Rng& rng, double sigma) {
    for (auto& ref : param_refs(model)) {
        for (std::int64_t i = 0; i < ref.tensor->size(); ++i) {
            (*ref.tensor)[i] = static_cast<T>(rng.normal() * sigma);
        }
    }
}

}  // namespace pixelnet
