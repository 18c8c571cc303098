#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pixelnet/config.hpp"
#include "pixelnet/inference.hpp"
#include "pixelnet/metrics.hpp"
#include "pixelnet/scene.hpp"
#include "pixelnet/trainer.hpp"

namespace pixelnet {

struct TrainLogRow {
    int epoch = 0;
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

struct TrainOutput {
    PixelNetModel<float> model;
    OptimizerState<float> optimizer;
    std::vector<TrainLogRow> log;
    int classes = 0;
    int biased_fallbacks = 0;
    std::string final_checkpoint;  // empty when out_dir was empty
};

// Full training run per the config: per-epoch image permutation, per-step
// batch sub-streams, step LR schedule, CSV logging, optional checkpoints.
TrainOutput train_model(const RunConfig& cfg, const Dataset& train_data,
                        std::ostream* log_csv = nullptr, bool write_checkpoints = true);

struct EvalMetrics {
    Task task = Task::multiclass;
    double pixel_acc = 0.0;
    double mean_iu = 0.0;
    double best_f = 0.0;
    double best_threshold = 0.0;
    double ois_f = 0.0;
    AngularStats ang;
};

EvalMetrics evaluate_split(PixelNetModel<float>& model, const Dataset& split,
                           const std::vector<double>& scales, const PredictOptions& options = {});

// Stable metrics CSV schema; wall_ms is the only wall-time column.
struct MetricsRow {
    std::string experiment;
    std::string setting;
    std::uint64_t seed = 0;
    Task task = Task::multiclass;
    std::string split = "test";
    std::string scales = "1";
    int epoch = 0;
    double wall_ms = 0.0;
    EvalMetrics metrics;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);
void write_train_log_header(std::ostream& os);
void write_train_log_row(std::ostream& os, const TrainLogRow& row);

// Prediction dumps: class maps as PGM, probability/normal maps as PXT1.
void dump_prediction(const std::string& stem, Task task, const PredictionMap<float>& pred);

std::string scales_label(const std::vector<double>& scales);

}  // namespace pixelnet
