#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pixelnet/batching.hpp"
#include "pixelnet/model.hpp"
#include "pixelnet/trainer.hpp"

namespace pixelnet {

// Flat key=value configuration with dotted section prefixes. '#' starts a
// comment; the map ordering gives a canonical serialization.
using FlatConfig = std::map<std::string, std::string>;

FlatConfig parse_flat_config(std::istream& is);
FlatConfig parse_flat_config_file(const std::string& path);
std::string canonical_text(const FlatConfig& cfg);

// Everything that determines an experiment: two runs from the same RunConfig
// and seed produce identical metrics (wall-time columns aside).
struct RunConfig {
    Task task = Task::multiclass;
    std::uint64_t seed = 0;
    std::string data_dir;
    std::string out_dir = "runs/out";

    // backbone / hypercolumn / head
    std::vector<std::pair<int, int>> stages = {{1, 8}, {1, 16}, {1, 32}, {1, 64}, {1, 64}};
    int kernel = 3;
    std::vector<bool> pool_after = {true, true, true, true, false};
    bool include_top = false;
    int top_channels = 128;
    std::vector<std::string> taps = {"conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1"};
    int num_fc = 3;
    int hidden_dim = 256;
    double dropout = 0.5;
    int output_dim = 0;  // 0 = derived from the task

    // batch plan
    int epochs = 30;
    int images_per_batch = 5;
    int pixels_per_image = 2000;
    SamplingStrategy strategy = SamplingStrategy::uniform;
    double positive_fraction = 0.5;
    std::vector<double> scale_jitter = {1.0};
    int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

    // optimizer
    double lr = 1e-2;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<std::pair<int, double>> schedule;  // empty = two 10x drops at thirds

    ModelConfig model_config(int dataset_classes) const;
    BatchPlan batch_plan() const;
    LrSchedule lr_schedule() const;
    int resolved_output_dim(int dataset_classes) const;
};

// Parsing rejects unknown keys by name (that is the CLI's exit-2 contract for
// bad --override keys).
RunConfig run_config_from_flat(const FlatConfig& flat);
FlatConfig flat_from_run_config(const RunConfig& cfg);
void apply_override(FlatConfig& cfg, const std::string& key_value);

RunConfig default_run_config(Task task);

}  // namespace pixelnet
