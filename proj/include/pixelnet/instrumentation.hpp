#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "pixelnet/batching.hpp"
#include "pixelnet/config.hpp"
#include "pixelnet/trainer.hpp"

namespace pixelnet {

// Analytic memory and throughput accounting for the sparse-vs-dense
// hypercolumn argument. Byte counts come from shapes, not allocator hooks;
// activation, parameter, and optimizer bytes are reported separately.
struct ResourceReport {
    std::int64_t hypercolumn_bytes_sparse = 0;  // N * D * dtype
    std::int64_t hypercolumn_bytes_dense = 0;   // H * W * D * dtype
    double dense_sparse_ratio = 0.0;            // (H*W)/N exactly
    double masked_after_grid_ratio = 0.0;       // ratio * share of grid retained
    std::int64_t peak_activation_bytes = 0;     // sum over every tape value slot
    std::int64_t model_bytes = 0;
    std::int64_t optimizer_bytes = 0;
    double batches_per_second = 0.0;        // sparse path; 0 until measured
    double dense_batches_per_second = 0.0;  // dense-grid baseline; 0 until measured
    // config echo
    int hypercolumn_dim = 0;
    int n_samples = 0;
    int input_h = 0;
    int input_w = 0;
    int num_fc = 0;

    std::string to_text() const;
    static const char* csv_header();
    void write_csv_row(std::ostream& os) const;
};

ResourceReport account_memory(const ModelConfig& config, int input_h, int input_w, int n_samples,
                              double grid_retained_share = 0.8);

// Median wall time of full forward+backward passes over n_steps (after at
// least 3 warmup steps), inverted. The dense variant materializes the full
// hypercolumn grid and runs the head over every pixel, which is the baseline
// the sparse path is compared against.
double measure_throughput_sparse(PixelNetModel<float>& model, const Dataset& data,
                                 const BatchPlan& plan, int n_steps);
double measure_throughput_dense(PixelNetModel<float>& model, const Dataset& data, int images_per_batch,
                                int n_steps);

}  // namespace pixelnet
