#pragma once

#include <string>
#include <vector>

#include "pixelnet/ops.hpp"
#include "pixelnet/rng.hpp"

namespace pixelnet {

enum class Task { multiclass, binary_edge, normals };

inline const char* task_name(Task t) {
    switch (t) {
        case Task::multiclass: return "segmentation";
        case Task::binary_edge: return "edges";
        case Task::normals: return "normals";
    }
    return "?";
}

// Pixel-wise MLP over hypercolumn rows. num_fc = 1 is a single linear map
// D -> K; deeper heads interleave ReLU and dropout on the hidden layers.
struct HeadConfig {
    int num_fc = 3;
    int hidden_dim = 256;
    int output_dim = 0;
    double dropout_rate = 0.5;
    Task task = Task::multiclass;

    void validate() const {
        if (num_fc < 1 || num_fc > 3) throw ConfigError("head num_fc must be 1, 2 or 3");
        if (num_fc > 1 && hidden_dim <= 0) throw ConfigError("head hidden_dim must be positive");
        if (output_dim <= 0) throw ConfigError("head output_dim must be positive");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw ConfigError("head dropout_rate must be in [0,1)");
        }
    }
};

template <typename T>
struct Head {
    HeadConfig config;
    int input_dim = 0;
    std::vector<Tensor<T>> weights;  // [out,in] per fc layer
    std::vector<Tensor<T>> biases;
};

// Gaussian initialization with sigma = 1e-3 on every weight, zero biases.
template <typename T>
Head<T> init_head(const HeadConfig& cfg, int input_dim, Rng& rng) {
    cfg.validate();
    if (input_dim <= 0) throw ConfigError("head input_dim must be positive");
    constexpr double kSigma = 1e-3;
    Head<T> head;
    head.config = cfg;
    head.input_dim = input_dim;
    int in = input_dim;
    for (int i = 0; i < cfg.num_fc; ++i) {
        const int out = (i == cfg.num_fc - 1) ? cfg.output_dim : cfg.hidden_dim;
        Tensor<T> w({out, in});
        for (std::int64_t j = 0; j < w.size(); ++j) w[j] = static_cast<T>(rng.normal() * kSigma);
        head.weights.push_back(std::move(w));
        head.biases.push_back(Tensor<T>({out}));
        in = out;
    }
    return head;
}

// rows [N,D] -> logits [N,K]. The math is identical whether the rows come
// from the sparse sampling layer or a flattened dense grid.
template <typename T>
NodePtr<T> head_forward(Tape<T>& tape, const HeadConfig& cfg, const std::vector<NodePtr<T>>& weights,
                        const std::vector<NodePtr<T>>& biases, const NodePtr<T>& rows,
                        bool train_mode, Rng& dropout_rng) {
    NodePtr<T> x = rows;
    for (int i = 0; i < cfg.num_fc; ++i) {
        x = linear(tape, x, weights[static_cast<std::size_t>(i)], biases[static_cast<std::size_t>(i)]);
        if (i < cfg.num_fc - 1) {
            x = relu(tape, x);
            x = dropout(tape, x, cfg.dropout_rate, train_mode, dropout_rng);
        }
    }
    return x;
}

}  // namespace pixelnet
