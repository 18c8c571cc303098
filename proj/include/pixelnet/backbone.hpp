#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "pixelnet/conv.hpp"
#include "pixelnet/pyramid.hpp"
#include "pixelnet/rng.hpp"

namespace pixelnet {

struct StageSpec {
    int num_convs = 1;
    int channels = 0;
    int kernel = 3;
};

// Multi-stage convolutional extractor. Every conv pads by kernel/2 so maps
// shrink only through pooling; the stride of a stage is 2^(pools before it).
struct BackboneConfig {
    std::vector<StageSpec> stages;
    std::vector<bool> pool_after;  // one flag per stage
    bool include_top = false;      // appends two 1x1 wide layers (conv6, conv7)
    int top_channels = 128;

    void validate() const {
        if (stages.empty()) throw ConfigError("backbone needs at least one stage");
        if (pool_after.size() != stages.size()) {
            throw ConfigError("backbone pool_after must list one flag per stage");
        }
        for (const auto& s : stages) {
            if (s.channels <= 0) throw ConfigError("backbone stage channel count must be positive");
            if (s.num_convs <= 0) throw ConfigError("backbone stage conv count must be positive");
            if (s.kernel < 1 || s.kernel % 2 == 0) {
                throw ConfigError("backbone stage kernel must be odd and positive");
            }
        }
        if (include_top && top_channels <= 0) {
            throw ConfigError("backbone top_channels must be positive");
        }
    }

    int num_pools() const {
        int p = 0;
        for (bool b : pool_after) p += b;
        return p;
    }

    // The default desk configuration: 5 stages, channels (8,16,32,64,64),
    // pool after stages 1-4, giving strides (1,2,4,8,16).
    static BackboneConfig vgg_tiny(bool with_top = false) {
        BackboneConfig cfg;
        for (int ch : {8, 16, 32, 64, 64}) cfg.stages.push_back({1, ch, 3});
        cfg.pool_after = {true, true, true, true, false};
        cfg.include_top = with_top;
        return cfg;
    }
};

// One conv layer in traversal order with its resolved stride.
struct ConvLayerDef {
    std::string id;
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 3;
    int stride = 1;  // stride of this layer's output grid w.r.t. input pixels
    bool pool_after = false;
};

inline std::vector<ConvLayerDef> backbone_layout(const BackboneConfig& cfg, int input_channels = 3) {
    cfg.validate();
    std::vector<ConvLayerDef> layout;
    int in_ch = input_channels;
    int stride = 1;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const auto& st = cfg.stages[s];
        for (int i = 0; i < st.num_convs; ++i) {
            ConvLayerDef def;
            def.id = "conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1);
            def.in_ch = in_ch;
            def.out_ch = st.channels;
            def.kernel = st.kernel;
            def.stride = stride;
            def.pool_after = cfg.pool_after[s] && i == st.num_convs - 1;
            layout.push_back(def);
            in_ch = st.channels;
        }
        if (cfg.pool_after[s]) stride *= 2;
    }
    if (cfg.include_top) {
        for (int t = 0; t < 2; ++t) {
            ConvLayerDef def;
            def.id = "conv" + std::to_string(cfg.stages.size() + 1 + t);
            def.in_ch = in_ch;
            def.out_ch = cfg.top_channels;
            def.kernel = 1;
            def.stride = stride;
            def.pool_after = false;
            layout.push_back(def);
            in_ch = cfg.top_channels;
        }
    }
    return layout;
}

inline std::vector<std::string> backbone_layer_ids(const BackboneConfig& cfg) {
    std::vector<std::string> ids;
    for (const auto& def : backbone_layout(cfg)) ids.push_back(def.id);
    return ids;
}

template <typename T>
struct Backbone {
    BackboneConfig config;
    std::vector<ConvLayerDef> layout;
    std::vector<Tensor<T>> weights;  // [out,in,k,k], parallel to layout
    std::vector<Tensor<T>> biases;   // [out]
};

// He initialization: zero-mean Gaussian with std sqrt(2 / fan_in), zero biases.
template <typename T>
Backbone<T> build_backbone(const BackboneConfig& cfg, Rng& rng) {
    Backbone<T> bb;
    bb.config = cfg;
    bb.layout = backbone_layout(cfg);
    for (const auto& def : bb.layout) {
        Tensor<T> w({def.out_ch, def.in_ch, def.kernel, def.kernel});
        const double stddev = std::sqrt(2.0 / (def.in_ch * def.kernel * def.kernel));
        for (std::int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.normal() * stddev);
        bb.weights.push_back(std::move(w));
        bb.biases.push_back(Tensor<T>({def.out_ch}));
    }
    return bb;
}

// Runs the extractor and taps the requested layers (post-activation), in
// config order. Parameters enter as tape nodes so gradients can flow back
// through the sampling layer into the convolutions.
template <typename T>
FeaturePyramid<T> forward_pyramid(Tape<T>& tape, const std::vector<ConvLayerDef>& layout,
                                  const std::vector<NodePtr<T>>& weights,
                                  const std::vector<NodePtr<T>>& biases, const NodePtr<T>& image,
                                  const std::vector<std::string>& tap_layers) {
    if (image->value.ndim() != 3) throw ConfigError("forward_pyramid expects image[C,H,W]");
    std::set<std::string> want(tap_layers.begin(), tap_layers.end());
    for (const auto& t : tap_layers) {
        bool known = false;
        for (const auto& def : layout) known = known || def.id == t;
        if (!known) {
            std::string valid;
            for (const auto& def : layout) valid += (valid.empty() ? "" : ", ") + def.id;
            throw ConfigError("unknown tap layer '" + t + "'; valid layers: " + valid);
        }
    }
    int pools = 0;
    for (const auto& def : layout) pools += def.pool_after;
    const int min_extent = 1 << pools;
    if (image->value.dim(1) < min_extent || image->value.dim(2) < min_extent) {
        throw ConfigError("input " + image->value.shape_string() + " smaller than 2^pools = " +
                          std::to_string(min_extent));
    }

    FeaturePyramid<T> pyr;
    pyr.input_h = image->value.dim(1);
    pyr.input_w = image->value.dim(2);
    NodePtr<T> x = image;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& def = layout[i];
        x = conv2d(tape, x, weights[i], biases[i], 1, def.kernel / 2);
        x = relu(tape, x);
        if (want.count(def.id)) {
            pyr.entries.push_back({def.id, def.stride, x});
        }
        if (def.pool_after) x = maxpool2(tape, x);
    }
    return pyr;
}

}  // namespace pixelnet
