#pragma once

#include <string>
#include <vector>

#include "pixelnet/backbone.hpp"
#include "pixelnet/head.hpp"
#include "pixelnet/hypercolumn.hpp"

namespace pixelnet {

// Concatenation order of the hypercolumn is the backbone config order,
// shallow to deep; the coordinate convention is center-aligned throughout.
struct HypercolumnSpec {
    std::vector<std::string> tap_layers;
    int total_dim = 0;
    static constexpr const char* kConvention = "center-aligned";
};

struct ModelConfig {
    BackboneConfig backbone;
    std::vector<std::string> taps;
    HeadConfig head;

    HypercolumnSpec hypercolumn_spec() const {
        HypercolumnSpec spec;
        const auto layout = backbone_layout(backbone);
        for (const auto& def : layout) {
            for (const auto& t : taps) {
                if (def.id == t) {
                    spec.tap_layers.push_back(def.id);
                    spec.total_dim += def.out_ch;
                }
            }
        }
        if (spec.tap_layers.size() != taps.size()) {
            std::string valid;
            for (const auto& def : layout) valid += (valid.empty() ? "" : ", ") + def.id;
            throw ConfigError("hypercolumn taps name unknown layers; valid layers: " + valid);
        }
        return spec;
    }

    int hypercolumn_dim() const { return hypercolumn_spec().total_dim; }

    void validate() const {
        backbone.validate();
        head.validate();
        if (taps.empty()) throw ConfigError("at least one hypercolumn tap layer is required");
        (void)hypercolumn_spec();
    }
};

template <typename T>
struct PixelNetModel {
    ModelConfig config;
    Backbone<T> backbone;
    Head<T> head;
};

template <typename T>
PixelNetModel<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    PixelNetModel<T> m;
    m.config = cfg;
    Rng root(seed);
    Rng brng = root.child(0x6261636bULL);  // "back"
    Rng hrng = root.child(0x68656164ULL);  // "head"
    m.backbone = build_backbone<T>(cfg.backbone, brng);
    m.head = init_head<T>(cfg.head, cfg.hypercolumn_dim(), hrng);
    return m;
}

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* tensor;
    bool decay;  // weight decay applies to weights only, not biases
};

template <typename T>
std::vector<ParamRef<T>> param_refs(PixelNetModel<T>& m) {
    std::vector<ParamRef<T>> refs;
    for (std::size_t i = 0; i < m.backbone.layout.size(); ++i) {
        const std::string base = "backbone." + m.backbone.layout[i].id;
        refs.push_back({base + ".w", &m.backbone.weights[i], true});
        refs.push_back({base + ".b", &m.backbone.biases[i], false});
    }
    for (std::size_t i = 0; i < m.head.weights.size(); ++i) {
        const std::string base = "head.fc" + std::to_string(i + 1);
        refs.push_back({base + ".w", &m.head.weights[i], true});
        refs.push_back({base + ".b", &m.head.biases[i], false});
    }
    return refs;
}

// Parameters wrapped as tape leaves for one step; order matches param_refs.
template <typename T>
struct BoundModel {
    std::vector<NodePtr<T>> all;
    std::vector<NodePtr<T>> backbone_w, backbone_b;
    std::vector<NodePtr<T>> head_w, head_b;
};

template <typename T>
BoundModel<T> bind_model(Tape<T>& tape, PixelNetModel<T>& m) {
    BoundModel<T> bound;
    for (std::size_t i = 0; i < m.backbone.layout.size(); ++i) {
        const std::string base = "backbone." + m.backbone.layout[i].id;
        auto w = tape.leaf(m.backbone.weights[i], base + ".w");
        auto b = tape.leaf(m.backbone.biases[i], base + ".b");
        bound.backbone_w.push_back(w);
        bound.backbone_b.push_back(b);
        bound.all.push_back(w);
        bound.all.push_back(b);
    }
    for (std::size_t i = 0; i < m.head.weights.size(); ++i) {
        const std::string base = "head.fc" + std::to_string(i + 1);
        auto w = tape.leaf(m.head.weights[i], base + ".w");
        auto b = tape.leaf(m.head.biases[i], base + ".b");
        bound.head_w.push_back(w);
        bound.head_b.push_back(b);
        bound.all.push_back(w);
        bound.all.push_back(b);
    }
    return bound;
}

template <typename T>
FeaturePyramid<T> model_pyramid(Tape<T>& tape, const PixelNetModel<T>& m, const BoundModel<T>& bound,
                                const NodePtr<T>& image) {
    return forward_pyramid(tape, m.backbone.layout, bound.backbone_w, bound.backbone_b, image,
                           m.config.taps);
}

template <typename T>
NodePtr<T> model_head(Tape<T>& tape, const PixelNetModel<T>& m, const BoundModel<T>& bound,
                      const NodePtr<T>& rows, bool train_mode, Rng& dropout_rng) {
    return head_forward(tape, m.head.config, bound.head_w, bound.head_b, rows, train_mode,
                        dropout_rng);
}

template <typename To, typename From>
PixelNetModel<To> model_cast(const PixelNetModel<From>& m) {
    PixelNetModel<To> out;
    out.config = m.config;
    out.backbone.config = m.backbone.config;
    out.backbone.layout = m.backbone.layout;
    for (const auto& w : m.backbone.weights) out.backbone.weights.push_back(w.template cast<To>());
    for (const auto& b : m.backbone.biases) out.backbone.biases.push_back(b.template cast<To>());
    out.head.config = m.head.config;
    out.head.input_dim = m.head.input_dim;
    for (const auto& w : m.head.weights) out.head.weights.push_back(w.template cast<To>());
    for (const auto& b : m.head.biases) out.head.biases.push_back(b.template cast<To>());
    return out;
}

}  // namespace pixelnet
