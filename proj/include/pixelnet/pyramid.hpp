#pragma once

#include <string>
#include <vector>

#include "pixelnet/tape.hpp"

namespace pixelnet {

// Ordered per-layer feature maps with their strides relative to the input
// pixel grid. Entries appear in backbone config order, shallow to deep; that
// order fixes the hypercolumn concatenation layout.
template <typename T>
struct FeaturePyramid {
    struct Entry {
        std::string layer_id;
        int stride = 1;
        NodePtr<T> features;  // [C_i, H_i, W_i]
    };
    std::vector<Entry> entries;
    int input_h = 0;
    int input_w = 0;

    int total_dim() const {
        int d = 0;
        for (const auto& e : entries) d += e.features->value.dim(0);
        return d;
    }
};

}  // namespace pixelnet
