#pragma once

#include <cstdint>
#include <vector>

#include "pixelnet/tensor.hpp"

namespace pixelnet {

// One synthetic scene with all three label modalities derived from the same
// geometry: class map by paint order, edge map as the class-boundary set,
// per-pixel unit surface normals.
struct SyntheticScene {
    Tensor<float> image;       // [3,H,W] in [0,1]
    std::vector<int> class_map;        // H*W, row-major; 0 = background
    std::vector<std::uint8_t> edge_map;  // H*W, 0/1
    Tensor<float> normal_map;  // [3,H,W], unit norm everywhere
    int h = 0;
    int w = 0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<SyntheticScene> scenes;
    int num_classes = 0;
};

}  // namespace pixelnet
