#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pixelnet/scene.hpp"

namespace pixelnet {

// Deterministic synthetic scene: 2-6 shapes (disks, rectangles, rotated
// rectangles, triangles) over a background, class colors with a 0.3
// cross-class ambiguity rate, texture noise and an illumination ramp.
SyntheticScene gen_scene(std::uint64_t seed, int h, int w, int k_classes);

// Recomputes the edge map from a class map with the documented rule: a pixel
// is an edge pixel iff its class differs from any of its (y,x+1), (y+1,x-1),
// (y+1,x), (y+1,x+1) neighbors. One-pixel-wide, 8-connected boundaries.
std::vector<std::uint8_t> boundary_from_class_map(const std::vector<int>& class_map, int h, int w);

struct SplitCounts {
    int train = 200;
    int val = 50;
    int test = 50;
};

struct SplitSpec {
    std::uint64_t seed = 0;
    SplitCounts counts;
    int height = 96;
    int width = 96;
    int num_classes = 6;
};

// Scene seeds per split: disjoint contiguous ranges derived from the corpus
// seed, so regenerating any split is reproducible and splits never overlap.
std::vector<std::uint64_t> split_seeds(const SplitSpec& spec, const std::string& split);

Dataset gen_split(const SplitSpec& spec, const std::string& split);

// On-disk corpus layout: <dir>/<split>/scene_XXXXX.{ppm,cls.pgm,edge.pgm,nrm.pxt},
// one manifest per split with a path tuple per line, plus corpus.txt metadata.
void write_corpus(const std::string& dir, const SplitSpec& spec);
Dataset load_split(const std::string& dir, const std::string& split);
SplitSpec read_corpus_meta(const std::string& dir);

}  // namespace pixelnet
