#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pixelnet/config.hpp"

namespace pixelnet {

std::vector<std::string> experiment_names();

// Desk-scale sweep configurations shared by the experiment presets.
RunConfig experiment_base_segmentation();
RunConfig experiment_base_edges();

// Runs one preset over the corpus at data_dir: one CSV per sweep at
// <out_dir>/<name>.csv, one row per setting per seed (seeds derived as
// base_seed + s). Unknown names throw ConfigError listing the presets.
void run_experiment(const std::string& name, const std::string& data_dir,
                    const std::string& out_dir, int seeds, std::uint64_t base_seed,
                    std::ostream& progress);

}  // namespace pixelnet
