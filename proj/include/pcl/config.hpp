#pragma once

#include <string>
#include <vector>

#include "pcl/trainer.hpp"

namespace pcl {

/// A parsed experiment file: the base run configuration plus the seed list,
/// output directory (resolved relative to the file) and ablation grid.
struct Experiment {
    RunConfig base;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "out";
    std::vector<std::string> ablate_strategies;
    std::string config_text;  // raw file contents, copied into the bundle
};

/// Parses the flat key-value format:
///
///   [run]
///   method = pcl
///   seeds = 1,2,3,4,5
///   ...
///
/// '#' starts a comment. Unknown sections or keys are rejected with the line
/// number. `overrides` entries have the form "section.key=value" and are
/// applied after the file. Relative paths (csv_path, output dir) resolve
/// against `base_dir`.
Experiment parse_experiment(const std::string& text, const std::string& base_dir,
                            const std::vector<std::string>& overrides = {});

/// Reads and parses a config file (base_dir = the file's directory).
Experiment load_experiment(const std::string& path,
                           const std::vector<std::string>& overrides = {});

/// Ablation strategy names accepted in [ablate] strategies.
const std::vector<std::string>& known_strategies();

/// Applies a named sampling/buffer strategy on top of a base configuration.
RunConfig apply_strategy(const RunConfig& base, const std::string& name);

}  // namespace pcl
