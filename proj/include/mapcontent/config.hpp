#pragma once

#include <string>

#include "mapcontent/decompose.hpp"
#include "mapcontent/hard_sard.hpp"

namespace mapcontent {

// A named parameter schedule. The analysis only guarantees that *some*
// schedule works at sufficient resolution; presets make runs reproducible
// and the pipeline reports whether its schedule sufficed.
//   default - the analysis constants (window 10(n+m), tight thresholds);
//             expect structured failures on non-affine maps at desk depths.
//   desk    - window factor 3 with relaxed thresholds; classifies non-affine
//             maps meaningfully at depths 4-6.
//   demo    - tuned for the crossfade map at depth 6; produces nontrivial
//             stopping structure end to end.
struct ParamPreset {
    std::string name;
    int c0 = 0;          // 0 means 10 * (n + m), resolved per map
    double eps = 0.01;
    double delta = 0.2;
    double delta_prime = 0.05;
    int lambda = 5;
    int K = 6;
    double alpha = 0.05;
    double alpha_prime = -1;  // -1: alpha / 10
};

ParamPreset preset_by_name(const std::string& name);

struct RunConfig {
    std::string command;
    std::string builtin = "projection";
    std::string map_file;  // overrides builtin when set
    int n = 1;
    int m = 1;
    int depth = 4;
    int star_k = 2;
    double scale = 1.0;
    std::string preset = "default";
    double alpha_override = -1;
    std::string out_dir = ".";
    std::uint64_t seed = 1234;
    int threads = 0;

    /// Schema "mcfgv1".
    static RunConfig load_json(const std::string& path);
    void save_json(const std::string& path) const;

    SampledMap make_map() const;
    PipelineOptions pipeline_options() const;
    HsTolerances hs_tolerances() const;
};

}  // namespace mapcontent
