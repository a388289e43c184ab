#pragma once

#include <string>
#include <vector>

#include "mapcontent/hard_sard.hpp"

namespace mapcontent {

struct CandidateBound {
    double overlap_measure = 0;        // |E cap A|
    double bound = 0;                  // the 2^-k budget it is compared to
    double measured_constant = 0;      // overlap_measure / 2^-k
    long projection_violations = 0;    // x-projection overlaps between distinct strip cubes
    bool accepted = false;
};

struct StarExampleReport {
    int k = 0;
    int depth = 0;
    double lipschitz_estimate = 0;
    long injectivity_violations = 0;
    double content_lower = 0;       // DP mapping content of the strips, lower costs
    double content_upper = 0;       // same, upper costs
    double tree_length = 0;         // exact: 1 + 2^(k-2)
    double measure_a = 0;           // exact: 1/4
    std::vector<CandidateBound> candidates;
};

/// The counterexample harness: builds the star map at (k, depth), measures
/// its Lipschitz estimate, checks coarse injectivity over strip interiors,
/// brackets the mapping content of the strip set, and inspects candidate
/// straightenings for the disjoint-projection property and the strip-overlap
/// budget. Throws ResolutionError when depth < k + 2.
StarExampleReport verify_star_claims(int k, int depth, int threads = 0);

/// The strip set A of the star map (the bottom-left child cubes).
CellSet star_strips(int k, int depth);

struct ScalingRow {
    std::string map_id;
    double eta = 0;   // DP mapping content
    double diam = 0;  // diameter of the sampled image
    int m = 1;
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    double slope = 0;      // log-log regression of diam against eta (eta < 0.5 rows)
    double max_ratio = 0;  // max of diam / eta^(1/(m+2))
};

/// Evaluates (mapping content, image diameter) across a corpus of built-in
/// 1-Lipschitz maps and fits the scaling law. Throws ArgumentError when the
/// corpus holds fewer than five maps.
ScalingReport onedim_scaling_experiment(const std::vector<std::pair<std::string, SampledMap>>& corpus, int m,
                                        int depth, int threads = 0);

/// The default corpus: scaled projections, star maps, the crossfade shear,
/// and the constant map at the given depth.
std::vector<std::pair<std::string, SampledMap>> default_scaling_corpus(int depth);

}  // namespace mapcontent
