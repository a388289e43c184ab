#pragma once

#include <span>
#include <vector>

#include "mapcontent/dyadic.hpp"
#include "mapcontent/sampled_map.hpp"

namespace mapcontent {

/// Two-sided estimate of the Hausdorff content H^k of the continuum set a
/// finite point sample stands for. `upper` is the cost of an explicit greedy
/// ball cover (certified for the samples); `lower` comes from a greedy
/// disjoint packing deflated by 5^k.
struct ContentBracket {
    double lower = 0;
    double upper = 0;
    double k = 0;
};

/// Greedy-cover / greedy-packing bracket for a finite point multiset.
/// Duplicates are collapsed first; a single distinct point yields [0, 0].
/// Cover balls have sample-point centers and dyadic radii; each round picks
/// the ball covering the most uncovered points (ties: smaller radius, then
/// smaller point id). Throws ArgumentError if k <= 0 or the set is empty.
ContentBracket hausdorff_content(const DistanceOracle& space, std::span<const PointId> points, double k);

struct MappingContentResult {
    double value = 0;        // DP optimum with upper-bracket cube costs
    double lower = 0;        // same DP run with lower-bracket costs
    std::vector<CubeId> antichain;   // cubes realizing `value` (only those meeting E)
    std::vector<double> costs;       // matching per-cube costs
};

// Exact minimum over dyadic antichains of depth <= max_depth of
// sum cost(Q), where cost(Q) = H^n-upper(f(Q cap lattice)) * side(Q)^m and
// cubes not meeting E are free. Solved by the tree recursion
// best(Q) = min(cost(Q), sum best(children)). Cube costs are evaluated in
// parallel; the fold is sequential so results are thread-count independent.
MappingContentResult mapping_content(const SampledMap& map, const CellSet& E, int max_depth, int threads = 0);

/// Upper bound for the arbitrary-cover variant of mapping content: the best
/// of (a) the DP antichain with cubes replaced by their E-intersections,
/// (b) image-cluster pullbacks, and (c) the single set E, each charged
/// H^n-upper(f(S)) * diam(S)^m.
double arbitrary_mapping_content_upper(const SampledMap& map, const CellSet& E, int max_depth, int threads = 0);

/// Exact: cell count * 2^(-dim * depth).
double lebesgue_measure(const CellSet& cells);

/// min over the given radii of H^n-upper(f(B(x, r) cap lattice)) / r^n.
/// Throws ArgumentError on an empty radius list.
double local_density(const SampledMap& map, const LatticePoint& x, std::span<const double> radii);

/// Cached estimate of the content of the unit n-cube (the proportionality
/// constant between H^n-content and side^n for cubes), measured once per n
/// with the same greedy cover used everywhere else.
double lambda_constant(int n);

}  // namespace mapcontent
