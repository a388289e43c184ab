#pragma once

#include <span>
#include <vector>

#include "mapcontent/dyadic.hpp"
#include "mapcontent/sampled_map.hpp"

namespace mapcontent {

// A seminorm on R^d in one of three representations: a quadratic form
// sqrt(v^T S v) with S symmetric PSD, a max of |<a_i, v>| over covectors, or
// values tabulated on unit directions with positively homogeneous extension.
struct Seminorm {
    enum class Family { Zero, Euclidean, MaxLinear, Tabulated };
    Family family = Family::Zero;
    int dim = 2;
    std::vector<double> quad;                     // Euclidean: row-major d*d
    std::vector<std::vector<double>> covectors;   // MaxLinear
    std::vector<std::array<double, 4>> directions;  // Tabulated (unit vectors)
    std::vector<double> dir_values;

    double operator()(std::span<const double> v) const;

    static Seminorm zero(int dim);
    static Seminorm euclidean(int dim, std::vector<double> sym_psd);
    static Seminorm max_linear(int dim, std::vector<std::vector<double>> covectors);
    static Seminorm tabulated(int dim, std::vector<std::array<double, 4>> dirs, std::vector<double> values);
};

struct MdFitOptions {
    int c0 = 3;                       // dilation factor of the fitted window
    BoundaryMode boundary = BoundaryMode::Clip;
    std::size_t pair_cap = 4096;      // farthest-point endpoint sampling above this
    int descent_rounds = 25;
    double lp_tol = 1e-9;
};

/// One endpoint pair of a fit: the difference vector, the image distance,
/// and the Euclidean length of the difference.
struct PairSample {
    std::array<double, 4> delta;
    double dist;
    double norm;
};

struct MdResult {
    CubeId cube;
    double md_upper = 0;   // best parametric fit, normalized by 1/side
    double md_lower = 0;   // direction-LP relaxation optimum, same normalization
    Seminorm seminorm;     // the md_upper achiever
    std::size_t pair_count = 0;
};

/// Endpoint pairs drawn from the c0-dilation of a cube (clipped or extended).
/// Deterministic: full enumeration when at most 64 lattice points fall in the
/// window, farthest-point selection otherwise.
std::vector<PairSample> sample_pairs(const SampledMap& map, const CubeId& cube, const MdFitOptions& opts);

/// Same pair sampler over an arbitrary axis-aligned box (real coordinates,
/// clipped to the unit cube). Used for shifted-grid windows.
std::vector<PairSample> sample_pairs_box(const SampledMap& map, std::span<const double> lo,
                                         std::span<const double> hi, const MdFitOptions& opts);

/// Core two-sided fit over explicit pairs; md values are normalized by the
/// given side length. The `cube` field of the result is left at its default.
MdResult fit_seminorm_pairs(std::span<const PairSample> pairs, int dim, double side, const MdFitOptions& opts);

// Fits the approximating seminorm of a cube's dilated window. The upper
// bound minimizes max_pairs |d(f(x), f(y)) - ||x - y||| over the parametric
// families; the lower bound is the optimum of the direction LP: variables
// t_u >= 0 on the sampled unit directions, pair constraints
// |dist - t_u * |delta|| <= s, subadditivity constraints on direction sums,
// minimized over s (any seminorm restricts to a feasible point, so the
// optimum certifies md_lower <= md_upper). Throws ResolutionError when the
// window holds fewer than two lattice points.
MdResult fit_seminorm(const SampledMap& map, const CubeId& cube, const MdFitOptions& opts);

/// The direction-LP optimum alone (exposed for property tests).
double seminorm_lower_bound(std::span<const PairSample> pairs, int dim, double tol);

/// Per-cube fits for all cubes of levels 0..maxlevel, in (level, raster)
/// order. maxlevel must stay below the lattice depth.
std::vector<MdResult> md_profile(const SampledMap& map, int maxlevel, const MdFitOptions& opts, int threads = 0);

/// Total measure of cubes whose md_upper exceeds eps.
double exceedance_volume(std::span<const MdResult> table, double eps);

struct NormBoundReport {
    bool holds = false;
    double worst_slack = 0;  // min over sampled v of L|v| + c0*eps*side - ||v||
    std::size_t checked = 0;
};

/// Checks ||v|| <= L_f |v| + c0 * eps * side(Q) over the sampled difference
/// vectors with |v| < c0 * side(Q); the L_f factor rescales the
/// unit-Lipschitz statement for maps with a larger declared constant.
/// Requires md_upper < eps (StateError).
NormBoundReport norm_bound_check(const SampledMap& map, const MdResult& fit, double eps, const MdFitOptions& opts);

}  // namespace mapcontent
