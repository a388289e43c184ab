#pragma once

#include <array>
#include <string>
#include <vector>

#include "mapcontent/content.hpp"
#include "mapcontent/sampled_map.hpp"

namespace mapcontent {

/// A vector-valued function tabulated on the lattice points of a cell set.
struct GridFunction {
    int dim = 2;
    int depth = 0;
    int out_dim = 2;
    std::vector<std::int32_t> slot;            // lattice linear -> value index, -1 when absent
    std::vector<std::array<double, 4>> values;

    bool defined_at(std::size_t linear) const { return slot[linear] >= 0; }
    const std::array<double, 4>& at(std::size_t linear) const { return values[static_cast<std::size_t>(slot[linear])]; }
    void set(std::size_t linear, const std::array<double, 4>& v);

    static GridFunction make(int dim, int depth, int out_dim);
    /// The identity change of coordinates on the lattice points of `domain`.
    static GridFunction identity(const SampledMap& map, const CellSet& domain);
    /// Swaps the first two coordinates (a deliberately fiber-breaking map).
    static GridFunction swap_xy(const SampledMap& map, const CellSet& domain);
};

struct HsTolerances {
    double c_star = 16.0;         // two-sided budget for acceptance
    double fiber_x_factor = 4.0;  // x-closeness threshold, in units of eps_match
    double fiber_d_factor = 4.0;  // image-closeness threshold, in units of eps_match
    std::size_t pair_cap = 200000;
    std::uint64_t seed = 99;
};

// A candidate straightening (E, g) with measured residuals. The constants
// are certified on sampled lattice pairs only; no global extension of g is
// constructed, and `restricted_only` records that caveat in every report.
struct HardSardCertificate {
    CellSet cells;
    GridFunction g;
    double c_lip = 0;
    struct Residuals {
        double bilip_g_low = 0, bilip_g_high = 0;
        long fiber_violations = 0;
        double bilip_fy_low = 0, bilip_fy_high = 0;
    } residuals;
    bool accepted = false;
    bool restricted_only = true;

    void save_json(const std::string& path) const;
};

// Checks the three straightening conditions over sampled pairs of E-lattice
// points: (i) g is two-sided within c_star; (ii) pairs nearby in the
// g x-coordinate have matching images and pairs with matching images sit
// nearby in x (violations counted both ways); (iii) the supplemented map
// (F, y) is two-sided within c_star. Throws ArgumentError on an empty E.
HardSardCertificate check_hard_sard(const SampledMap& map, const CellSet& E, const GridFunction& g,
                                    const HsTolerances& tol);

struct SliceChoice {
    std::array<std::int32_t, 4> y;  // lattice coordinates of the chosen slice
    double score = 0;               // discretized overlap integral
    double bound = 0;               // measure(F)^2 / (L^n * content of f(F))
    double precheck_low = 0, precheck_high = 0;
};

/// The fiber y' maximizing the tolerance-matched overlap integral
/// sum_z H^n-upper(f(F_y') cap-matched f(F_z)) * 2^-mD. Requires the
/// supplemented map (f, y) to pass a two-sided pre-check on F
/// (NotBiLipschitzError otherwise, carrying the worst pair).
SliceChoice select_y_slice(const SampledMap& map, const CellSet& F, const HsTolerances& tol);

struct ShearStep {
    std::array<std::int32_t, 4> y_slice;
    CellSet e1;          // cells of F whose image matches the slice image
    GridFunction g1;     // (x-lookup through the slice, y) on E^1 lattice points
    double measured_eta = 0;  // the slice's overlap score
};

/// Builds the shear for a chosen slice: E^1 collects the cells whose image
/// matches some slice image point within eps_match; the x-part of g1 looks
/// up the nearest slice image. Throws StateError when the slice is empty.
ShearStep construct_shear(const SampledMap& map, const CellSet& F, const std::array<std::int32_t, 4>& y_slice,
                          const HsTolerances& tol);

struct DirectionalResult {
    std::vector<HardSardCertificate> certificates;
    CellSet garbage;
    std::vector<double> step_measures;  // measure of F^k per iteration
    double measured_eta = 0;
};

// The slice-shear iteration: pick a slice, build the shear, prune the lattice
// points participating in two-sided violations of g1 (greedy, most-violating
// first), certify the retained set, and recurse on the complement until the
// remaining measure drops below alpha/2. Pruned and never-covered cells form
// the garbage, reported with its measure.
DirectionalResult iterate_directional(const SampledMap& map, const CellSet& F, double alpha, double L,
                                      const HsTolerances& tol, int threads = 0);

struct ContentMeasureReport {
    double content = 0;
    double measure = 0;
    double ratio = 0;
    double bracket = 0;  // acceptance band [1/bracket, bracket]
    bool within = false;
};

/// DP mapping content of an accepted certificate's set against its measure;
/// the band scales with the certificate constant. Throws StateError when the
/// certificate was rejected.
ContentMeasureReport content_measure_comparison(const SampledMap& map, const HardSardCertificate& cert,
                                                int threads = 0);

}  // namespace mapcontent
