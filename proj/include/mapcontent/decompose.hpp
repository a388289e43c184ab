#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mapcontent/content.hpp"
#include "mapcontent/metric_deriv.hpp"

namespace mapcontent {

// Cube trichotomy: large metric derivative (Md), small derivative but every
// coordinate n-plane carrying a nearly-degenerate direction (Compressed), or
// small derivative with a quantitatively nondegenerate plane (Good).
enum class CubeClassKind : std::uint8_t { Md, Compressed, Good };

struct CubeClassEntry {
    CubeClassKind kind = CubeClassKind::Md;
    std::uint8_t plane = 0;  // axis bitmask, set for Good cubes
};

/// Coordinate n-planes as axis bitmasks, lexicographic by axis set.
std::vector<std::uint8_t> coordinate_planes(int dim, int n);

/// Minimum of the seminorm over unit vectors of the plane: a fixed 5-degree
/// angular mesh plus small integer lattice directions.
double plane_min_seminorm(const Seminorm& sn, std::uint8_t plane, int dim);

struct Classification {
    int dim = 2, n = 1, m = 1;
    double eps = 0, delta = 0;
    int maxlevel = 0;
    std::vector<std::vector<CubeClassEntry>> levels;  // [level][raster]
    std::vector<std::vector<MdResult>> fits;          // same shape

    const CubeClassEntry& at(const CubeId& cube) const;
    const MdResult& fit(const CubeId& cube) const;
    std::vector<CubeId> cubes_of_kind(CubeClassKind kind) const;
};

/// Fits every cube of levels 0..maxlevel and assigns its class. Good cubes
/// receive the lexicographically first plane whose mesh minimum clears delta.
Classification classify_cubes(const SampledMap& map, double eps, double delta, int maxlevel,
                              const MdFitOptions& opts, int threads = 0);

struct CompressedBound {
    double content = 0;  // DP mapping content of the union of compressed triples
    double ratio = 0;    // content / (eps + delta)
    CellSet cells;
};
CompressedBound compressed_content_bound(const SampledMap& map, const Classification& cls, int threads = 0);

struct FarthestPlane {
    std::uint8_t plane = 0;
    double c = 0;
};
/// Brute force over coordinate n-planes: the plane maximizing the minimal
/// distance from its unit sphere (meshed) to the subspace spanned by
/// k_basis. Throws ArgumentError if the basis spans more than m dimensions.
FarthestPlane farthest_coordinate_plane(const std::vector<std::vector<double>>& k_basis, int dim, int n, int m);

// ---------------------------------------------------------------------------
// Coding
// ---------------------------------------------------------------------------

struct CodingOptions {
    int levels = -1;             // default min(depth - 1, 4)
    double eps_prime_factor = 1.0;  // bad threshold = eps * factor
    int window_factor = -1;      // dilation of shifted cubes; default = fit c0
    double eta = 0.05;           // ceiling for the unclassified remainder
};

struct Coding {
    int class_count = 0;
    std::vector<std::int32_t> cell_class;  // per finest cell; -1 for the remainder
    CellSet remainder;                     // G_md, measure < eta
    int word_cap = 0;                      // bad-ancestor count admitted per grid
};

// Word assignment over the third-shifted dyadic grids: per grid, each cell's
// word lists (level, child-position) of its bad ancestors from the top; cells
// sharing every word share a class. Cells exceeding the bad-ancestor budget
// form the remainder, whose measure stays below eta.
Coding coding_decomposition(const SampledMap& map, double eps, const CodingOptions& copts, const MdFitOptions& fit,
                            int threads = 0);

// ---------------------------------------------------------------------------
// Stopping time and pieces
// ---------------------------------------------------------------------------

struct StoppingForest {
    CubeId top;
    std::vector<std::vector<CubeId>> levels;        // S^0..S^K (possibly shorter)
    std::vector<std::vector<std::uint8_t>> planes;  // assigned plane per cube
    std::vector<double> level_measures;
    double worst_contraction = 0;  // max over i of measure(S^{i+1}) / measure(S^i)
};

/// Top-down stopping time under a top cube: descend until the parent's plane
/// degenerates (a unit vector of it drops below delta_prime), collect the
/// maximal such good cubes, re-anchor on their own planes, and repeat K times.
/// Throws StateError if the top cube is not Good.
StoppingForest stopping_time(const Classification& cls, const CubeId& top, double delta_prime, int K);

/// In-place cube rotation: coordinate permutation plus the translation that
/// fixes the cube setwise. Applied in exact lattice integers.
struct CubeRotation {
    CubeId cube;
    std::array<std::uint8_t, 4> perm{};  // axis a of the input feeds axis perm[a]
};

struct PiecewiseRotation {
    int dim = 2;
    int depth = 0;
    std::vector<std::vector<CubeRotation>> steps;  // innermost level first, top map last
    LatticePoint apply(const LatticePoint& p) const;
    PiecewiseRotation inverse() const;
};

/// The map f composed with the inverse rotation, resampled on the lattice.
SampledMap rotate_map(const SampledMap& map, const PiecewiseRotation& rotation);
/// Image of a cell set under the rotation (cells map to whole cells).
CellSet rotate_cells(const CellSet& cells, const PiecewiseRotation& rotation);

struct Piece {
    CubeId top;
    int coding_class = 0;
    std::vector<int> word;  // split-family indices per stopping level
    CellSet cells;
    std::vector<std::vector<CubeId>> t_cubes;  // T^0..T^ell
    PiecewiseRotation rotation;
};

struct PieceBuild {
    std::vector<Piece> pieces;
    CellSet leftover;
    double split_garbage_measure = 0;  // cubes discarded by the separated splitting
};

/// Splits each stopping level into separated families, enumerates the words,
/// intersects with the coding classes, subtracts the next stopping level and
/// the compressed triples, and attaches the clockwork rotations.
PieceBuild build_pieces(const SampledMap& map, const std::vector<StoppingForest>& forests,
                        const Coding& coding, const CellSet& compressed_triples, int lambda, double alpha_split);

struct BilipReport {
    double c_low = 0;
    double c_high = 0;
    std::size_t pair_count = 0;
};

// Two-sided constants of the supplemented map x -> (f(phi^-1 x), y-part) on
// the rotated piece: ratios max(d_X(f a, f b), |y(phi a) - y(phi b)|_inf)
// over |phi(a) - phi(b)|_inf, min and max over sampled lattice pairs.
// Throws ArgumentError when the piece holds fewer than two lattice points.
BilipReport verify_supplemented_bilipschitz(const SampledMap& map, const Piece& piece, std::size_t pair_cap,
                                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct PipelineOptions {
    double eps = 0.01;
    double delta = 0.2;
    double delta_prime = 0.05;
    int lambda = 5;
    int K = 6;
    int K1 = -1;             // default depth - 1
    double alpha = 0.05;
    double alpha_prime = -1;  // default alpha / 10
    double coding_eta = -1;   // default alpha_prime
    MdFitOptions fit;
    CodingOptions coding;
    std::size_t verify_pair_cap = 100000;
    std::uint64_t seed = 1234;
};

struct LevelReport {
    int level = 0;
    double nongood_content = 0;
};

struct FailureReport {
    std::string stage;
    std::string message;
    std::vector<LevelReport> per_level;
};

struct InitialLevel {
    bool found = false;
    int level = 0;
    std::vector<LevelReport> per_level;
};

/// Smallest level (1..K1) whose non-Good cubes carry mapping content below
/// alpha_prime; reports every probed level either way.
InitialLevel initial_level(const SampledMap& map, const Classification& cls, double alpha_prime, int K1,
                           int threads = 0);

struct PipelineResult {
    bool success = false;
    int start_level = 0;
    Classification classification;
    Coding coding;
    std::vector<StoppingForest> forests;
    std::vector<Piece> pieces;
    std::vector<BilipReport> piece_reports;
    CellSet leftover;
    double leftover_content = 0;
    double compressed_ratio = 0;
    std::optional<FailureReport> failure;
};

/// The full decomposition pipeline: classify, find the starting level, code,
/// run the stopping time under every good top cube, split, build pieces, and
/// verify each piece. A structured FailureReport (never an exception) records
/// an insufficient parameter schedule.
PipelineResult run_decomposition(const SampledMap& map, const PipelineOptions& opts, int threads = 0);

}  // namespace mapcontent
