#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mapcontent/errors.hpp"

namespace mapcontent {

inline constexpr int kMaxDim = 4;

/// Integer coordinates of a lattice point at some depth D: each component
/// lies in [0, 2^D] and stands for component * 2^-D.
using LatticePoint = std::array<std::int32_t, kMaxDim>;

/// A dyadic cube inside the unit cube: side 2^-level, lower corner
/// index * 2^-level. All cube geometry is exact integer arithmetic.
struct CubeId {
    int level = 0;
    int dim = 2;
    std::array<std::int32_t, kMaxDim> index{};

    double side() const { return 1.0 / static_cast<double>(std::int64_t{1} << level); }

    bool operator==(const CubeId& o) const {
        if (level != o.level || dim != o.dim) return false;
        for (int a = 0; a < dim; ++a)
            if (index[a] != o.index[a]) return false;
        return true;
    }
    /// Lexicographic on (level, index); used for all deterministic tie-breaks.
    bool operator<(const CubeId& o) const {
        if (level != o.level) return level < o.level;
        for (int a = 0; a < dim; ++a)
            if (index[a] != o.index[a]) return index[a] < o.index[a];
        return false;
    }

    static CubeId root(int dim) { return CubeId{0, dim, {}}; }
    CubeId parent() const;
    bool contains(const CubeId& other) const;  // closed-cube containment
    /// Row-major position among the 2^(dim*level) cubes of this level.
    std::size_t raster_index() const;
};

/// An axis-aligned union of same-level cubes: index ranges [lo, hi] per axis
/// (inclusive), already clipped to the unit cube when `clipped` is set.
/// Dilations CQ are represented this way.
struct Region {
    int level = 0;
    int dim = 2;
    std::array<std::int32_t, kMaxDim> lo{};
    std::array<std::int32_t, kMaxDim> hi{};
    bool clipped = false;
    bool empty = false;

    std::int64_t cube_count() const;
};

/// How to treat dilations that leave the unit cube. Clip drops the outside
/// part; Extend keeps the geometry and lets samplers clamp to the nearest
/// lattice point when evaluating the map.
enum class BoundaryMode { Clip, Extend };

/// Subdivide a cube into its 2^dim children. Throws DepthError when the cube
/// already sits at max_depth.
std::vector<CubeId> children(const CubeId& cube, int max_depth);

/// Concentric dilation by an odd factor, clipped to the unit cube.
/// Throws ArgumentError for even or non-positive factors.
Region dilate(const CubeId& cube, int factor);

/// Same, but optionally without clipping (Extend mode keeps out-of-range
/// indices so callers can clamp lattice queries themselves).
Region dilate(const CubeId& cube, int factor, BoundaryMode mode);

/// The smallest dyadic cube Q with x, y both inside the closed triple 3Q.
/// Ties between equal-size candidates go to the lexicographically smallest
/// index. x and y are lattice points at the given depth.
CubeId minimal_containing_cube(const LatticePoint& x, const LatticePoint& y, int dim, int depth);

/// Whether the closed triples of two same-or-different level cubes, dilated
/// by `factor`, intersect. Exact integer test.
bool dilations_intersect(const CubeId& a, const CubeId& b, int factor);

/// Subset of the finest-level cells (depth D): a bitmask over the 2^(dim*D)
/// cells in row-major order. Carries all set algebra used by the project.
class CellSet {
public:
    CellSet() = default;
    CellSet(int dim, int depth);

    static CellSet full(int dim, int depth);
    static CellSet of_cube(const CubeId& cube, int depth);
    static CellSet of_cubes(const std::vector<CubeId>& cubes, int dim, int depth);
    static CellSet of_region(const Region& region, int depth);

    int dim() const { return dim_; }
    int depth() const { return depth_; }
    std::size_t cell_count() const { return count_; }
    bool empty_set() const { return count_ == 0; }
    double measure() const;

    void set_cell(std::size_t linear);
    bool test_cell(std::size_t linear) const;
    std::size_t total_cells() const { return total_; }

    CellSet set_union(const CellSet& o) const;
    CellSet set_intersection(const CellSet& o) const;
    CellSet set_difference(const CellSet& o) const;
    CellSet complement() const;
    bool is_subset_of(const CellSet& o) const;
    bool intersects(const CellSet& o) const;
    bool operator==(const CellSet& o) const;

    /// Does the closed cube contain at least one cell of this set?
    bool meets_cube(const CubeId& cube) const;
    /// Are all cells of the cube contained in this set?
    bool contains_cube(const CubeId& cube) const;
    /// Is a lattice point a corner of some cell in the set?
    bool contains_lattice_point(const LatticePoint& p) const;

    std::vector<std::size_t> cells() const;
    LatticePoint cell_coords(std::size_t linear) const;
    std::size_t cell_linear(const LatticePoint& c) const;

    /// Run-length encoding of the sorted linear cell indices: pairs
    /// (start, length). Used by the certificate JSON format.
    std::vector<std::pair<std::size_t, std::size_t>> run_length_encode() const;

private:
    void recount();

    int dim_ = 0;
    int depth_ = 0;
    std::size_t total_ = 0;
    std::size_t count_ = 0;
    std::vector<std::uint64_t> bits_;
};

struct SplitResult {
    std::vector<std::vector<CubeId>> families;
    std::vector<CubeId> discarded;  // B: total measure < eta
};

/// Greedy separated splitting: partitions almost-disjoint cubes into
/// families whose Lambda-dilations are pairwise disjoint, plus a leftover
/// family of measure < eta. Largest cubes are placed first; ties go to the
/// lexicographically smaller cube. Throws ArgumentError if eta <= 0 or
/// Lambda is not an odd integer > 3.
SplitResult split_separated(std::vector<CubeId> cubes, int lambda, double eta);

/// Analytic bound on the family count produced by split_separated, from the
/// one-round contraction rate c = 1/(1+(2*Lambda+1)^dim).
int split_family_bound(int dim, int lambda, double eta);

double cube_measure(const CubeId& cube);

/// Exact pairwise interior-disjointness check for a cube family.
bool interiors_disjoint(const std::vector<CubeId>& cubes);

}  // namespace mapcontent
