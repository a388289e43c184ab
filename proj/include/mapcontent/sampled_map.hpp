#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mapcontent/dyadic.hpp"
#include "mapcontent/metric_space.hpp"

namespace mapcontent {

/// Parameters for the builtin map generators.
struct BuiltinParams {
    int n = 1;
    int m = 1;
    int depth = 4;
    int star_k = 2;                            // star9
    double scale = 1.0;                        // scaled projection
    std::vector<std::vector<double>> matrix;   // linear: rows = target dim, cols = n+m
};

// A map f: [0,1]^(n+m) -> X sampled on the full lattice at spacing 2^-depth.
// Values are interned target points; the oracle is shared and read-only.
// A map may carry a domain restriction (a CellSet); queries at lattice
// points outside the restricted domain are rejected with KeyError.
class SampledMap {
public:
    SampledMap(int n, int m, int depth, std::shared_ptr<const DistanceOracle> target,
               std::vector<PointId> values, double declared_lipschitz);

    static SampledMap from_builtin(const std::string& name, const BuiltinParams& params);

    int n() const { return n_; }
    int m() const { return m_; }
    int dim() const { return n_ + m_; }
    int depth() const { return depth_; }
    /// Lattice points per axis: 2^depth + 1.
    std::int32_t extent() const { return (std::int32_t{1} << depth_) + 1; }
    std::size_t lattice_size() const;

    double declared_lipschitz() const { return declared_lipschitz_; }
    /// Image-matching tolerance 2 * L_f * 2^-depth shared across the project.
    double eps_match() const;

    const DistanceOracle& target() const { return *target_; }
    std::shared_ptr<const DistanceOracle> target_ptr() const { return target_; }

    std::size_t lattice_linear(const LatticePoint& p) const;
    LatticePoint lattice_coords(std::size_t linear) const;
    /// Euclidean coordinates (components p_i * 2^-depth).
    void lattice_position(const LatticePoint& p, double* out) const;

    bool in_domain(const LatticePoint& p) const;
    const std::optional<CellSet>& domain() const { return domain_; }

    /// Target point at a lattice point. Throws KeyError outside the domain.
    PointId value(const LatticePoint& p) const;
    /// Same but clamps each coordinate into [0, 2^depth] first (used by the
    /// Extend boundary mode).
    PointId value_clamped(LatticePoint p) const;
    double target_distance(PointId a, PointId b) const { return target_->distance(a, b); }

    /// View of this map restricted to a cell set. Throws ArgumentError on an
    /// empty set.
    SampledMap restrict_to(const CellSet& cells) const;

    /// Grid map file: {"n", "m", "depth", "target": {...}, "values": [...]}.
    /// Finite targets store their matrix next to the file as <path>.dmat.
    void save_json(const std::string& path) const;

private:
    int n_, m_, depth_;
    std::shared_ptr<const DistanceOracle> target_;
    std::vector<PointId> values_;
    double declared_lipschitz_;
    std::optional<CellSet> domain_;
};

/// Star-tree map: on each cube Q_{a,b} (the bottom-left child of its parent
/// at level star_k - 1) the x-coordinate maps isometrically onto spike b of
/// star a, anchored at the star's center; elsewhere the values follow the
/// explicit 4-Lipschitz extension (spike offsets decay at rate 4 away from
/// the strips, horizontal gaps slide down the spike and along the backbone).
/// Requires depth >= k + 1 (ResolutionError otherwise).
SampledMap build_star_map(int k, int depth);

/// Max over axis-adjacent in-domain lattice pairs of d(f(p), f(q)) / 2^-D.
/// A lower bound for the true Lipschitz constant.
double lipschitz_estimate(const SampledMap& map);

/// Max over all in-domain lattice pairs of d(f(p), f(q)) / |p - q|_2
/// (exhaustive; intended for small depths and tests).
double lipschitz_all_pairs(const SampledMap& map);

SampledMap load_map_json(const std::string& path);

}  // namespace mapcontent
