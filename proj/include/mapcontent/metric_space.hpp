#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mapcontent/errors.hpp"
#include "mapcontent/rng.hpp"

namespace mapcontent {

using PointId = std::uint32_t;

// Target spaces are exposed through interned point ids: equal ids are equal
// points, so exact-equality tests (coarse injectivity, image dedup) cost
// nothing. Oracles are immutable after construction and safe to query
// concurrently.
class DistanceOracle {
public:
    virtual ~DistanceOracle() = default;
    virtual double distance(PointId a, PointId b) const = 0;
    virtual std::size_t point_count() const = 0;
    virtual std::string kind() const = 0;
};

/// R^k with the Euclidean metric; points interned by exact coordinates.
class EuclideanSpace final : public DistanceOracle {
public:
    explicit EuclideanSpace(int dim);

    PointId intern(std::span<const double> coords);
    std::span<const double> coords(PointId p) const;
    int dim() const { return dim_; }

    double distance(PointId a, PointId b) const override;
    std::size_t point_count() const override { return count_; }
    std::string kind() const override { return "euclidean"; }

private:
    int dim_;
    std::size_t count_ = 0;
    std::vector<double> flat_;
    std::unordered_map<std::uint64_t, std::vector<PointId>> buckets_;
};

/// Finite metric space backed by an explicit distance matrix. Asymmetric
/// inputs are symmetrized by averaging; asymmetry beyond `warn_tol` is
/// recorded (and reported by the loader).
class FiniteMatrixSpace final : public DistanceOracle {
public:
    FiniteMatrixSpace(std::size_t n, std::vector<double> matrix, double warn_tol = 1e-9);

    double distance(PointId a, PointId b) const override;
    std::size_t point_count() const override { return n_; }
    std::string kind() const override { return "finite"; }
    double worst_asymmetry() const { return worst_asymmetry_; }

    /// Binary format: magic "DMATv001", u64 little-endian count N, then
    /// N*N float64 row-major entries.
    static std::shared_ptr<FiniteMatrixSpace> load_dmat(const std::string& path);
    void save_dmat(const std::string& path) const;

private:
    std::size_t n_;
    std::vector<double> matrix_;
    double worst_asymmetry_ = 0;
};

// The simplicial tree used by the counterexample harness: a unit backbone
// with 2^(k-1) stars attached at i/2^(k-1); each star has 2^(k-1) spikes of
// length 2^-k glued at its center vertex. Points are symbolic (component +
// offset) and distances are closed-form path lengths, so queries are exact.
class StarTree final : public DistanceOracle {
public:
    explicit StarTree(int k);

    /// Point on the backbone at position t in [0, 1].
    PointId backbone_point(double t);
    /// Point on spike `spike` of star `star` at offset s in (0, 2^-k];
    /// offset 0 collapses to the star's center on the backbone.
    PointId spike_point(int star, int spike, double offset);

    int k() const { return k_; }
    int star_count() const { return 1 << (k_ - 1); }
    int spikes_per_star() const { return 1 << (k_ - 1); }
    double spike_length() const { return 1.0 / static_cast<double>(1 << k_); }
    /// Exact total edge length: 1 + 2^(k-2).
    double total_length() const;

    double distance(PointId a, PointId b) const override;
    std::size_t point_count() const override { return nodes_.size(); }
    std::string kind() const override { return "startree"; }

    bool is_backbone(PointId p) const { return nodes_[p].star < 0; }
    double backbone_position(PointId p) const;

    struct PointInfo {
        int star;
        int spike;
        double pos;
    };
    PointInfo point_info(PointId p) const;

private:
    struct Node {
        int star;   // -1 for backbone points
        int spike;  // valid when star >= 0
        double pos; // backbone position, or spike offset
    };
    PointId intern(const Node& n);

    int k_;
    std::vector<Node> nodes_;
    std::unordered_map<std::uint64_t, std::vector<PointId>> buckets_;
};

std::shared_ptr<StarTree> star_tree(int k);

/// X x [0,1]^m with the max metric d((x,y),(x',y')) = max(d_X, |y-y'|_inf).
class ProductWithCube final : public DistanceOracle {
public:
    ProductWithCube(std::shared_ptr<const DistanceOracle> base, int m);

    PointId intern(PointId base_point, std::span<const double> y);

    double distance(PointId a, PointId b) const override;
    std::size_t point_count() const override { return points_.size(); }
    std::string kind() const override { return "product"; }
    int cube_factor() const { return m_; }

private:
    std::shared_ptr<const DistanceOracle> base_;
    int m_;
    struct Entry {
        PointId base;
        std::array<double, 4> y;
    };
    std::vector<Entry> points_;
    std::unordered_map<std::uint64_t, std::vector<PointId>> buckets_;
};

std::shared_ptr<ProductWithCube> product_with_cube(std::shared_ptr<const DistanceOracle> base, int m);

struct MetricCheckReport {
    double worst_symmetry = 0;
    double worst_triangle = 0;   // max of d(a,c) - d(a,b) - d(b,c) over triples
    double worst_identity = 0;   // max of |d(p,p)|
};

/// Spot-check of the metric axioms over random triples of the given points.
MetricCheckReport check_metric_axioms(const DistanceOracle& space, std::span<const PointId> pts,
                                      std::size_t triples, Rng& rng);

}  // namespace mapcontent
