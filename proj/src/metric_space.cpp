#include "mapcontent/metric_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

namespace mapcontent {

namespace {

std::uint64_t hash_bytes(const void* data, std::size_t len) {
    // FNV-1a
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// EuclideanSpace
// ---------------------------------------------------------------------------

EuclideanSpace::EuclideanSpace(int dim) : dim_(dim) {
    if (dim <= 0) throw ArgumentError("euclidean dimension must be positive");
}

PointId EuclideanSpace::intern(std::span<const double> coords) {
    if (static_cast<int>(coords.size()) != dim_) throw ArgumentError("coordinate count mismatch");
    std::uint64_t h = hash_bytes(coords.data(), coords.size() * sizeof(double));
    auto& bucket = buckets_[h];
    for (PointId id : bucket) {
        if (std::memcmp(&flat_[static_cast<std::size_t>(id) * dim_], coords.data(), dim_ * sizeof(double)) == 0)
            return id;
    }
    PointId id = static_cast<PointId>(count_++);
    flat_.insert(flat_.end(), coords.begin(), coords.end());
    bucket.push_back(id);
    return id;
}

std::span<const double> EuclideanSpace::coords(PointId p) const {
    if (p >= count_) throw KeyError("unknown point id");
    return {&flat_[static_cast<std::size_t>(p) * dim_], static_cast<std::size_t>(dim_)};
}

double EuclideanSpace::distance(PointId a, PointId b) const {
    if (a >= count_ || b >= count_) throw KeyError("unknown point id");
    const double* pa = &flat_[static_cast<std::size_t>(a) * dim_];
    const double* pb = &flat_[static_cast<std::size_t>(b) * dim_];
    double s = 0;
    for (int i = 0; i < dim_; ++i) {
        double d = pa[i] - pb[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// FiniteMatrixSpace
// ---------------------------------------------------------------------------

FiniteMatrixSpace::FiniteMatrixSpace(std::size_t n, std::vector<double> matrix, double warn_tol) : n_(n) {
    if (matrix.size() != n * n) throw ArgumentError("distance matrix size mismatch");
    matrix_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double asym = std::abs(matrix[i * n + j] - matrix[j * n + i]);
            worst_asymmetry_ = std::max(worst_asymmetry_, asym);
            matrix_[i * n + j] = 0.5 * (matrix[i * n + j] + matrix[j * n + i]);
        }
        matrix_[i * n + i] = 0;
    }
    if (worst_asymmetry_ > warn_tol)
        std::cerr << "warning: distance matrix asymmetry " << worst_asymmetry_ << " exceeds " << warn_tol
                  << "; symmetrized by averaging\n";
}

double FiniteMatrixSpace::distance(PointId a, PointId b) const {
    if (a >= n_ || b >= n_) throw KeyError("unknown point id");
    return matrix_[static_cast<std::size_t>(a) * n_ + b];
}

std::shared_ptr<FiniteMatrixSpace> FiniteMatrixSpace::load_dmat(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open distance matrix file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "DMATv001", 8) != 0)
        throw ArgumentError("bad distance matrix magic in " + path);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n == 0) throw ArgumentError("bad point count in " + path);
    std::vector<double> m(n * n);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ArgumentError("truncated distance matrix in " + path);
    return std::make_shared<FiniteMatrixSpace>(static_cast<std::size_t>(n), std::move(m));
}

void FiniteMatrixSpace::save_dmat(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write distance matrix file: " + path);
    out.write("DMATv001", 8);
    std::uint64_t n = n_;
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(matrix_.data()),
              static_cast<std::streamsize>(matrix_.size() * sizeof(double)));
}

// ---------------------------------------------------------------------------
// StarTree
// ---------------------------------------------------------------------------

StarTree::StarTree(int k) : k_(k) {
    if (k < 2 || k > 12) throw ArgumentError("star tree parameter k must lie in [2, 12]");
}

PointId StarTree::intern(const Node& n) {
    std::uint64_t h = hash_bytes(&n, sizeof(Node));
    auto& bucket = buckets_[h];
    for (PointId id : bucket) {
        const Node& m = nodes_[id];
        if (m.star == n.star && m.spike == n.spike && m.pos == n.pos) return id;
    }
    PointId id = static_cast<PointId>(nodes_.size());
    nodes_.push_back(n);
    bucket.push_back(id);
    return id;
}

PointId StarTree::backbone_point(double t) {
    if (t < 0 || t > 1) throw ArgumentError("backbone position out of [0,1]");
    return intern(Node{-1, -1, t});
}

PointId StarTree::spike_point(int star, int spike, double offset) {
    if (star < 0 || star >= star_count()) throw ArgumentError("star index out of range");
    if (spike < 0 || spike >= spikes_per_star()) throw ArgumentError("spike index out of range");
    if (offset < 0 || offset > spike_length() * (1 + 1e-12)) throw ArgumentError("spike offset out of range");
    if (offset == 0) {
        // Center vertex: canonically a backbone point at the attachment.
        double attach = static_cast<double>(star) / static_cast<double>(star_count());
        return intern(Node{-1, -1, attach});
    }
    return intern(Node{star, spike, offset});
}

double StarTree::total_length() const { return 1.0 + std::ldexp(1.0, k_ - 2); }

double StarTree::backbone_position(PointId p) const {
    const Node& n = nodes_[p];
    if (n.star < 0) return n.pos;
    return static_cast<double>(n.star) / static_cast<double>(star_count());
}

StarTree::PointInfo StarTree::point_info(PointId p) const {
    if (p >= nodes_.size()) throw KeyError("unknown point id");
    const Node& n = nodes_[p];
    return PointInfo{n.star, n.spike, n.pos};
}

double StarTree::distance(PointId a, PointId b) const {
    if (a >= nodes_.size() || b >= nodes_.size()) throw KeyError("unknown point id");
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    auto attach = [&](const Node& n) { return static_cast<double>(n.star) / static_cast<double>(star_count()); };
    if (na.star < 0 && nb.star < 0) return std::abs(na.pos - nb.pos);
    if (na.star < 0) return nb.pos + std::abs(attach(nb) - na.pos);
    if (nb.star < 0) return na.pos + std::abs(attach(na) - nb.pos);
    if (na.star == nb.star) {
        if (na.spike == nb.spike) return std::abs(na.pos - nb.pos);
        return na.pos + nb.pos;  // through the shared center
    }
    return na.pos + std::abs(attach(na) - attach(nb)) + nb.pos;
}

std::shared_ptr<StarTree> star_tree(int k) { return std::make_shared<StarTree>(k); }

// ---------------------------------------------------------------------------
// ProductWithCube
// ---------------------------------------------------------------------------

ProductWithCube::ProductWithCube(std::shared_ptr<const DistanceOracle> base, int m)
    : base_(std::move(base)), m_(m) {
    if (m < 0 || m > 4) throw ArgumentError("cube factor m must lie in [0, 4]");
    if (!base_) throw ArgumentError("null base oracle");
}

PointId ProductWithCube::intern(PointId base_point, std::span<const double> y) {
    if (static_cast<int>(y.size()) != m_) throw ArgumentError("cube coordinate count mismatch");
    Entry e{base_point, {}};
    for (int i = 0; i < m_; ++i) e.y[i] = y[i];
    std::uint64_t h = hash_bytes(&e, sizeof(Entry));
    auto& bucket = buckets_[h];
    for (PointId id : bucket) {
        const Entry& f = points_[id];
        if (f.base == e.base && std::memcmp(f.y.data(), e.y.data(), sizeof(e.y)) == 0) return id;
    }
    PointId id = static_cast<PointId>(points_.size());
    points_.push_back(e);
    bucket.push_back(id);
    return id;
}

double ProductWithCube::distance(PointId a, PointId b) const {
    if (a >= points_.size() || b >= points_.size()) throw KeyError("unknown point id");
    const Entry& ea = points_[a];
    const Entry& eb = points_[b];
    double d = base_->distance(ea.base, eb.base);
    for (int i = 0; i < m_; ++i) d = std::max(d, std::abs(ea.y[i] - eb.y[i]));
    return d;
}

std::shared_ptr<ProductWithCube> product_with_cube(std::shared_ptr<const DistanceOracle> base, int m) {
    return std::make_shared<ProductWithCube>(std::move(base), m);
}

// ---------------------------------------------------------------------------

MetricCheckReport check_metric_axioms(const DistanceOracle& space, std::span<const PointId> pts,
                                      std::size_t triples, Rng& rng) {
    MetricCheckReport rep;
    if (pts.empty()) return rep;
    for (std::size_t t = 0; t < triples; ++t) {
        PointId a = pts[rng.next_below(pts.size())];
        PointId b = pts[rng.next_below(pts.size())];
        PointId c = pts[rng.next_below(pts.size())];
        double dab = space.distance(a, b);
        double dba = space.distance(b, a);
        double dbc = space.distance(b, c);
        double dac = space.distance(a, c);
        rep.worst_symmetry = std::max(rep.worst_symmetry, std::abs(dab - dba));
        rep.worst_triangle = std::max(rep.worst_triangle, dac - dab - dbc);
        rep.worst_identity = std::max(rep.worst_identity, std::abs(space.distance(a, a)));
    }
    return rep;
}

}  // namespace mapcontent
