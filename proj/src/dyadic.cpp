#include "mapcontent/dyadic.hpp"

#include <algorithm>
#include <cmath>

namespace mapcontent {

CubeId CubeId::parent() const {
    if (level == 0) throw DepthError("root cube has no parent");
    CubeId p{level - 1, dim, {}};
    for (int a = 0; a < dim; ++a) p.index[a] = index[a] >> 1;
    return p;
}

bool CubeId::contains(const CubeId& other) const {
    if (other.dim != dim || other.level < level) return false;
    int shift = other.level - level;
    for (int a = 0; a < dim; ++a)
        if ((other.index[a] >> shift) != index[a]) return false;
    return true;
}

std::size_t CubeId::raster_index() const {
    std::size_t r = 0;
    for (int a = dim - 1; a >= 0; --a) r = (r << level) | static_cast<std::size_t>(index[a]);
    return r;
}

std::vector<CubeId> children(const CubeId& cube, int max_depth) {
    if (cube.level >= max_depth)
        throw DepthError("cube at level " + std::to_string(cube.level) + " cannot be subdivided below depth " +
                         std::to_string(max_depth));
    std::vector<CubeId> out;
    out.reserve(std::size_t{1} << cube.dim);
    int corners = 1 << cube.dim;
    for (int c = 0; c < corners; ++c) {
        CubeId child{cube.level + 1, cube.dim, {}};
        for (int a = 0; a < cube.dim; ++a) child.index[a] = 2 * cube.index[a] + ((c >> a) & 1);
        out.push_back(child);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Region dilate(const CubeId& cube, int factor) { return dilate(cube, factor, BoundaryMode::Clip); }

Region dilate(const CubeId& cube, int factor, BoundaryMode mode) {
    if (factor <= 0 || factor % 2 == 0) throw ArgumentError("dilation factor must be an odd positive integer");
    int half = (factor - 1) / 2;
    Region r;
    r.level = cube.level;
    r.dim = cube.dim;
    std::int32_t max_index = static_cast<std::int32_t>((std::int64_t{1} << cube.level) - 1);
    for (int a = 0; a < cube.dim; ++a) {
        std::int32_t lo = cube.index[a] - half;
        std::int32_t hi = cube.index[a] + half;
        if (mode == BoundaryMode::Clip) {
            if (lo < 0 || hi > max_index) r.clipped = true;
            lo = std::max<std::int32_t>(lo, 0);
            hi = std::min(hi, max_index);
        } else {
            if (lo < 0 || hi > max_index) r.clipped = true;
        }
        if (lo > hi) r.empty = true;
        r.lo[a] = lo;
        r.hi[a] = hi;
    }
    return r;
}

std::int64_t Region::cube_count() const {
    if (empty) return 0;
    std::int64_t n = 1;
    for (int a = 0; a < dim; ++a) n *= (hi[a] - lo[a] + 1);
    return n;
}

CubeId minimal_containing_cube(const LatticePoint& x, const LatticePoint& y, int dim, int depth) {
    // Search from the finest level up; feasibility is monotone (3Q of a
    // parent contains 3Q of a child), so the first feasible level is minimal.
    for (int k = depth; k >= 0; --k) {
        std::int64_t scale = std::int64_t{1} << (depth - k);
        std::int32_t max_index = static_cast<std::int32_t>((std::int64_t{1} << k) - 1);
        CubeId q{k, dim, {}};
        bool ok = true;
        for (int a = 0; a < dim && ok; ++a) {
            // x in 3Q <=> (j-1)*scale <= x_a <= (j+2)*scale.
            auto range_for = [&](std::int64_t p) {
                std::int64_t jmin = (p + scale - 1) / scale - 2;  // ceil(p/scale) - 2
                std::int64_t jmax = p / scale + 1;                // floor(p/scale) + 1
                return std::pair<std::int64_t, std::int64_t>{jmin, jmax};
            };
            auto [xlo, xhi] = range_for(x[a]);
            auto [ylo, yhi] = range_for(y[a]);
            std::int64_t lo = std::max({xlo, ylo, std::int64_t{0}});
            std::int64_t hi = std::min({xhi, yhi, static_cast<std::int64_t>(max_index)});
            if (lo > hi) {
                ok = false;
            } else {
                q.index[a] = static_cast<std::int32_t>(lo);  // lexicographically smallest corner
            }
        }
        if (ok) return q;
    }
    // Level 0 always succeeds: 3*Q0 covers the unit cube.
    return CubeId::root(dim);
}

bool dilations_intersect(const CubeId& a, const CubeId& b, int factor) {
    if (factor <= 0 || factor % 2 == 0) throw ArgumentError("dilation factor must be an odd positive integer");
    int half = (factor - 1) / 2;
    int m = std::max(a.level, b.level);
    // Closed boxes [lo, hi] in units of 2^-m.
    for (int axis = 0; axis < a.dim; ++axis) {
        std::int64_t alo = (static_cast<std::int64_t>(a.index[axis]) - half) << (m - a.level);
        std::int64_t ahi = (static_cast<std::int64_t>(a.index[axis]) + half + 1) << (m - a.level);
        std::int64_t blo = (static_cast<std::int64_t>(b.index[axis]) - half) << (m - b.level);
        std::int64_t bhi = (static_cast<std::int64_t>(b.index[axis]) + half + 1) << (m - b.level);
        if (ahi < blo || bhi < alo) return false;
    }
    return true;
}

CellSet::CellSet(int dim, int depth) : dim_(dim), depth_(depth) {
    total_ = std::size_t{1} << (dim * depth);
    bits_.assign((total_ + 63) / 64, 0);
}

CellSet CellSet::full(int dim, int depth) {
    CellSet s(dim, depth);
    for (auto& w : s.bits_) w = ~std::uint64_t{0};
    // Clear the tail bits beyond total_.
    std::size_t rem = s.total_ % 64;
    if (rem != 0) s.bits_.back() = (std::uint64_t{1} << rem) - 1;
    s.count_ = s.total_;
    return s;
}

CellSet CellSet::of_cube(const CubeId& cube, int depth) {
    CellSet s(cube.dim, depth);
    Region r;
    r.level = cube.level;
    r.dim = cube.dim;
    for (int a = 0; a < cube.dim; ++a) {
        r.lo[a] = cube.index[a];
        r.hi[a] = cube.index[a];
    }
    return of_region(r, depth);
}

CellSet CellSet::of_cubes(const std::vector<CubeId>& cubes, int dim, int depth) {
    CellSet s(dim, depth);
    for (const auto& c : cubes) s = s.set_union(of_cube(c, depth));
    return s;
}

CellSet CellSet::of_region(const Region& region, int depth) {
    CellSet s(region.dim, depth);
    if (region.empty) return s;
    if (region.level > depth) throw DepthError("region finer than cell resolution");
    int shift = depth - region.level;
    std::int64_t max_cell = (std::int64_t{1} << depth) - 1;
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (int a = 0; a < region.dim; ++a) {
        lo[a] = std::max<std::int64_t>(static_cast<std::int64_t>(region.lo[a]) << shift, 0);
        hi[a] = std::min<std::int64_t>(((static_cast<std::int64_t>(region.hi[a]) + 1) << shift) - 1, max_cell);
        if (lo[a] > hi[a]) return s;
    }
    // Row-major fill.
    std::array<std::int64_t, kMaxDim> c = lo;
    while (true) {
        std::size_t linear = 0;
        for (int a = region.dim - 1; a >= 0; --a) linear = (linear << depth) | static_cast<std::size_t>(c[a]);
        s.bits_[linear >> 6] |= (std::uint64_t{1} << (linear & 63));
        int a = 0;
        for (; a < region.dim; ++a) {
            if (++c[a] <= hi[a]) break;
            c[a] = lo[a];
        }
        if (a == region.dim) break;
    }
    s.recount();
    return s;
}

double CellSet::measure() const {
    return static_cast<double>(count_) / static_cast<double>(total_);
}

void CellSet::set_cell(std::size_t linear) {
    std::uint64_t mask = std::uint64_t{1} << (linear & 63);
    if (!(bits_[linear >> 6] & mask)) {
        bits_[linear >> 6] |= mask;
        ++count_;
    }
}

bool CellSet::test_cell(std::size_t linear) const {
    return (bits_[linear >> 6] >> (linear & 63)) & 1;
}

void CellSet::recount() {
    std::size_t n = 0;
    for (auto w : bits_) n += static_cast<std::size_t>(__builtin_popcountll(w));
    count_ = n;
}

CellSet CellSet::set_union(const CellSet& o) const {
    CellSet s = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) s.bits_[i] |= o.bits_[i];
    s.recount();
    return s;
}

CellSet CellSet::set_intersection(const CellSet& o) const {
    CellSet s = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) s.bits_[i] &= o.bits_[i];
    s.recount();
    return s;
}

CellSet CellSet::set_difference(const CellSet& o) const {
    CellSet s = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) s.bits_[i] &= ~o.bits_[i];
    s.recount();
    return s;
}

CellSet CellSet::complement() const { return full(dim_, depth_).set_difference(*this); }

bool CellSet::is_subset_of(const CellSet& o) const {
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] & ~o.bits_[i]) return false;
    return true;
}

bool CellSet::intersects(const CellSet& o) const {
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] & o.bits_[i]) return true;
    return false;
}

bool CellSet::operator==(const CellSet& o) const {
    return dim_ == o.dim_ && depth_ == o.depth_ && bits_ == o.bits_;
}

bool CellSet::meets_cube(const CubeId& cube) const {
    if (cube.level > depth_) throw DepthError("cube finer than cell resolution");
    int shift = depth_ - cube.level;
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (int a = 0; a < dim_; ++a) {
        lo[a] = static_cast<std::int64_t>(cube.index[a]) << shift;
        hi[a] = ((static_cast<std::int64_t>(cube.index[a]) + 1) << shift) - 1;
    }
    std::array<std::int64_t, kMaxDim> c = lo;
    while (true) {
        std::size_t linear = 0;
        for (int a = dim_ - 1; a >= 0; --a) linear = (linear << depth_) | static_cast<std::size_t>(c[a]);
        if (test_cell(linear)) return true;
        int a = 0;
        for (; a < dim_; ++a) {
            if (++c[a] <= hi[a]) break;
            c[a] = lo[a];
        }
        if (a == dim_) break;
    }
    return false;
}

bool CellSet::contains_cube(const CubeId& cube) const {
    CellSet cs = of_cube(cube, depth_);
    return cs.is_subset_of(*this);
}

bool CellSet::contains_lattice_point(const LatticePoint& p) const {
    std::int64_t max_cell = (std::int64_t{1} << depth_) - 1;
    // A lattice point belongs to the set when one of its incident cells does.
    int corners = 1 << dim_;
    for (int c = 0; c < corners; ++c) {
        std::array<std::int64_t, kMaxDim> cell{};
        bool ok = true;
        for (int a = 0; a < dim_; ++a) {
            cell[a] = static_cast<std::int64_t>(p[a]) - ((c >> a) & 1);
            if (cell[a] < 0 || cell[a] > max_cell) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        std::size_t linear = 0;
        for (int a = dim_ - 1; a >= 0; --a) linear = (linear << depth_) | static_cast<std::size_t>(cell[a]);
        if (test_cell(linear)) return true;
    }
    return false;
}

std::vector<std::size_t> CellSet::cells() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t w = 0; w < bits_.size(); ++w) {
        std::uint64_t word = bits_[w];
        while (word) {
            int b = __builtin_ctzll(word);
            out.push_back(w * 64 + static_cast<std::size_t>(b));
            word &= word - 1;
        }
    }
    return out;
}

LatticePoint CellSet::cell_coords(std::size_t linear) const {
    LatticePoint p{};
    std::size_t mask = (std::size_t{1} << depth_) - 1;
    for (int a = 0; a < dim_; ++a) {
        p[a] = static_cast<std::int32_t>(linear & mask);
        linear >>= depth_;
    }
    return p;
}

std::size_t CellSet::cell_linear(const LatticePoint& c) const {
    std::size_t linear = 0;
    for (int a = dim_ - 1; a >= 0; --a) linear = (linear << depth_) | static_cast<std::size_t>(c[a]);
    return linear;
}

std::vector<std::pair<std::size_t, std::size_t>> CellSet::run_length_encode() const {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    auto idx = cells();
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t start = idx[i];
        std::size_t len = 1;
        while (i + len < idx.size() && idx[i + len] == start + len) ++len;
        runs.emplace_back(start, len);
        i += len;
    }
    return runs;
}

double cube_measure(const CubeId& cube) {
    return std::pow(cube.side(), cube.dim);
}

bool interiors_disjoint(const std::vector<CubeId>& cubes) {
    // Two dyadic cubes have intersecting interiors iff one contains the other.
    for (std::size_t i = 0; i < cubes.size(); ++i)
        for (std::size_t j = i + 1; j < cubes.size(); ++j)
            if (cubes[i].contains(cubes[j]) || cubes[j].contains(cubes[i])) return false;
    return true;
}

int split_family_bound(int dim, int lambda, double eta) {
    double c = 1.0 / (1.0 + std::pow(2.0 * lambda + 1.0, dim));
    return static_cast<int>(std::ceil(std::log(eta) / std::log(1.0 - c)));
}

SplitResult split_separated(std::vector<CubeId> cubes, int lambda, double eta) {
    if (eta <= 0) throw ArgumentError("eta must be positive");
    if (lambda <= 3 || lambda % 2 == 0) throw ArgumentError("lambda must be an odd integer > 3");
    SplitResult result;
    if (cubes.empty()) return result;

    // Largest first; lexicographic index breaks ties.
    std::sort(cubes.begin(), cubes.end());
    std::vector<bool> taken(cubes.size(), false);
    std::size_t remaining = cubes.size();

    auto remaining_measure = [&] {
        double m = 0;
        for (std::size_t i = 0; i < cubes.size(); ++i)
            if (!taken[i]) m += cube_measure(cubes[i]);
        return m;
    };

    // Keep placing cubes into families; only once the analytic family budget
    // is spent may the (provably small) remainder be discarded.
    const int budget = split_family_bound(cubes[0].dim, lambda, eta);
    while (remaining > 0 &&
           !(static_cast<int>(result.families.size()) >= budget && remaining_measure() < eta)) {
        std::vector<CubeId> family;
        for (std::size_t i = 0; i < cubes.size(); ++i) {
            if (taken[i]) continue;
            bool separated = true;
            for (const auto& q : family) {
                if (dilations_intersect(cubes[i], q, lambda)) {
                    separated = false;
                    break;
                }
            }
            if (separated) {
                family.push_back(cubes[i]);
                taken[i] = true;
                --remaining;
            }
        }
        result.families.push_back(std::move(family));
    }
    for (std::size_t i = 0; i < cubes.size(); ++i)
        if (!taken[i]) result.discarded.push_back(cubes[i]);
    return result;
}

}  // namespace mapcontent
