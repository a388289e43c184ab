#include "mapcontent/sampled_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace mapcontent {

namespace {

// Memory budget from the design notes: (2^D+1)^d point ids.
int max_depth_for_dim(int dim) {
    switch (dim) {
        case 1: return 16;
        case 2: return 8;
        case 3: return 5;
        default: return 3;
    }
}

}  // namespace

SampledMap::SampledMap(int n, int m, int depth, std::shared_ptr<const DistanceOracle> target,
                       std::vector<PointId> values, double declared_lipschitz)
    : n_(n), m_(m), depth_(depth), target_(std::move(target)), values_(std::move(values)),
      declared_lipschitz_(declared_lipschitz) {
    if (n_ < 0 || m_ < 0 || dim() < 1 || dim() > kMaxDim) throw ArgumentError("bad split n + m");
    if (depth_ < 1) throw ArgumentError("depth must be at least 1");
    if (depth_ > max_depth_for_dim(dim()))
        throw ArgumentError("depth " + std::to_string(depth_) + " exceeds the memory budget for dimension " +
                            std::to_string(dim()));
    if (!target_) throw ArgumentError("null target oracle");
    if (values_.size() != lattice_size()) throw ArgumentError("value array does not match the lattice");
}

std::size_t SampledMap::lattice_size() const {
    std::size_t s = 1;
    for (int a = 0; a < dim(); ++a) s *= static_cast<std::size_t>(extent());
    return s;
}

std::size_t SampledMap::lattice_linear(const LatticePoint& p) const {
    std::size_t linear = 0;
    for (int a = dim() - 1; a >= 0; --a)
        linear = linear * static_cast<std::size_t>(extent()) + static_cast<std::size_t>(p[a]);
    return linear;
}

LatticePoint SampledMap::lattice_coords(std::size_t linear) const {
    LatticePoint p{};
    for (int a = 0; a < dim(); ++a) {
        p[a] = static_cast<std::int32_t>(linear % static_cast<std::size_t>(extent()));
        linear /= static_cast<std::size_t>(extent());
    }
    return p;
}

void SampledMap::lattice_position(const LatticePoint& p, double* out) const {
    double h = std::ldexp(1.0, -depth_);
    for (int a = 0; a < dim(); ++a) out[a] = static_cast<double>(p[a]) * h;
}

double SampledMap::eps_match() const { return 2.0 * declared_lipschitz_ * std::ldexp(1.0, -depth_); }

bool SampledMap::in_domain(const LatticePoint& p) const {
    for (int a = 0; a < dim(); ++a)
        if (p[a] < 0 || p[a] >= extent()) return false;
    if (domain_ && !domain_->contains_lattice_point(p)) return false;
    return true;
}

PointId SampledMap::value(const LatticePoint& p) const {
    if (!in_domain(p)) throw KeyError("lattice point outside the map domain");
    return values_[lattice_linear(p)];
}

PointId SampledMap::value_clamped(LatticePoint p) const {
    for (int a = 0; a < dim(); ++a) p[a] = std::clamp<std::int32_t>(p[a], 0, extent() - 1);
    if (domain_ && !domain_->contains_lattice_point(p)) throw KeyError("lattice point outside the map domain");
    return values_[lattice_linear(p)];
}

SampledMap SampledMap::restrict_to(const CellSet& cells) const {
    if (cells.empty_set()) throw ArgumentError("cannot restrict to an empty cell set");
    if (cells.dim() != dim() || cells.depth() != depth_) throw ArgumentError("cell set resolution mismatch");
    SampledMap view = *this;
    view.domain_ = domain_ ? domain_->set_intersection(cells) : cells;
    if (view.domain_->empty_set()) throw ArgumentError("restriction is empty");
    return view;
}

// ---------------------------------------------------------------------------
// Builtins
// ---------------------------------------------------------------------------

namespace {

SampledMap make_projection(const BuiltinParams& p) {
    int d = p.n + p.m;
    auto space = std::make_shared<EuclideanSpace>(std::max(p.n, 1));
    std::int64_t extent = (std::int64_t{1} << p.depth) + 1;
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(extent);
    std::vector<PointId> values(total);
    double h = std::ldexp(1.0, -p.depth);
    std::vector<double> coords(static_cast<std::size_t>(std::max(p.n, 1)), 0.0);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        for (int a = 0; a < d; ++a) {
            auto c = static_cast<std::int32_t>(rest % static_cast<std::size_t>(extent));
            rest /= static_cast<std::size_t>(extent);
            if (a < p.n) coords[static_cast<std::size_t>(a)] = p.scale * static_cast<double>(c) * h;
        }
        values[i] = space->intern(coords);
    }
    return SampledMap(p.n, p.m, p.depth, space, std::move(values), std::abs(p.scale));
}

SampledMap make_constant(const BuiltinParams& p) {
    auto space = std::make_shared<EuclideanSpace>(1);
    double zero = 0.0;
    PointId origin = space->intern(std::span<const double>(&zero, 1));
    int d = p.n + p.m;
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>((std::size_t{1} << p.depth) + 1);
    return SampledMap(p.n, p.m, p.depth, space, std::vector<PointId>(total, origin), 0.0);
}

SampledMap make_linear(const BuiltinParams& p) {
    int d = p.n + p.m;
    if (p.matrix.empty()) throw ArgumentError("linear builtin requires a matrix");
    int rows = static_cast<int>(p.matrix.size());
    for (const auto& row : p.matrix)
        if (static_cast<int>(row.size()) != d) throw ArgumentError("linear matrix must have n+m columns");
    auto space = std::make_shared<EuclideanSpace>(rows);
    double frob = 0;
    for (const auto& row : p.matrix)
        for (double v : row) frob += v * v;
    frob = std::sqrt(frob);

    std::int64_t extent = (std::int64_t{1} << p.depth) + 1;
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(extent);
    std::vector<PointId> values(total);
    double h = std::ldexp(1.0, -p.depth);
    std::vector<double> x(static_cast<std::size_t>(d));
    std::vector<double> y(static_cast<std::size_t>(rows));
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        for (int a = 0; a < d; ++a) {
            x[static_cast<std::size_t>(a)] = static_cast<double>(rest % static_cast<std::size_t>(extent)) * h;
            rest /= static_cast<std::size_t>(extent);
        }
        for (int r = 0; r < rows; ++r) {
            double s = 0;
            for (int a = 0; a < d; ++a) s += p.matrix[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
            y[static_cast<std::size_t>(r)] = s;
        }
        values[i] = space->intern(y);
    }
    return SampledMap(p.n, p.m, p.depth, space, std::move(values), frob);
}

double shear_profile(double y) {
    // gentle crossfade: full x-dependence at y = 0 fading to none at y = 3/4
    return std::clamp(1.0 - (4.0 / 3.0) * y, 0.0, 1.0);
}

// f(x, y) = (x * a(y), y) into R^2: x-dependence fades out along y, so the
// good plane switches from the first axis to the second partway up.
SampledMap make_shear_demo(const BuiltinParams& p) {
    if (p.n != 1 || p.m != 1) throw ArgumentError("shear-demo requires n = m = 1");
    auto space = std::make_shared<EuclideanSpace>(2);
    std::int64_t extent = (std::int64_t{1} << p.depth) + 1;
    std::size_t total = static_cast<std::size_t>(extent) * static_cast<std::size_t>(extent);
    std::vector<PointId> values(total);
    double h = std::ldexp(1.0, -p.depth);
    for (std::int64_t iy = 0; iy < extent; ++iy) {
        for (std::int64_t ix = 0; ix < extent; ++ix) {
            double x = static_cast<double>(ix) * h;
            double y = static_cast<double>(iy) * h;
            std::array<double, 2> v{x * shear_profile(y), y};
            values[static_cast<std::size_t>(iy) * static_cast<std::size_t>(extent) + static_cast<std::size_t>(ix)] =
                space->intern(v);
        }
    }
    // |df/dy| <= sqrt(1 + (4/3)^2) = 5/3
    return SampledMap(1, 1, p.depth, space, std::move(values), 5.0 / 3.0);
}

}  // namespace

SampledMap build_star_map(int k, int depth) {
    if (depth < k + 1)
        throw ResolutionError("star map needs depth >= k + 1 to resolve its cubes");
    auto tree = star_tree(k);
    double h = std::ldexp(1.0, -k);
    int nstar = tree->star_count();

    std::int64_t extent = (std::int64_t{1} << depth) + 1;
    std::size_t total = static_cast<std::size_t>(extent) * static_cast<std::size_t>(extent);
    std::vector<PointId> values(total);
    double step = std::ldexp(1.0, -depth);

    auto value_at = [&](double x, double y) -> PointId {
        int col = std::min(static_cast<int>(x / (2.0 * h)), nstar - 1);
        int row = std::min(static_cast<int>(y / (2.0 * h)), nstar - 1);
        double cx = x - 2.0 * col * h;
        double cy = y - 2.0 * row * h;

        // Horizontal state: base spike offset, or already on the backbone.
        double s0;
        if (cx <= h) {
            s0 = cx;
        } else {
            double u = (cx - h) / h;  // gap position in (0, 1]
            if (u <= 1.0 / 3.0) {
                s0 = h * (1.0 - 3.0 * u);
            } else {
                double pos = 2.0 * col * h + 3.0 * (u - 1.0 / 3.0) * h;
                return tree->backbone_point(std::min(pos, 1.0));
            }
        }

        if (cy <= h) return tree->spike_point(col, row, s0);

        // Vertical gap: offsets decay toward the center at rate 4.
        double t_below = cy - h;
        double t_above = 2.0 * h - cy;
        int r;
        double t;
        if (row == nstar - 1 || t_below <= t_above) {
            r = row;
            t = t_below;
        } else {
            r = row + 1;
            t = t_above;
        }
        double s = std::max(0.0, s0 - 4.0 * t);
        return tree->spike_point(col, r, s);
    };

    for (std::int64_t iy = 0; iy < extent; ++iy) {
        for (std::int64_t ix = 0; ix < extent; ++ix) {
            double x = static_cast<double>(ix) * step;
            double y = static_cast<double>(iy) * step;
            values[static_cast<std::size_t>(iy) * static_cast<std::size_t>(extent) + static_cast<std::size_t>(ix)] =
                value_at(x, y);
        }
    }
    return SampledMap(1, 1, depth, tree, std::move(values), 4.0);
}

SampledMap SampledMap::from_builtin(const std::string& name, const BuiltinParams& params) {
    if (name == "projection") return make_projection(params);
    if (name == "constant") return make_constant(params);
    if (name == "linear") return make_linear(params);
    if (name == "star9") {
        if (params.n != 1 || params.m != 1) throw ArgumentError("star9 requires n = m = 1");
        return build_star_map(params.star_k, params.depth);
    }
    if (name == "shear-demo") return make_shear_demo(params);
    throw ArgumentError("unknown builtin map: " + name);
}

// ---------------------------------------------------------------------------

double lipschitz_estimate(const SampledMap& map) {
    double h = std::ldexp(1.0, -map.depth());
    double worst = 0;
    std::size_t total = map.lattice_size();
    for (std::size_t i = 0; i < total; ++i) {
        LatticePoint p = map.lattice_coords(i);
        if (!map.in_domain(p)) continue;
        for (int a = 0; a < map.dim(); ++a) {
            LatticePoint q = p;
            q[a] += 1;
            if (!map.in_domain(q)) continue;
            double d = map.target_distance(map.value(p), map.value(q));
            worst = std::max(worst, d / h);
        }
    }
    return worst;
}

double lipschitz_all_pairs(const SampledMap& map) {
    std::vector<std::size_t> pts;
    std::size_t total = map.lattice_size();
    for (std::size_t i = 0; i < total; ++i)
        if (map.in_domain(map.lattice_coords(i))) pts.push_back(i);
    double h = std::ldexp(1.0, -map.depth());
    double worst = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        LatticePoint p = map.lattice_coords(pts[i]);
        PointId fp = map.value(p);
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            LatticePoint q = map.lattice_coords(pts[j]);
            double dd = 0;
            for (int a = 0; a < map.dim(); ++a) {
                double delta = static_cast<double>(p[a] - q[a]) * h;
                dd += delta * delta;
            }
            double d = map.target_distance(fp, map.value(q));
            worst = std::max(worst, d / std::sqrt(dd));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Grid map file
// ---------------------------------------------------------------------------

void SampledMap::save_json(const std::string& path) const {
    nlohmann::json j;
    j["n"] = n_;
    j["m"] = m_;
    j["depth"] = depth_;
    const std::string k = target_->kind();
    if (k == "euclidean") {
        const auto& sp = dynamic_cast<const EuclideanSpace&>(*target_);
        j["target"] = {{"kind", "euclidean"}, {"dim", sp.dim()}};
        nlohmann::json vals = nlohmann::json::array();
        for (PointId id : values_)
            for (double c : sp.coords(id)) vals.push_back(c);
        j["values"] = std::move(vals);
    } else if (k == "finite") {
        const auto& sp = dynamic_cast<const FiniteMatrixSpace&>(*target_);
        std::string matrix_path = path + ".dmat";
        sp.save_dmat(matrix_path);
        j["target"] = {{"kind", "finite"}, {"matrix", matrix_path}};
        j["values"] = values_;
    } else if (k == "startree") {
        const auto& sp = dynamic_cast<const StarTree&>(*target_);
        j["target"] = {{"kind", "startree"}, {"k", sp.k()}};
        j["values"] = values_;
        // Point table in id order so the loader re-interns identically.
        nlohmann::json pts = nlohmann::json::array();
        for (PointId id = 0; id < sp.point_count(); ++id) {
            auto info = sp.point_info(id);
            pts.push_back({info.star, info.spike, info.pos});
        }
        j["points"] = std::move(pts);
    } else {
        throw ArgumentError("cannot serialize maps into a '" + k + "' target");
    }
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << j.dump(2) << "\n";
}

SampledMap load_map_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    int n = j.at("n").get<int>();
    int m = j.at("m").get<int>();
    int depth = j.at("depth").get<int>();
    const auto& target = j.at("target");
    std::string kind = target.at("kind").get<std::string>();

    if (kind == "euclidean") {
        int tdim = target.at("dim").get<int>();
        auto space = std::make_shared<EuclideanSpace>(tdim);
        const auto& vals = j.at("values");
        if (vals.size() % static_cast<std::size_t>(tdim) != 0)
            throw ArgumentError("value array length is not a multiple of the target dimension");
        std::size_t count = vals.size() / static_cast<std::size_t>(tdim);
        std::vector<PointId> ids(count);
        std::vector<double> coords(static_cast<std::size_t>(tdim));
        for (std::size_t i = 0; i < count; ++i) {
            for (int c = 0; c < tdim; ++c)
                coords[static_cast<std::size_t>(c)] = vals[i * static_cast<std::size_t>(tdim) + static_cast<std::size_t>(c)].get<double>();
            ids[i] = space->intern(coords);
        }
        double lip = j.value("lipschitz", 1.0);
        return SampledMap(n, m, depth, space, std::move(ids), lip);
    }
    if (kind == "finite") {
        auto space = FiniteMatrixSpace::load_dmat(target.at("matrix").get<std::string>());
        std::vector<PointId> ids = j.at("values").get<std::vector<PointId>>();
        double lip = j.value("lipschitz", 1.0);
        return SampledMap(n, m, depth, space, std::move(ids), lip);
    }
    if (kind == "startree") {
        auto tree = star_tree(target.at("k").get<int>());
        for (const auto& pt : j.at("points")) {
            int star = pt[0].get<int>();
            if (star < 0)
                tree->backbone_point(pt[2].get<double>());
            else
                tree->spike_point(star, pt[1].get<int>(), pt[2].get<double>());
        }
        std::vector<PointId> ids = j.at("values").get<std::vector<PointId>>();
        double lip = j.value("lipschitz", 4.0);
        return SampledMap(n, m, depth, tree, std::move(ids), lip);
    }
    throw ArgumentError("unknown target kind: " + kind);
}

}  // namespace mapcontent
