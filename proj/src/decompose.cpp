#include "mapcontent/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "mapcontent/rng.hpp"
#include "mapcontent/threading.hpp"

namespace mapcontent {

// ---------------------------------------------------------------------------
// Planes and meshes
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> coordinate_planes(int dim, int n) {
    std::vector<std::uint8_t> out;
    std::vector<int> comb(static_cast<std::size_t>(n));
    std::function<void(int, int)> rec = [&](int start, int picked) {
        if (picked == n) {
            std::uint8_t mask = 0;
            for (int i = 0; i < n; ++i) mask |= static_cast<std::uint8_t>(1u << comb[static_cast<std::size_t>(i)]);
            out.push_back(mask);
            return;
        }
        for (int a = start; a < dim; ++a) {
            comb[static_cast<std::size_t>(picked)] = a;
            rec(a + 1, picked + 1);
        }
    };
    rec(0, 0);
    return out;
}

namespace {

std::vector<int> plane_axes(std::uint8_t plane, int dim) {
    std::vector<int> axes;
    for (int a = 0; a < dim; ++a)
        if (plane & (1u << a)) axes.push_back(a);
    return axes;
}

// Unit vectors spanning the plane: a 5-degree angular mesh for 2-planes,
// a 15-degree double mesh for 3-planes, plus small integer directions.
std::vector<std::array<double, 4>> plane_unit_mesh(std::uint8_t plane, int dim) {
    auto axes = plane_axes(plane, dim);
    std::vector<std::array<double, 4>> mesh;
    auto push = [&](std::initializer_list<double> weights) {
        std::array<double, 4> v{};
        double len = 0;
        std::size_t i = 0;
        for (double w : weights) {
            v[static_cast<std::size_t>(axes[i++])] = w;
            len += w * w;
        }
        if (len < 1e-18) return;
        len = std::sqrt(len);
        for (int a = 0; a < dim; ++a) v[static_cast<std::size_t>(a)] /= len;
        mesh.push_back(v);
    };
    if (axes.size() == 1) {
        push({1.0});
        return mesh;
    }
    if (axes.size() == 2) {
        for (int deg = 0; deg < 180; deg += 5) {
            double th = deg * M_PI / 180.0;
            push({std::cos(th), std::sin(th)});
        }
        for (int a = -3; a <= 3; ++a)
            for (int b = 0; b <= 3; ++b) {
                if (a == 0 && b == 0) continue;
                if (std::gcd(std::abs(a), b) > 1) continue;
                push({static_cast<double>(a), static_cast<double>(b)});
            }
        return mesh;
    }
    for (int t1 = 0; t1 < 180; t1 += 15)
        for (int t2 = 0; t2 < 180; t2 += 15) {
            double a = t1 * M_PI / 180.0, b = t2 * M_PI / 180.0;
            push({std::cos(a) * std::sin(b), std::sin(a) * std::sin(b), std::cos(b)});
        }
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b)
            for (int c = 0; c <= 2; ++c) {
                if (a == 0 && b == 0 && c == 0) continue;
                push({static_cast<double>(a), static_cast<double>(b), static_cast<double>(c)});
            }
    return mesh;
}

CubeId cube_at(std::size_t raster, int level, int dim) {
    CubeId cube{level, dim, {}};
    int side = 1 << level;
    for (int a = 0; a < dim; ++a) {
        cube.index[a] = static_cast<std::int32_t>(raster % static_cast<std::size_t>(side));
        raster /= static_cast<std::size_t>(side);
    }
    return cube;
}

}  // namespace

double plane_min_seminorm(const Seminorm& sn, std::uint8_t plane, int dim) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : plane_unit_mesh(plane, dim))
        best = std::min(best, sn(std::span<const double>(v.data(), static_cast<std::size_t>(dim))));
    return best;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

const CubeClassEntry& Classification::at(const CubeId& cube) const {
    return levels[static_cast<std::size_t>(cube.level)][cube.raster_index()];
}

const MdResult& Classification::fit(const CubeId& cube) const {
    return fits[static_cast<std::size_t>(cube.level)][cube.raster_index()];
}

std::vector<CubeId> Classification::cubes_of_kind(CubeClassKind kind) const {
    std::vector<CubeId> out;
    for (int level = 0; level <= maxlevel; ++level) {
        const auto& lvl = levels[static_cast<std::size_t>(level)];
        for (std::size_t r = 0; r < lvl.size(); ++r)
            if (lvl[r].kind == kind) out.push_back(cube_at(r, level, dim));
    }
    return out;
}

Classification classify_cubes(const SampledMap& map, double eps, double delta, int maxlevel,
                              const MdFitOptions& opts, int threads) {
    Classification cls;
    cls.dim = map.dim();
    cls.n = map.n();
    cls.m = map.m();
    cls.eps = eps;
    cls.delta = delta;
    cls.maxlevel = maxlevel;

    auto table = md_profile(map, maxlevel, opts, threads);
    cls.levels.resize(static_cast<std::size_t>(maxlevel) + 1);
    cls.fits.resize(static_cast<std::size_t>(maxlevel) + 1);
    auto planes = coordinate_planes(map.dim(), map.n());

    std::size_t cursor = 0;
    for (int level = 0; level <= maxlevel; ++level) {
        std::size_t count = std::size_t{1} << (map.dim() * level);
        cls.levels[static_cast<std::size_t>(level)].resize(count);
        cls.fits[static_cast<std::size_t>(level)].resize(count);
        for (std::size_t r = 0; r < count; ++r) {
            const MdResult& fit = table[cursor++];
            cls.fits[static_cast<std::size_t>(level)][r] = fit;
            CubeClassEntry entry;
            if (fit.md_upper >= eps) {
                entry.kind = CubeClassKind::Md;
            } else {
                entry.kind = CubeClassKind::Compressed;
                for (std::uint8_t plane : planes) {
                    if (plane_min_seminorm(fit.seminorm, plane, map.dim()) >= delta) {
                        entry.kind = CubeClassKind::Good;
                        entry.plane = plane;
                        break;
                    }
                }
            }
            cls.levels[static_cast<std::size_t>(level)][r] = entry;
        }
    }
    return cls;
}

CompressedBound compressed_content_bound(const SampledMap& map, const Classification& cls, int threads) {
    CompressedBound out;
    out.cells = CellSet(map.dim(), map.depth());
    for (const CubeId& cube : cls.cubes_of_kind(CubeClassKind::Compressed)) {
        Region triple = dilate(cube, 3);
        out.cells = out.cells.set_union(CellSet::of_region(triple, map.depth()));
    }
    if (!out.cells.empty_set())
        out.content = mapping_content(map, out.cells, map.depth() - 1, threads).value;
    out.ratio = out.content / (cls.eps + cls.delta);
    return out;
}

// ---------------------------------------------------------------------------
// Farthest coordinate plane
// ---------------------------------------------------------------------------

FarthestPlane farthest_coordinate_plane(const std::vector<std::vector<double>>& k_basis, int dim, int n, int m) {
    std::vector<std::vector<double>> ortho;
    for (const auto& raw : k_basis) {
        if (static_cast<int>(raw.size()) != dim) throw ArgumentError("basis vector dimension mismatch");
        std::vector<double> v = raw;
        for (const auto& b : ortho) {
            double dot = 0;
            for (int a = 0; a < dim; ++a) dot += v[static_cast<std::size_t>(a)] * b[static_cast<std::size_t>(a)];
            for (int a = 0; a < dim; ++a) v[static_cast<std::size_t>(a)] -= dot * b[static_cast<std::size_t>(a)];
        }
        double len = 0;
        for (int a = 0; a < dim; ++a) len += v[static_cast<std::size_t>(a)] * v[static_cast<std::size_t>(a)];
        len = std::sqrt(len);
        if (len < 1e-12) continue;
        for (int a = 0; a < dim; ++a) v[static_cast<std::size_t>(a)] /= len;
        ortho.push_back(std::move(v));
    }
    if (static_cast<int>(ortho.size()) > m) throw ArgumentError("subspace dimension exceeds m");

    FarthestPlane best;
    for (std::uint8_t plane : coordinate_planes(dim, n)) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& w : plane_unit_mesh(plane, dim)) {
            double proj_sq = 0;
            for (const auto& b : ortho) {
                double dot = 0;
                for (int a = 0; a < dim; ++a) dot += w[static_cast<std::size_t>(a)] * b[static_cast<std::size_t>(a)];
                proj_sq += dot * dot;
            }
            worst = std::min(worst, std::sqrt(std::max(0.0, 1.0 - proj_sq)));
        }
        if (worst > best.c) {
            best.c = worst;
            best.plane = plane;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Coding over third-shifted grids
// ---------------------------------------------------------------------------

Coding coding_decomposition(const SampledMap& map, double eps, const CodingOptions& copts, const MdFitOptions& fit,
                            int threads) {
    const int d = map.dim();
    const int L = copts.levels >= 0 ? copts.levels : std::min(map.depth() - 1, 4);
    const double eps_bad = eps * copts.eps_prime_factor;
    const int window = copts.window_factor > 0 ? copts.window_factor : fit.c0;
    const int grids = 1 << d;

    struct LevelTable {
        std::array<std::int64_t, kMaxDim> zmin{};
        std::array<std::int64_t, kMaxDim> extent{};
        std::vector<std::uint8_t> bad;
        std::size_t linear(const std::array<std::int64_t, kMaxDim>& z, int dim) const {
            std::size_t idx = 0;
            for (int a = dim - 1; a >= 0; --a)
                idx = idx * static_cast<std::size_t>(extent[static_cast<std::size_t>(a)]) +
                      static_cast<std::size_t>(z[static_cast<std::size_t>(a)] - zmin[static_cast<std::size_t>(a)]);
            return idx;
        }
    };
    std::vector<std::vector<LevelTable>> tables(static_cast<std::size_t>(grids));

    struct Job {
        int grid, level;
        std::array<std::int64_t, kMaxDim> z;
        std::size_t slot;
    };
    std::vector<Job> jobs;
    for (int g = 0; g < grids; ++g) {
        tables[static_cast<std::size_t>(g)].resize(static_cast<std::size_t>(L) + 1);
        for (int level = 0; level <= L; ++level) {
            LevelTable& tab = tables[static_cast<std::size_t>(g)][static_cast<std::size_t>(level)];
            double scale = std::ldexp(1.0, level);
            std::size_t total = 1;
            for (int a = 0; a < d; ++a) {
                double shift = ((g >> a) & 1) ? 1.0 / 3.0 : 0.0;
                tab.zmin[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(std::floor(shift * scale));
                std::int64_t zmax = static_cast<std::int64_t>(std::floor((1.0 + shift) * scale));
                tab.extent[static_cast<std::size_t>(a)] = zmax - tab.zmin[static_cast<std::size_t>(a)] + 1;
                total *= static_cast<std::size_t>(tab.extent[static_cast<std::size_t>(a)]);
            }
            tab.bad.assign(total, 0);
            std::array<std::int64_t, kMaxDim> z = tab.zmin;
            while (true) {
                jobs.push_back({g, level, z, tab.linear(z, d)});
                int a = 0;
                for (; a < d; ++a) {
                    if (++z[static_cast<std::size_t>(a)] <
                        tab.zmin[static_cast<std::size_t>(a)] + tab.extent[static_cast<std::size_t>(a)])
                        break;
                    z[static_cast<std::size_t>(a)] = tab.zmin[static_cast<std::size_t>(a)];
                }
                if (a == d) break;
            }
        }
    }

    parallel_for(jobs.size(), threads, [&](std::size_t ji) {
        const Job& job = jobs[ji];
        double side = std::ldexp(1.0, -job.level);
        std::array<double, 4> lo{}, hi{};
        for (int a = 0; a < d; ++a) {
            double shift = ((job.grid >> a) & 1) ? 1.0 / 3.0 : 0.0;
            double center = (static_cast<double>(job.z[static_cast<std::size_t>(a)]) + 0.5) * side - shift;
            lo[static_cast<std::size_t>(a)] = center - 0.5 * window * side;
            hi[static_cast<std::size_t>(a)] = center + 0.5 * window * side;
        }
        bool bad = false;
        try {
            auto pairs = sample_pairs_box(map, std::span<const double>(lo.data(), static_cast<std::size_t>(d)),
                                          std::span<const double>(hi.data(), static_cast<std::size_t>(d)), fit);
            MdResult r = fit_seminorm_pairs(pairs, d, side, fit);
            bad = r.md_upper >= eps_bad;
        } catch (const ResolutionError&) {
            bad = false;  // windows with at most one lattice point constrain nothing
        }
        tables[static_cast<std::size_t>(job.grid)][static_cast<std::size_t>(job.level)].bad[job.slot] = bad ? 1 : 0;
    });

    // Per-cell words: (level, child position) of every bad ancestor, per grid.
    const std::size_t cells = std::size_t{1} << (d * map.depth());
    std::vector<std::vector<std::int32_t>> keys(cells);
    std::vector<int> worst_count(cells, 0);
    CellSet probe(d, map.depth());
    const double cell_h = std::ldexp(1.0, -map.depth());

    for (std::size_t cell = 0; cell < cells; ++cell) {
        LatticePoint cc = probe.cell_coords(cell);
        std::vector<std::int32_t>& key = keys[cell];
        for (int g = 0; g < grids; ++g) {
            int count = 0;
            for (int level = 0; level <= L; ++level) {
                const LevelTable& tab = tables[static_cast<std::size_t>(g)][static_cast<std::size_t>(level)];
                std::array<std::int64_t, kMaxDim> z{}, zc{};
                bool inside = true;
                for (int a = 0; a < d; ++a) {
                    double shift = ((g >> a) & 1) ? 1.0 / 3.0 : 0.0;
                    double x = (static_cast<double>(cc[a]) + 0.5) * cell_h;
                    z[static_cast<std::size_t>(a)] =
                        static_cast<std::int64_t>(std::floor((x + shift) * std::ldexp(1.0, level)));
                    zc[static_cast<std::size_t>(a)] =
                        static_cast<std::int64_t>(std::floor((x + shift) * std::ldexp(1.0, level + 1)));
                    if (z[static_cast<std::size_t>(a)] < tab.zmin[static_cast<std::size_t>(a)] ||
                        z[static_cast<std::size_t>(a)] >=
                            tab.zmin[static_cast<std::size_t>(a)] + tab.extent[static_cast<std::size_t>(a)])
                        inside = false;
                }
                if (!inside || !tab.bad[tab.linear(z, d)]) continue;
                ++count;
                std::int32_t child = 0;
                for (int a = 0; a < d; ++a)
                    child |= static_cast<std::int32_t>(
                                 (zc[static_cast<std::size_t>(a)] - 2 * z[static_cast<std::size_t>(a)]) & 1)
                             << a;
                key.push_back(static_cast<std::int32_t>(level));
                key.push_back(child);
            }
            key.push_back(-1);  // grid separator
            worst_count[cell] = std::max(worst_count[cell], count);
        }
    }

    // Bad-ancestor budget: the smallest cap leaving remainder measure < eta.
    Coding out;
    out.remainder = CellSet(d, map.depth());
    int cap = 0;
    for (; cap <= L + 1; ++cap) {
        std::size_t over = 0;
        for (std::size_t cell = 0; cell < cells; ++cell)
            if (worst_count[cell] >= cap + 1) ++over;
        if (static_cast<double>(over) / static_cast<double>(cells) < copts.eta) break;
    }
    out.word_cap = cap;

    out.cell_class.assign(cells, -1);
    std::map<std::vector<std::int32_t>, std::int32_t> ids;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        if (worst_count[cell] >= cap + 1) {
            out.remainder.set_cell(cell);
            continue;
        }
        auto [it, fresh] = ids.try_emplace(keys[cell], static_cast<std::int32_t>(ids.size()));
        out.cell_class[cell] = it->second;
    }
    out.class_count = static_cast<int>(ids.size());
    return out;
}

// ---------------------------------------------------------------------------
// Stopping time
// ---------------------------------------------------------------------------

StoppingForest stopping_time(const Classification& cls, const CubeId& top, double delta_prime, int K) {
    if (cls.at(top).kind != CubeClassKind::Good) throw StateError("stopping time requires a Good top cube");
    StoppingForest forest;
    forest.top = top;
    forest.levels.push_back({top});
    forest.planes.push_back({cls.at(top).plane});
    forest.level_measures.push_back(cube_measure(top));

    for (int i = 1; i <= K; ++i) {
        std::vector<CubeId> next;
        std::vector<std::uint8_t> next_planes;
        const auto& prev = forest.levels.back();
        const auto& prev_planes = forest.planes.back();
        for (std::size_t pi = 0; pi < prev.size(); ++pi) {
            std::uint8_t parent_plane = prev_planes[pi];
            // Collect the maximal good sub-cubes on which the parent plane
            // quantitatively degenerates; stop descending at the first hit.
            std::function<void(const CubeId&)> dfs = [&](const CubeId& cube) {
                if (cube.level > cls.maxlevel) return;
                if (!(cube == prev[pi])) {
                    const auto& entry = cls.at(cube);
                    if (entry.kind == CubeClassKind::Good &&
                        plane_min_seminorm(cls.fit(cube).seminorm, parent_plane, cls.dim) < delta_prime) {
                        next.push_back(cube);
                        next_planes.push_back(entry.plane);
                        return;
                    }
                }
                if (cube.level >= cls.maxlevel) return;
                for (const auto& child : children(cube, cls.maxlevel)) dfs(child);
            };
            dfs(prev[pi]);
        }
        if (next.empty()) break;
        double measure = 0;
        for (const auto& c : next) measure += cube_measure(c);
        forest.worst_contraction = std::max(forest.worst_contraction, measure / forest.level_measures.back());
        forest.levels.push_back(std::move(next));
        forest.planes.push_back(std::move(next_planes));
        forest.level_measures.push_back(measure);
    }
    return forest;
}

// ---------------------------------------------------------------------------
// Rotations and pieces
// ---------------------------------------------------------------------------

LatticePoint PiecewiseRotation::apply(const LatticePoint& p) const {
    LatticePoint cur = p;
    for (const auto& step : steps) {
        for (const auto& rot : step) {
            int shift = depth - rot.cube.level;
            bool inside = true;
            for (int a = 0; a < dim; ++a) {
                std::int64_t lo = static_cast<std::int64_t>(rot.cube.index[a]) << shift;
                std::int64_t hi = (static_cast<std::int64_t>(rot.cube.index[a]) + 1) << shift;
                if (cur[a] < lo || cur[a] > hi) {
                    inside = false;
                    break;
                }
            }
            if (!inside) continue;
            LatticePoint out = cur;
            std::int64_t s = std::int64_t{1} << shift;
            for (int a = 0; a < dim; ++a) {
                int target = rot.perm[static_cast<std::size_t>(a)];
                out[target] = static_cast<std::int32_t>(
                    cur[a] + (static_cast<std::int64_t>(rot.cube.index[target]) - rot.cube.index[a]) * s);
            }
            cur = out;
            break;  // cubes within one step are disjoint
        }
    }
    return cur;
}

PiecewiseRotation PiecewiseRotation::inverse() const {
    PiecewiseRotation inv;
    inv.dim = dim;
    inv.depth = depth;
    for (std::size_t s = steps.size(); s-- > 0;) {
        std::vector<CubeRotation> step;
        for (const auto& rot : steps[s]) {
            CubeRotation back;
            back.cube = rot.cube;  // each rotation fixes its cube setwise
            for (int a = 0; a < dim; ++a) back.perm[rot.perm[static_cast<std::size_t>(a)]] = static_cast<std::uint8_t>(a);
            step.push_back(back);
        }
        inv.steps.push_back(std::move(step));
    }
    return inv;
}

SampledMap rotate_map(const SampledMap& map, const PiecewiseRotation& rotation) {
    PiecewiseRotation inv = rotation.inverse();
    std::vector<PointId> values(map.lattice_size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        LatticePoint q = map.lattice_coords(i);
        values[i] = map.value_clamped(inv.apply(q));
    }
    return SampledMap(map.n(), map.m(), map.depth(), map.target_ptr(), std::move(values),
                      map.declared_lipschitz());
}

CellSet rotate_cells(const CellSet& cells, const PiecewiseRotation& rotation) {
    CellSet out(cells.dim(), cells.depth());
    for (std::size_t cell : cells.cells()) {
        LatticePoint lo = cells.cell_coords(cell);
        LatticePoint hi = lo;
        for (int a = 0; a < cells.dim(); ++a) hi[a] += 1;
        LatticePoint a = rotation.apply(lo);
        LatticePoint b = rotation.apply(hi);
        LatticePoint corner{};
        for (int ax = 0; ax < cells.dim(); ++ax) corner[ax] = std::min(a[ax], b[ax]);
        out.set_cell(out.cell_linear(corner));
    }
    return out;
}

namespace {

// Order-preserving permutation sending the axes of `from` onto `to` and the
// complement onto the complement.
std::array<std::uint8_t, 4> plane_permutation(std::uint8_t from, std::uint8_t to, int dim) {
    std::array<std::uint8_t, 4> perm{};
    std::vector<int> f_in, f_out, t_in, t_out;
    for (int a = 0; a < dim; ++a) {
        ((from >> a) & 1 ? f_in : f_out).push_back(a);
        ((to >> a) & 1 ? t_in : t_out).push_back(a);
    }
    for (std::size_t i = 0; i < f_in.size(); ++i)
        perm[static_cast<std::size_t>(f_in[i])] = static_cast<std::uint8_t>(t_in[i]);
    for (std::size_t i = 0; i < f_out.size(); ++i)
        perm[static_cast<std::size_t>(f_out[i])] = static_cast<std::uint8_t>(t_out[i]);
    return perm;
}

}  // namespace

PieceBuild build_pieces(const SampledMap& map, const std::vector<StoppingForest>& forests,
                        const Coding& coding, const CellSet& compressed_triples, int lambda, double alpha_split) {
    PieceBuild out;
    const int d = map.dim();
    const int depth = map.depth();
    const std::uint8_t p0 = [&] {
        std::uint8_t mask = 0;
        for (int a = 0; a < map.n(); ++a) mask |= static_cast<std::uint8_t>(1u << a);
        return mask;
    }();

    CellSet covered(d, depth);
    out.leftover = CellSet(d, depth);

    for (const auto& forest : forests) {
        std::size_t nlevels = forest.levels.size();
        std::vector<std::vector<std::vector<CubeId>>> families(nlevels);
        std::vector<CellSet> level_union(nlevels, CellSet(d, depth));
        for (std::size_t i = 1; i < nlevels; ++i) {
            auto split = split_separated(forest.levels[i], lambda, alpha_split);
            families[i] = split.families;
            for (const auto& c : split.discarded) out.split_garbage_measure += cube_measure(c);
            level_union[i] = CellSet::of_cubes(forest.levels[i], d, depth);
        }

        std::map<CubeId, std::uint8_t> forest_plane;
        for (std::size_t i = 0; i < nlevels; ++i)
            for (std::size_t j = 0; j < forest.levels[i].size(); ++j)
                forest_plane[forest.levels[i][j]] = forest.planes[i][j];

        struct Frame {
            std::vector<std::vector<CubeId>> t_chain;  // T^0..T^ell
            std::vector<int> word;
            CellSet cells;
        };

        auto emit = [&](const Frame& frame) {
            std::size_t ell = frame.word.size();
            CellSet piece_cells = frame.cells;
            if (ell + 1 < nlevels) piece_cells = piece_cells.set_difference(level_union[ell + 1]);
            piece_cells = piece_cells.set_difference(compressed_triples);
            piece_cells = piece_cells.set_difference(coding.remainder);
            if (piece_cells.empty_set()) return;

            std::map<std::int32_t, std::vector<std::size_t>> by_class;
            for (std::size_t cell : piece_cells.cells()) {
                std::int32_t cl = coding.cell_class[cell];
                if (cl >= 0) by_class[cl].push_back(cell);
            }
            for (auto& [cl, cell_list] : by_class) {
                Piece piece;
                piece.top = forest.top;
                piece.coding_class = cl;
                piece.word = frame.word;
                piece.t_cubes = frame.t_chain;
                piece.cells = CellSet(d, depth);
                for (std::size_t cell : cell_list) piece.cells.set_cell(cell);

                piece.rotation.dim = d;
                piece.rotation.depth = depth;
                for (std::size_t i = frame.t_chain.size(); i-- > 1;) {
                    std::vector<CubeRotation> step;
                    for (const auto& cube : frame.t_chain[i]) {
                        std::uint8_t target = p0;
                        for (const auto& up : frame.t_chain[i - 1])
                            if (up.contains(cube)) {
                                target = forest_plane.at(up);
                                break;
                            }
                        step.push_back({cube, plane_permutation(forest_plane.at(cube), target, d)});
                    }
                    piece.rotation.steps.push_back(std::move(step));
                }
                piece.rotation.steps.push_back(
                    {CubeRotation{forest.top, plane_permutation(forest_plane.at(forest.top), p0, d)}});

                covered = covered.set_union(piece.cells);
                out.pieces.push_back(std::move(piece));
            }
        };

        std::function<void(const Frame&)> recurse = [&](const Frame& frame) {
            emit(frame);
            std::size_t next_level = frame.word.size() + 1;
            if (next_level >= nlevels) return;
            for (std::size_t j = 0; j < families[next_level].size(); ++j) {
                std::vector<CubeId> t_next;
                for (const auto& cube : families[next_level][j])
                    for (const auto& up : frame.t_chain.back())
                        if (up.contains(cube)) {
                            t_next.push_back(cube);
                            break;
                        }
                if (t_next.empty()) continue;
                Frame child;
                child.t_chain = frame.t_chain;
                child.t_chain.push_back(t_next);
                child.word = frame.word;
                child.word.push_back(static_cast<int>(j + 1));
                child.cells = frame.cells.set_intersection(CellSet::of_cubes(t_next, d, depth));
                recurse(child);
            }
        };

        Frame root;
        root.t_chain.push_back({forest.top});
        root.cells = CellSet::of_cube(forest.top, depth);
        recurse(root);
    }

    out.leftover = covered.complement();
    return out;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

BilipReport verify_supplemented_bilipschitz(const SampledMap& map, const Piece& piece, std::size_t pair_cap,
                                            std::uint64_t seed) {
    const int d = map.dim();
    std::vector<LatticePoint> pts;
    {
        int shift = map.depth() - piece.top.level;
        std::array<std::int64_t, kMaxDim> lo{}, hi{};
        for (int a = 0; a < d; ++a) {
            lo[a] = static_cast<std::int64_t>(piece.top.index[a]) << shift;
            hi[a] = (static_cast<std::int64_t>(piece.top.index[a]) + 1) << shift;
        }
        std::array<std::int64_t, kMaxDim> c = lo;
        while (true) {
            LatticePoint p{};
            for (int a = 0; a < d; ++a) p[a] = static_cast<std::int32_t>(c[a]);
            if (piece.cells.contains_lattice_point(p) && map.in_domain(p)) pts.push_back(p);
            int a = 0;
            for (; a < d; ++a) {
                if (++c[a] <= hi[a]) break;
                c[a] = lo[a];
            }
            if (a == d) break;
        }
    }
    if (pts.size() < 2) throw ArgumentError("piece holds fewer than two lattice points");

    std::vector<LatticePoint> rotated(pts.size());
    std::vector<PointId> values(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        rotated[i] = piece.rotation.apply(pts[i]);
        values[i] = map.value(pts[i]);
    }

    double h = std::ldexp(1.0, -map.depth());
    BilipReport rep;
    rep.c_low = std::numeric_limits<double>::infinity();
    auto consider = [&](std::size_t i, std::size_t j) {
        double den = 0, ynum = 0;
        for (int a = 0; a < d; ++a) {
            double delta = std::abs(static_cast<double>(rotated[i][a] - rotated[j][a])) * h;
            den = std::max(den, delta);
            if (a >= map.n()) ynum = std::max(ynum, delta);
        }
        if (den == 0) return;
        double num = std::max(map.target_distance(values[i], values[j]), ynum);
        double ratio = num / den;
        rep.c_low = std::min(rep.c_low, ratio);
        rep.c_high = std::max(rep.c_high, ratio);
        ++rep.pair_count;
    };

    std::size_t all_pairs = pts.size() * (pts.size() - 1) / 2;
    if (all_pairs <= pair_cap) {
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) consider(i, j);
    } else {
        Rng rng(seed);
        for (std::size_t t = 0; t < pair_cap; ++t) {
            std::size_t i = rng.next_below(pts.size());
            std::size_t j = rng.next_below(pts.size());
            if (i == j) continue;
            consider(i, j);
        }
    }
    if (!std::isfinite(rep.c_low)) rep.c_low = 0;
    return rep;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

InitialLevel initial_level(const SampledMap& map, const Classification& cls, double alpha_prime, int K1,
                           int threads) {
    InitialLevel out;
    for (int level = 1; level <= std::min(K1, cls.maxlevel); ++level) {
        CellSet bad(map.dim(), map.depth());
        const auto& lvl = cls.levels[static_cast<std::size_t>(level)];
        for (std::size_t r = 0; r < lvl.size(); ++r) {
            if (lvl[r].kind == CubeClassKind::Good) continue;
            bad = bad.set_union(CellSet::of_cube(cube_at(r, level, map.dim()), map.depth()));
        }
        double content = bad.empty_set() ? 0.0 : mapping_content(map, bad, map.depth() - 1, threads).value;
        out.per_level.push_back({level, content});
        if (content < alpha_prime) {
            out.found = true;
            out.level = level;
            return out;
        }
    }
    return out;
}

PipelineResult run_decomposition(const SampledMap& map, const PipelineOptions& opts, int threads) {
    PipelineResult result;
    const int depth = map.depth();
    const int k1 = opts.K1 > 0 ? opts.K1 : depth - 1;
    const double alpha_prime = opts.alpha_prime > 0 ? opts.alpha_prime : opts.alpha / 10.0;
    const double coding_eta = opts.coding_eta > 0 ? opts.coding_eta : alpha_prime;

    result.classification = classify_cubes(map, opts.eps, opts.delta, depth - 1, opts.fit, threads);
    const Classification& cls = result.classification;

    InitialLevel start = initial_level(map, cls, alpha_prime, k1, threads);
    result.start_level = start.level;
    if (!start.found) {
        result.leftover = CellSet::full(map.dim(), depth);
        result.leftover_content = mapping_content(map, result.leftover, depth - 1, threads).value;
        result.failure = FailureReport{"initial-level",
                                       "no level up to K1 brings the non-good cubes below alpha'", start.per_level};
        return result;
    }

    CompressedBound compressed = compressed_content_bound(map, cls, threads);
    result.compressed_ratio = compressed.ratio;

    CodingOptions copts = opts.coding;
    copts.eta = coding_eta;
    result.coding = coding_decomposition(map, opts.eps, copts, opts.fit, threads);

    const auto& lvl = cls.levels[static_cast<std::size_t>(start.level)];
    for (std::size_t r = 0; r < lvl.size(); ++r) {
        if (lvl[r].kind != CubeClassKind::Good) continue;
        result.forests.push_back(
            stopping_time(cls, cube_at(r, start.level, map.dim()), opts.delta_prime, opts.K));
    }

    double alpha_split = alpha_prime / std::max(1, opts.K);
    PieceBuild build =
        build_pieces(map, result.forests, result.coding, compressed.cells, opts.lambda, alpha_split);
    result.pieces = std::move(build.pieces);
    result.leftover = build.leftover;
    result.leftover_content =
        result.leftover.empty_set() ? 0.0 : mapping_content(map, result.leftover, depth - 1, threads).value;

    for (const auto& piece : result.pieces)
        result.piece_reports.push_back(verify_supplemented_bilipschitz(map, piece, opts.verify_pair_cap, opts.seed));

    if (result.leftover_content < opts.alpha) {
        result.success = true;
    } else {
        result.failure =
            FailureReport{"leftover", "leftover mapping content does not drop below alpha", start.per_level};
    }
    return result;
}

}  // namespace mapcontent
