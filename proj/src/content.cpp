#include "mapcontent/content.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "mapcontent/threading.hpp"

namespace mapcontent {

namespace {

constexpr std::size_t kSampleCap = 1024;

struct PointSample {
    std::vector<PointId> pts;   // deduplicated (and possibly subsampled)
    double inflation = 0;       // covering radius of the subsample, 0 if exact
};

std::vector<PointId> dedupe(std::span<const PointId> points) {
    std::vector<PointId> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

// Farthest-point subsample started from the smallest id; the returned
// inflation is the covering radius of the selected subset.
PointSample subsample(const DistanceOracle& space, std::vector<PointId> pts, std::size_t cap) {
    PointSample s;
    if (pts.size() <= cap) {
        s.pts = std::move(pts);
        return s;
    }
    std::vector<double> mind(pts.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(pts.size(), false);
    std::size_t current = 0;
    s.pts.reserve(cap);
    for (std::size_t picked = 0; picked < cap; ++picked) {
        chosen[current] = true;
        s.pts.push_back(pts[current]);
        double far = -1;
        std::size_t next = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (chosen[i]) {
                mind[i] = 0;
                continue;
            }
            mind[i] = std::min(mind[i], space.distance(pts[current], pts[i]));
            if (mind[i] > far) {
                far = mind[i];
                next = i;
            }
        }
        if (far <= 0) break;
        current = next;
        s.inflation = far;
    }
    std::sort(s.pts.begin(), s.pts.end());
    return s;
}

struct BracketWork {
    std::vector<double> dist;  // n*n distance matrix
    std::size_t n = 0;
    double at(std::size_t i, std::size_t j) const { return dist[i * n + j]; }
};

BracketWork distances(const DistanceOracle& space, const std::vector<PointId>& pts) {
    BracketWork w;
    w.n = pts.size();
    w.dist.resize(w.n * w.n);
    for (std::size_t i = 0; i < w.n; ++i) {
        w.dist[i * w.n + i] = 0;
        for (std::size_t j = i + 1; j < w.n; ++j) {
            double d = space.distance(pts[i], pts[j]);
            w.dist[i * w.n + j] = d;
            w.dist[j * w.n + i] = d;
        }
    }
    return w;
}

std::vector<double> dyadic_radii(const BracketWork& w) {
    double maxd = 0;
    double minpos = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.n; ++i)
        for (std::size_t j = i + 1; j < w.n; ++j) {
            double d = w.at(i, j);
            maxd = std::max(maxd, d);
            if (d > 0) minpos = std::min(minpos, d);
        }
    std::vector<double> radii;
    if (maxd == 0) return radii;
    int e_top = static_cast<int>(std::ceil(std::log2(maxd)));
    int e_bot = static_cast<int>(std::floor(std::log2(minpos))) - 1;
    e_bot = std::max(e_bot, e_top - 30);
    for (int e = e_top; e >= e_bot; --e) radii.push_back(std::ldexp(1.0, e));
    return radii;
}

}  // namespace

ContentBracket hausdorff_content(const DistanceOracle& space, std::span<const PointId> points, double k) {
    if (k <= 0) throw ArgumentError("content dimension k must be positive");
    if (points.empty()) throw ArgumentError("content of an empty point set");
    ContentBracket out;
    out.k = k;

    PointSample sample = subsample(space, dedupe(points), kSampleCap);
    const auto& pts = sample.pts;
    if (pts.size() == 1) return out;  // a degenerate ball covers a single point

    BracketWork w = distances(space, pts);
    std::vector<double> radii = dyadic_radii(w);
    if (radii.empty()) return out;  // all mutual distances vanish

    // --- Greedy cover (upper bound). Candidates are (center, dyadic radius)
    // pairs; each round takes the candidate covering the most uncovered
    // points, ties to the smaller radius, then the smaller center index.
    std::size_t words = (pts.size() + 63) / 64;
    std::vector<std::uint64_t> uncovered(words, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) uncovered[i >> 6] |= std::uint64_t{1} << (i & 63);

    std::size_t n_r = radii.size();
    std::vector<std::uint64_t> cover(pts.size() * n_r * words, 0);
    for (std::size_t c = 0; c < pts.size(); ++c)
        for (std::size_t j = 0; j < pts.size(); ++j) {
            double d = w.at(c, j);
            for (std::size_t ri = 0; ri < n_r; ++ri)
                if (d <= radii[ri]) cover[(c * n_r + ri) * words + (j >> 6)] |= std::uint64_t{1} << (j & 63);
        }

    double upper = 0;
    std::size_t remaining = pts.size();
    while (remaining > 0) {
        std::size_t best_count = 0, best_c = 0, best_ri = 0;
        for (std::size_t c = 0; c < pts.size(); ++c) {
            for (std::size_t ri = 0; ri < n_r; ++ri) {
                const std::uint64_t* cw = &cover[(c * n_r + ri) * words];
                std::size_t cnt = 0;
                for (std::size_t x = 0; x < words; ++x)
                    cnt += static_cast<std::size_t>(__builtin_popcountll(cw[x] & uncovered[x]));
                bool better = cnt > best_count;
                if (!better && cnt == best_count && cnt > 0) {
                    // radii are stored descending, larger ri = smaller radius
                    better = ri > best_ri || (ri == best_ri && c < best_c);
                }
                if (better) {
                    best_count = cnt;
                    best_c = c;
                    best_ri = ri;
                }
            }
        }
        if (best_count <= 1) break;  // isolated leftovers: degenerate balls
        const std::uint64_t* cw = &cover[(best_c * n_r + best_ri) * words];
        for (std::size_t x = 0; x < words; ++x) uncovered[x] &= ~cw[x];
        remaining -= best_count;
        upper += std::pow(2.0 * (radii[best_ri] + sample.inflation), k);
    }
    if (remaining > 0 && sample.inflation > 0)
        upper += static_cast<double>(remaining) * std::pow(2.0 * sample.inflation, k);

    // --- Greedy disjoint packing (lower bound), largest radius first. A ball
    // is packed only when at least half its radius is realized by a sample
    // point inside it; the charge is the realized spread, deflated by 5^k.
    struct Packed {
        std::size_t center;
        double radius;
    };
    std::vector<Packed> packing;
    double lower_sum = 0;
    for (double r : radii) {
        for (std::size_t c = 0; c < pts.size(); ++c) {
            bool blocked = false;
            for (const auto& b : packing)
                if (w.at(c, b.center) <= r + b.radius) {
                    blocked = true;
                    break;
                }
            if (blocked) continue;
            double spread = 0;
            for (std::size_t j = 0; j < pts.size(); ++j)
                if (w.at(c, j) <= r) spread = std::max(spread, w.at(c, j));
            if (spread < 0.5 * r) continue;
            packing.push_back({c, r});
            lower_sum += std::pow(spread, k);
        }
    }
    out.lower = lower_sum / std::pow(5.0, k);
    out.upper = upper;
    if (out.lower > out.upper) out.lower = out.upper;  // keep the bracket ordered
    return out;
}

// ---------------------------------------------------------------------------
// Mapping content DP
// ---------------------------------------------------------------------------

namespace {

// Deduplicated image points of the closed cube's lattice (restricted maps
// skip lattice points outside their domain).
std::vector<PointId> cube_image_points(const SampledMap& map, const CubeId& cube) {
    int shift = map.depth() - cube.level;
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (int a = 0; a < map.dim(); ++a) {
        lo[a] = static_cast<std::int64_t>(cube.index[a]) << shift;
        hi[a] = (static_cast<std::int64_t>(cube.index[a]) + 1) << shift;
    }
    std::vector<PointId> pts;
    std::array<std::int64_t, kMaxDim> c = lo;
    while (true) {
        LatticePoint p{};
        for (int a = 0; a < map.dim(); ++a) p[a] = static_cast<std::int32_t>(c[a]);
        if (map.in_domain(p)) pts.push_back(map.value(p));
        int a = 0;
        for (; a < map.dim(); ++a) {
            if (++c[a] <= hi[a]) break;
            c[a] = lo[a];
        }
        if (a == map.dim()) break;
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

struct DpLevels {
    // meets[level][raster]; costs defined only where meets is true.
    std::vector<std::vector<bool>> meets;
    std::vector<std::vector<double>> cost_up, cost_lo;
};

std::size_t child_raster(std::size_t parent, int level, int d, int corner_bits) {
    // parent raster at `level` (row-major, axis 0 fastest), child at level+1
    int side = 1 << level;
    std::size_t rest = parent;
    std::size_t child = 0, mul = 1;
    for (int a = 0; a < d; ++a) {
        std::size_t coord = rest % static_cast<std::size_t>(side);
        rest /= static_cast<std::size_t>(side);
        child += (2 * coord + static_cast<std::size_t>((corner_bits >> a) & 1)) * mul;
        mul *= static_cast<std::size_t>(side) * 2;
    }
    return child;
}

CubeId cube_from_raster(std::size_t raster, int level, int d) {
    CubeId cube{level, d, {}};
    int side = 1 << level;
    for (int a = 0; a < d; ++a) {
        cube.index[a] = static_cast<std::int32_t>(raster % static_cast<std::size_t>(side));
        raster /= static_cast<std::size_t>(side);
    }
    return cube;
}

DpLevels evaluate_costs(const SampledMap& map, const CellSet& E, int max_depth, int threads) {
    int d = map.dim();
    DpLevels L;
    L.meets.resize(static_cast<std::size_t>(max_depth) + 1);
    L.cost_up.resize(static_cast<std::size_t>(max_depth) + 1);
    L.cost_lo.resize(static_cast<std::size_t>(max_depth) + 1);

    // "Meets E" per cube, reduced upward from the cell mask.
    int depth = E.depth();
    std::vector<bool> current(E.total_cells(), false);
    for (std::size_t cell : E.cells()) current[cell] = true;
    for (int level = depth; level >= 0; --level) {
        if (level <= max_depth) L.meets[static_cast<std::size_t>(level)] = current;
        if (level == 0) break;
        std::size_t parent_count = std::size_t{1} << (d * (level - 1));
        std::vector<bool> parent(parent_count, false);
        int side = 1 << level;
        for (std::size_t idx = 0; idx < current.size(); ++idx) {
            if (!current[idx]) continue;
            std::size_t rest = idx, pidx = 0, mul = 1;
            for (int a = 0; a < d; ++a) {
                std::size_t coord = rest % static_cast<std::size_t>(side);
                rest /= static_cast<std::size_t>(side);
                pidx += (coord >> 1) * mul;
                mul *= static_cast<std::size_t>(side >> 1);
            }
            parent[pidx] = true;
        }
        current = std::move(parent);
    }

    for (int level = 0; level <= max_depth; ++level) {
        auto lvl = static_cast<std::size_t>(level);
        L.cost_up[lvl].assign(L.meets[lvl].size(), 0.0);
        L.cost_lo[lvl].assign(L.meets[lvl].size(), 0.0);
    }

    struct Job {
        int level;
        std::size_t raster;
    };
    std::vector<Job> jobs;
    for (int level = 0; level <= max_depth; ++level)
        for (std::size_t r = 0; r < L.meets[static_cast<std::size_t>(level)].size(); ++r)
            if (L.meets[static_cast<std::size_t>(level)][r]) jobs.push_back({level, r});

    parallel_for(jobs.size(), threads, [&](std::size_t ji) {
        const Job& job = jobs[ji];
        CubeId cube = cube_from_raster(job.raster, job.level, d);
        auto pts = cube_image_points(map, cube);
        if (pts.empty()) return;
        double side_m = std::pow(cube.side(), map.m());
        ContentBracket b = hausdorff_content(map.target(), pts, map.n());
        L.cost_up[static_cast<std::size_t>(job.level)][job.raster] = b.upper * side_m;
        L.cost_lo[static_cast<std::size_t>(job.level)][job.raster] = b.lower * side_m;
    });
    return L;
}

double dp_fold(const DpLevels& L, const std::vector<std::vector<double>>& cost, int d, int max_depth,
               std::vector<std::vector<double>>* best_out) {
    std::vector<std::vector<double>> best(static_cast<std::size_t>(max_depth) + 1);
    for (int level = max_depth; level >= 0; --level) {
        auto lvl = static_cast<std::size_t>(level);
        best[lvl].assign(L.meets[lvl].size(), 0.0);
        for (std::size_t r = 0; r < best[lvl].size(); ++r) {
            if (!L.meets[lvl][r]) continue;
            double c = cost[lvl][r];
            if (level == max_depth) {
                best[lvl][r] = c;
                continue;
            }
            double kids = 0;
            for (int cbit = 0; cbit < (1 << d); ++cbit) kids += best[lvl + 1][child_raster(r, level, d, cbit)];
            best[lvl][r] = std::min(c, kids);
        }
    }
    if (best_out) *best_out = std::move(best);
    return best_out ? (*best_out)[0][0] : best[0][0];
}

void extract_antichain(const DpLevels& L, const std::vector<std::vector<double>>& best, int d, int max_depth,
                       int level, std::size_t raster, MappingContentResult* out) {
    auto lvl = static_cast<std::size_t>(level);
    if (!L.meets[lvl][raster]) return;
    double c = L.cost_up[lvl][raster];
    if (level == max_depth || c <= best[lvl][raster] + 1e-15) {
        out->antichain.push_back(cube_from_raster(raster, level, d));
        out->costs.push_back(c);
        return;
    }
    for (int cbit = 0; cbit < (1 << d); ++cbit)
        extract_antichain(L, best, d, max_depth, level + 1, child_raster(raster, level, d, cbit), out);
}

}  // namespace

MappingContentResult mapping_content(const SampledMap& map, const CellSet& E, int max_depth, int threads) {
    if (max_depth < 0 || max_depth > map.depth()) throw ArgumentError("bad DP depth");
    MappingContentResult out;
    if (E.empty_set()) return out;
    DpLevels L = evaluate_costs(map, E, max_depth, threads);
    std::vector<std::vector<double>> best;
    out.value = dp_fold(L, L.cost_up, map.dim(), max_depth, &best);
    std::vector<std::vector<double>> best_lo;
    out.lower = dp_fold(L, L.cost_lo, map.dim(), max_depth, &best_lo);
    out.lower = std::min(out.lower, out.value);
    extract_antichain(L, best, map.dim(), max_depth, 0, 0, &out);
    return out;
}

// ---------------------------------------------------------------------------

double lebesgue_measure(const CellSet& cells) { return cells.measure(); }

namespace {

// Lattice points of E inside a cube (corners of member cells).
std::vector<LatticePoint> set_lattice_points(const SampledMap& map, const CellSet& E, const CubeId& cube) {
    int shift = map.depth() - cube.level;
    std::vector<LatticePoint> pts;
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (int a = 0; a < map.dim(); ++a) {
        lo[a] = static_cast<std::int64_t>(cube.index[a]) << shift;
        hi[a] = (static_cast<std::int64_t>(cube.index[a]) + 1) << shift;
    }
    std::array<std::int64_t, kMaxDim> c = lo;
    while (true) {
        LatticePoint p{};
        for (int a = 0; a < map.dim(); ++a) p[a] = static_cast<std::int32_t>(c[a]);
        if (E.contains_lattice_point(p) && map.in_domain(p)) pts.push_back(p);
        int a = 0;
        for (; a < map.dim(); ++a) {
            if (++c[a] <= hi[a]) break;
            c[a] = lo[a];
        }
        if (a == map.dim()) break;
    }
    return pts;
}

double bbox_diameter(const std::vector<LatticePoint>& pts, int dim, int depth) {
    if (pts.empty()) return 0;
    double h = std::ldexp(1.0, -depth);
    double s = 0;
    for (int a = 0; a < dim; ++a) {
        std::int32_t lo = pts[0][a], hi = pts[0][a];
        for (const auto& p : pts) {
            lo = std::min(lo, p[a]);
            hi = std::max(hi, p[a]);
        }
        double delta = static_cast<double>(hi - lo) * h;
        s += delta * delta;
    }
    return std::sqrt(s);
}

}  // namespace

double arbitrary_mapping_content_upper(const SampledMap& map, const CellSet& E, int max_depth, int threads) {
    if (E.empty_set()) throw ArgumentError("empty cell set");
    MappingContentResult dp = mapping_content(map, E, max_depth, threads);

    auto set_cost = [&](const std::vector<LatticePoint>& pts, double content_cap) {
        if (pts.empty()) return 0.0;
        std::vector<PointId> img;
        img.reserve(pts.size());
        for (const auto& p : pts) img.push_back(map.value(p));
        std::sort(img.begin(), img.end());
        img.erase(std::unique(img.begin(), img.end()), img.end());
        double up = hausdorff_content(map.target(), img, map.n()).upper;
        if (content_cap >= 0) up = std::min(up, content_cap);
        double diam = bbox_diameter(pts, map.dim(), map.depth());
        return up * std::pow(diam, map.m());
    };

    // (a) The DP antichain with each cube replaced by its E-intersection.
    // A cover of the full cube image also covers the smaller one, so the
    // cube's own content is a legitimate cap.
    double cand_a = 0;
    for (std::size_t i = 0; i < dp.antichain.size(); ++i) {
        auto pts = set_lattice_points(map, E, dp.antichain[i]);
        double cube_content = dp.costs[i] / std::pow(dp.antichain[i].side(), map.m());
        cand_a += set_cost(pts, cube_content);
    }

    // (c) The single set E.
    auto all_pts = set_lattice_points(map, E, CubeId::root(map.dim()));
    double cand_c = set_cost(all_pts, -1);

    // (b) Image clusters pulled back: partition the points by the nearest
    // element of a small farthest-point net of the image.
    double cand_b = cand_c;
    {
        std::vector<PointId> img;
        img.reserve(all_pts.size());
        for (const auto& p : all_pts) img.push_back(map.value(p));
        std::vector<PointId> uniq = img;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        if (uniq.size() >= 2) {
            std::size_t net_size = std::min<std::size_t>(8, uniq.size());
            std::vector<PointId> net{uniq[0]};
            while (net.size() < net_size) {
                double far = -1;
                PointId pick = uniq[0];
                for (PointId q : uniq) {
                    double dmin = std::numeric_limits<double>::infinity();
                    for (PointId c : net) dmin = std::min(dmin, map.target().distance(q, c));
                    if (dmin > far) {
                        far = dmin;
                        pick = q;
                    }
                }
                if (far <= 0) break;
                net.push_back(pick);
            }
            std::vector<std::vector<LatticePoint>> clusters(net.size());
            for (std::size_t i = 0; i < all_pts.size(); ++i) {
                std::size_t bestc = 0;
                double bestd = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < net.size(); ++c) {
                    double d = map.target().distance(img[i], net[c]);
                    if (d < bestd) {
                        bestd = d;
                        bestc = c;
                    }
                }
                clusters[bestc].push_back(all_pts[i]);
            }
            double total = 0;
            for (const auto& cl : clusters) total += set_cost(cl, -1);
            cand_b = total;
        }
    }

    return std::min({cand_a, cand_b, cand_c});
}

double local_density(const SampledMap& map, const LatticePoint& x, std::span<const double> radii) {
    if (radii.empty()) throw ArgumentError("local density requires at least one radius");
    double h = std::ldexp(1.0, -map.depth());
    double best = std::numeric_limits<double>::infinity();
    std::size_t total = map.lattice_size();
    for (double r : radii) {
        if (r <= 0 || r > 1) throw ArgumentError("radii must lie in (0, 1]");
        std::vector<PointId> img;
        for (std::size_t i = 0; i < total; ++i) {
            LatticePoint p = map.lattice_coords(i);
            if (!map.in_domain(p)) continue;
            double s = 0;
            for (int a = 0; a < map.dim(); ++a) {
                double delta = static_cast<double>(p[a] - x[a]) * h;
                s += delta * delta;
            }
            if (s <= r * r) img.push_back(map.value(p));
        }
        if (img.empty()) continue;
        std::sort(img.begin(), img.end());
        img.erase(std::unique(img.begin(), img.end()), img.end());
        double up = hausdorff_content(map.target(), img, map.n()).upper;
        best = std::min(best, up / std::pow(r, map.n()));
    }
    return std::isfinite(best) ? best : 0.0;
}

double lambda_constant(int n) {
    static std::mutex mu;
    static double cache[kMaxDim + 1] = {0};
    if (n < 1 || n > kMaxDim) throw ArgumentError("lambda constant defined for 1 <= n <= 4");
    std::lock_guard<std::mutex> lock(mu);
    if (cache[n] != 0) return cache[n];
    int depth = n == 1 ? 6 : (n == 2 ? 5 : 3);
    auto space = std::make_shared<EuclideanSpace>(n);
    std::int64_t extent = (std::int64_t{1} << depth) + 1;
    std::size_t total = 1;
    for (int a = 0; a < n; ++a) total *= static_cast<std::size_t>(extent);
    std::vector<PointId> pts;
    pts.reserve(total);
    double h = std::ldexp(1.0, -depth);
    std::vector<double> coords(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        for (int a = 0; a < n; ++a) {
            coords[static_cast<std::size_t>(a)] = static_cast<double>(rest % static_cast<std::size_t>(extent)) * h;
            rest /= static_cast<std::size_t>(extent);
        }
        pts.push_back(space->intern(coords));
    }
    cache[n] = hausdorff_content(*space, pts, n).upper;
    return cache[n];
}

}  // namespace mapcontent
