#include "mapcontent/hard_sard.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "mapcontent/rng.hpp"

namespace mapcontent {

// ---------------------------------------------------------------------------
// GridFunction
// ---------------------------------------------------------------------------

GridFunction GridFunction::make(int dim, int depth, int out_dim) {
    GridFunction g;
    g.dim = dim;
    g.depth = depth;
    g.out_dim = out_dim;
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>((std::size_t{1} << depth) + 1);
    g.slot.assign(total, -1);
    return g;
}

void GridFunction::set(std::size_t linear, const std::array<double, 4>& v) {
    if (slot[linear] < 0) {
        slot[linear] = static_cast<std::int32_t>(values.size());
        values.push_back(v);
    } else {
        values[static_cast<std::size_t>(slot[linear])] = v;
    }
}

namespace {

std::vector<LatticePoint> set_points(const SampledMap& map, const CellSet& cells) {
    std::vector<LatticePoint> pts;
    std::size_t total = map.lattice_size();
    for (std::size_t i = 0; i < total; ++i) {
        LatticePoint p = map.lattice_coords(i);
        if (cells.contains_lattice_point(p) && map.in_domain(p)) pts.push_back(p);
    }
    return pts;
}

}  // namespace

GridFunction GridFunction::identity(const SampledMap& map, const CellSet& domain) {
    GridFunction g = make(map.dim(), map.depth(), map.dim());
    double h = std::ldexp(1.0, -map.depth());
    for (const auto& p : set_points(map, domain)) {
        std::array<double, 4> v{};
        for (int a = 0; a < map.dim(); ++a) v[static_cast<std::size_t>(a)] = static_cast<double>(p[a]) * h;
        g.set(map.lattice_linear(p), v);
    }
    return g;
}

GridFunction GridFunction::swap_xy(const SampledMap& map, const CellSet& domain) {
    GridFunction g = identity(map, domain);
    for (auto& v : g.values) std::swap(v[0], v[1]);
    return g;
}

// ---------------------------------------------------------------------------
// check_hard_sard
// ---------------------------------------------------------------------------

HardSardCertificate check_hard_sard(const SampledMap& map, const CellSet& E, const GridFunction& g,
                                    const HsTolerances& tol) {
    if (E.empty_set()) throw ArgumentError("empty candidate set");
    const int d = map.dim();
    const int n = map.n();
    const double h = std::ldexp(1.0, -map.depth());
    const double eps_match = map.eps_match();
    const double x_tol = tol.fiber_x_factor * eps_match;
    const double d_tol = tol.fiber_d_factor * eps_match;

    std::vector<LatticePoint> pts;
    std::vector<std::array<double, 4>> gvals;
    std::vector<PointId> fvals;
    for (const auto& p : set_points(map, E)) {
        std::size_t lin = map.lattice_linear(p);
        if (!g.defined_at(lin)) continue;
        pts.push_back(p);
        gvals.push_back(g.at(lin));
        fvals.push_back(map.value(p));
    }
    if (pts.size() < 2) throw ArgumentError("candidate set holds fewer than two usable lattice points");

    HardSardCertificate cert;
    cert.cells = E;
    cert.g = g;
    auto& res = cert.residuals;
    res.bilip_g_low = res.bilip_fy_low = std::numeric_limits<double>::infinity();

    auto consider = [&](std::size_t i, std::size_t j) {
        double dp = 0;
        for (int a = 0; a < d; ++a)
            dp = std::max(dp, std::abs(static_cast<double>(pts[i][a] - pts[j][a])) * h);
        if (dp == 0) return;
        double dgx = 0, dgy = 0;
        for (int a = 0; a < d; ++a) {
            double delta = std::abs(gvals[i][static_cast<std::size_t>(a)] - gvals[j][static_cast<std::size_t>(a)]);
            if (a < n)
                dgx = std::max(dgx, delta);
            else
                dgy = std::max(dgy, delta);
        }
        double dg = std::max(dgx, dgy);
        double df = map.target_distance(fvals[i], fvals[j]);

        if (dg > 0) {
            double r = dg / dp;
            res.bilip_g_low = std::min(res.bilip_g_low, r);
            res.bilip_g_high = std::max(res.bilip_g_high, r);
            double rf = std::max(df, dgy) / dg;
            res.bilip_fy_low = std::min(res.bilip_fy_low, rf);
            res.bilip_fy_high = std::max(res.bilip_fy_high, rf);
        } else {
            res.bilip_g_low = 0;
        }
        // fiber structure both ways
        if (dgx <= h && df > d_tol) ++res.fiber_violations;
        if (df <= eps_match && dgx > x_tol) ++res.fiber_violations;
    };

    std::size_t all_pairs = pts.size() * (pts.size() - 1) / 2;
    if (all_pairs <= tol.pair_cap) {
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) consider(i, j);
    } else {
        Rng rng(tol.seed);
        for (std::size_t t = 0; t < tol.pair_cap; ++t) {
            std::size_t i = rng.next_below(pts.size());
            std::size_t j = rng.next_below(pts.size());
            if (i != j) consider(i, j);
        }
    }
    if (!std::isfinite(res.bilip_g_low)) res.bilip_g_low = 0;
    if (!std::isfinite(res.bilip_fy_low)) res.bilip_fy_low = 0;

    double worst = 0;
    for (double v : {res.bilip_g_high, res.bilip_fy_high}) worst = std::max(worst, v);
    for (double v : {res.bilip_g_low, res.bilip_fy_low})
        worst = std::max(worst, v > 0 ? 1.0 / v : std::numeric_limits<double>::infinity());
    cert.c_lip = worst;
    cert.accepted = res.fiber_violations == 0 && std::isfinite(worst) && worst <= tol.c_star;
    return cert;
}

// ---------------------------------------------------------------------------
// Slices and shears
// ---------------------------------------------------------------------------

namespace {

struct FiberTable {
    // distinct y-coordinates (last m axes) with their lattice points
    std::vector<std::array<std::int32_t, 4>> ys;
    std::vector<std::vector<LatticePoint>> points;
};

FiberTable fibers_of(const SampledMap& map, const CellSet& F) {
    FiberTable t;
    std::map<std::array<std::int32_t, 4>, std::size_t> index;
    for (const auto& p : set_points(map, F)) {
        std::array<std::int32_t, 4> y{};
        for (int a = map.n(); a < map.dim(); ++a) y[static_cast<std::size_t>(a - map.n())] = p[a];
        auto [it, fresh] = index.try_emplace(y, t.ys.size());
        if (fresh) {
            t.ys.push_back(y);
            t.points.emplace_back();
        }
        t.points[it->second].push_back(p);
    }
    return t;
}

}  // namespace

SliceChoice select_y_slice(const SampledMap& map, const CellSet& F, const HsTolerances& tol) {
    if (F.empty_set()) throw ArgumentError("empty set");
    const double h = std::ldexp(1.0, -map.depth());
    const double eps_match = map.eps_match();

    // supplemented-map pre-check on F
    auto pts = set_points(map, F);
    if (pts.size() < 2) throw ArgumentError("set holds fewer than two lattice points");
    double low = std::numeric_limits<double>::infinity(), high = 0;
    LatticePoint worst_a{}, worst_b{};
    Rng rng(tol.seed);
    std::size_t all_pairs = pts.size() * (pts.size() - 1) / 2;
    std::size_t trials = std::min(all_pairs, tol.pair_cap);
    auto probe = [&](std::size_t i, std::size_t j) {
        double dp = 0, dy = 0;
        for (int a = 0; a < map.dim(); ++a) {
            double delta = std::abs(static_cast<double>(pts[i][a] - pts[j][a])) * h;
            dp = std::max(dp, delta);
            if (a >= map.n()) dy = std::max(dy, delta);
        }
        if (dp == 0) return;
        double num = std::max(map.target_distance(map.value(pts[i]), map.value(pts[j])), dy);
        double r = num / dp;
        if (r < low) {
            low = r;
            worst_a = pts[i];
            worst_b = pts[j];
        }
        high = std::max(high, r);
    };
    if (all_pairs <= tol.pair_cap) {
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) probe(i, j);
    } else {
        for (std::size_t t = 0; t < trials; ++t) {
            std::size_t i = rng.next_below(pts.size());
            std::size_t j = rng.next_below(pts.size());
            if (i != j) probe(i, j);
        }
    }
    if (!(low > 0) || !std::isfinite(low))
        throw NotBiLipschitzError("supplemented map degenerates near lattice points (" +
                                  std::to_string(worst_a[0]) + "," + std::to_string(worst_a[1]) + ") and (" +
                                  std::to_string(worst_b[0]) + "," + std::to_string(worst_b[1]) + ")");

    FiberTable fib = fibers_of(map, F);
    std::vector<std::vector<PointId>> images(fib.ys.size());
    for (std::size_t i = 0; i < fib.ys.size(); ++i) {
        for (const auto& p : fib.points[i]) images[i].push_back(map.value(p));
        std::sort(images[i].begin(), images[i].end());
        images[i].erase(std::unique(images[i].begin(), images[i].end()), images[i].end());
    }

    double cell_weight = std::pow(h, map.m());
    SliceChoice best;
    best.precheck_low = low;
    best.precheck_high = high;
    double best_score = -1;
    for (std::size_t yi = 0; yi < fib.ys.size(); ++yi) {
        double score = 0;
        for (std::size_t zi = 0; zi < fib.ys.size(); ++zi) {
            std::vector<PointId> matched;
            for (PointId q : images[zi]) {
                for (PointId p : images[yi]) {
                    if (map.target_distance(q, p) <= eps_match) {
                        matched.push_back(q);
                        break;
                    }
                }
            }
            if (matched.empty()) continue;
            score += hausdorff_content(map.target(), matched, map.n()).upper * cell_weight;
        }
        if (score > best_score) {
            best_score = score;
            best.y = fib.ys[yi];
        }
    }
    best.score = best_score;

    std::vector<PointId> whole;
    for (const auto& img : images) whole.insert(whole.end(), img.begin(), img.end());
    double content_f = hausdorff_content(map.target(), whole, map.n()).upper;
    double L = std::max(high, 1.0 / low);
    double measure = lebesgue_measure(F);
    best.bound = content_f > 0 ? measure * measure / (std::pow(L, map.n()) * content_f) : 0.0;
    return best;
}

ShearStep construct_shear(const SampledMap& map, const CellSet& F, const std::array<std::int32_t, 4>& y_slice,
                          const HsTolerances& tol) {
    (void)tol;
    const double eps_match = map.eps_match();
    const double h = std::ldexp(1.0, -map.depth());

    // slice lattice points and their images
    std::vector<LatticePoint> slice;
    for (const auto& p : set_points(map, F)) {
        bool on = true;
        for (int a = map.n(); a < map.dim(); ++a)
            if (p[a] != y_slice[static_cast<std::size_t>(a - map.n())]) on = false;
        if (on) slice.push_back(p);
    }
    if (slice.empty()) throw StateError("selected slice holds no lattice points");
    std::vector<PointId> slice_img(slice.size());
    for (std::size_t i = 0; i < slice.size(); ++i) slice_img[i] = map.value(slice[i]);

    // nearest-image lookup; ties resolved toward the smaller lattice index
    auto lookup_x = [&](PointId z, double* out_dist) {
        double bestd = std::numeric_limits<double>::infinity();
        std::size_t best = 0;
        for (std::size_t i = 0; i < slice.size(); ++i) {
            double dd = map.target_distance(z, slice_img[i]);
            if (dd < bestd - 1e-15) {
                bestd = dd;
                best = i;
            }
        }
        if (out_dist) *out_dist = bestd;
        return slice[best];
    };

    ShearStep step;
    step.y_slice = y_slice;
    step.e1 = CellSet(map.dim(), map.depth());
    step.g1 = GridFunction::make(map.dim(), map.depth(), map.dim());

    // cell membership via the cell's low-corner sample
    for (std::size_t cell : F.cells()) {
        LatticePoint corner = F.cell_coords(cell);
        if (!map.in_domain(corner)) continue;
        double dist = 0;
        lookup_x(map.value(corner), &dist);
        if (dist <= eps_match) step.e1.set_cell(cell);
    }

    for (const auto& p : set_points(map, step.e1)) {
        double dist = 0;
        LatticePoint src = lookup_x(map.value(p), &dist);
        std::array<double, 4> v{};
        for (int a = 0; a < map.n(); ++a) v[static_cast<std::size_t>(a)] = static_cast<double>(src[a]) * h;
        // the y-coordinate is carried over exactly
        for (int a = map.n(); a < map.dim(); ++a) v[static_cast<std::size_t>(a)] = static_cast<double>(p[a]) * h;
        step.g1.set(map.lattice_linear(p), v);
    }
    return step;
}

// ---------------------------------------------------------------------------
// Directional iteration
// ---------------------------------------------------------------------------

DirectionalResult iterate_directional(const SampledMap& map, const CellSet& F, double alpha, double L,
                                      const HsTolerances& tol, int threads) {
    (void)threads;
    DirectionalResult out;
    out.garbage = CellSet(map.dim(), map.depth());
    const double alpha_prime = alpha / 2.0;
    const double h = std::ldexp(1.0, -map.depth());

    CellSet current = F;
    double l_used = std::max(1.0, L);
    std::size_t iter_cap = 64;
    for (std::size_t iter = 0; iter < iter_cap; ++iter) {
        out.step_measures.push_back(lebesgue_measure(current));
        if (lebesgue_measure(current) < alpha_prime) break;

        SliceChoice slice = select_y_slice(map, current, tol);
        l_used = std::max({l_used, slice.precheck_high, 1.0 / slice.precheck_low});
        if (out.measured_eta == 0) {
            out.measured_eta = std::max(slice.score, 1e-9);
            double analytic_cap =
                std::ceil(std::pow(l_used, 2 * map.n()) / out.measured_eta) + 1;
            if (analytic_cap < static_cast<double>(iter_cap)) iter_cap = static_cast<std::size_t>(analytic_cap);
        }

        ShearStep shear = construct_shear(map, current, slice.y, tol);
        CellSet e_cells = shear.e1.set_intersection(current);
        if (e_cells.empty_set()) {
            out.garbage = out.garbage.set_union(current);
            current = CellSet(map.dim(), map.depth());
            break;
        }

        // Greedy pruning: drop the lattice point in the most two-sided
        // violations of g1 until none remain.
        auto pts = set_points(map, e_cells);
        std::vector<std::array<double, 4>> gv(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) gv[i] = shear.g1.at(map.lattice_linear(pts[i]));
        double band = 2.0 * l_used * l_used;
        std::vector<bool> removed(pts.size(), false);
        auto ratio = [&](std::size_t i, std::size_t j) {
            double dp = 0, dg = 0;
            for (int a = 0; a < map.dim(); ++a) {
                dp = std::max(dp, std::abs(static_cast<double>(pts[i][a] - pts[j][a])) * h);
                dg = std::max(dg, std::abs(gv[i][static_cast<std::size_t>(a)] - gv[j][static_cast<std::size_t>(a)]));
            }
            if (dp == 0) return 1.0;
            return dg / dp;
        };
        while (true) {
            std::vector<std::size_t> viol(pts.size(), 0);
            std::size_t worst = 0, worst_count = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (removed[i]) continue;
                for (std::size_t j = i + 1; j < pts.size(); ++j) {
                    if (removed[j]) continue;
                    double r = ratio(i, j);
                    if (r > band || r < 1.0 / band) {
                        ++viol[i];
                        ++viol[j];
                    }
                }
            }
            for (std::size_t i = 0; i < pts.size(); ++i)
                if (!removed[i] && viol[i] > worst_count) {
                    worst_count = viol[i];
                    worst = i;
                }
            if (worst_count == 0) break;
            removed[worst] = true;
        }

        // Retained cells: all of whose corner points survived the pruning.
        CellSet pruned_cells(map.dim(), map.depth());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!removed[i]) continue;
            // every cell incident to a removed corner is dropped
            for (std::size_t cell : e_cells.cells()) {
                LatticePoint c = e_cells.cell_coords(cell);
                bool incident = true;
                for (int a = 0; a < map.dim(); ++a)
                    if (pts[i][a] < c[a] || pts[i][a] > c[a] + 1) incident = false;
                if (incident) pruned_cells.set_cell(cell);
            }
        }
        CellSet retained = e_cells.set_difference(pruned_cells);

        if (!retained.empty_set()) {
            HardSardCertificate cert = check_hard_sard(map, retained, shear.g1, tol);
            out.certificates.push_back(std::move(cert));
        }
        out.garbage = out.garbage.set_union(pruned_cells);
        current = current.set_difference(e_cells);
    }
    out.garbage = out.garbage.set_union(current);
    return out;
}

ContentMeasureReport content_measure_comparison(const SampledMap& map, const HardSardCertificate& cert,
                                                int threads) {
    if (!cert.accepted) throw StateError("certificate was not accepted");
    ContentMeasureReport rep;
    rep.measure = lebesgue_measure(cert.cells);
    rep.content = mapping_content(map, cert.cells, map.depth() - 1, threads).value;
    rep.ratio = rep.measure > 0 ? rep.content / rep.measure : 0.0;
    rep.bracket = std::pow(5.0 * std::max(1.0, cert.c_lip), map.dim());
    rep.within = rep.ratio >= 1.0 / rep.bracket && rep.ratio <= rep.bracket;
    return rep;
}

// ---------------------------------------------------------------------------

void HardSardCertificate::save_json(const std::string& path) const {
    nlohmann::json j;
    nlohmann::json runs = nlohmann::json::array();
    for (auto [start, len] : cells.run_length_encode()) runs.push_back({start, len});
    j["cells_rle"] = std::move(runs);
    j["depth"] = cells.depth();
    j["dim"] = cells.dim();
    nlohmann::json vals = nlohmann::json::array();
    for (std::size_t lin = 0; lin < g.slot.size(); ++lin) {
        if (g.slot[lin] < 0) continue;
        nlohmann::json row = nlohmann::json::array();
        row.push_back(lin);
        for (int a = 0; a < g.out_dim; ++a) row.push_back(g.values[static_cast<std::size_t>(g.slot[lin])][static_cast<std::size_t>(a)]);
        vals.push_back(std::move(row));
    }
    j["g_values"] = std::move(vals);
    j["c_lip"] = c_lip;
    j["accepted"] = accepted;
    j["restricted_only"] = restricted_only;
    j["residuals"] = {{"bilip_g_low", residuals.bilip_g_low},
                      {"bilip_g_high", residuals.bilip_g_high},
                      {"fiber_violations", residuals.fiber_violations},
                      {"bilip_fy_low", residuals.bilip_fy_low},
                      {"bilip_fy_high", residuals.bilip_fy_high}};
    std::ofstream outf(path);
    if (!outf) throw ArgumentError("cannot write " + path);
    outf << j.dump(2) << "\n";
}

}  // namespace mapcontent
