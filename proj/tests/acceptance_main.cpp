// Acceptance suite: one check per shipping criterion, each printing a
// [PASS]/[FAIL] line with the measured quantities. Exit code is the number
// of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mapcontent/config.hpp"
#include "mapcontent/experiments.hpp"
#include "mapcontent/runner.hpp"
#include "mapcontent/rng.hpp"
#include "mapcontent/svg.hpp"

using namespace mapcontent;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail, double seconds) {
    std::printf("[%s] C%02d %-28s %s  (%.1fs)\n", pass ? "PASS" : "FAIL", index, name.c_str(), detail.c_str(),
                seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void run_criterion(int index, const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    auto start = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        auto [p, d] = fn();
        pass = p;
        detail = d;
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(index, name, pass, detail, secs);
}

double cube_cost(const SampledMap& map, const CubeId& cube) {
    int shift = map.depth() - cube.level;
    std::vector<PointId> pts;
    std::array<std::int64_t, 4> c{};
    for (int a = 0; a < map.dim(); ++a) c[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(cube.index[a]) << shift;
    std::array<std::int64_t, 4> lo = c;
    while (true) {
        LatticePoint p{};
        for (int a = 0; a < map.dim(); ++a) p[a] = static_cast<std::int32_t>(c[static_cast<std::size_t>(a)]);
        pts.push_back(map.value(p));
        int a = 0;
        for (; a < map.dim(); ++a) {
            if (++c[static_cast<std::size_t>(a)] <= lo[static_cast<std::size_t>(a)] + (std::int64_t{1} << shift)) break;
            c[static_cast<std::size_t>(a)] = lo[static_cast<std::size_t>(a)];
        }
        if (a == map.dim()) break;
    }
    return hausdorff_content(map.target(), pts, map.n()).upper * std::pow(cube.side(), map.m());
}

// True exhaustive enumeration: the cost list of every dyadic antichain under
// a cube, assembled independently of the DP recursion.
std::vector<double> antichain_costs(const SampledMap& map, const CubeId& cube, int max_depth) {
    std::vector<double> out{cube_cost(map, cube)};
    if (cube.level == max_depth) return out;
    std::vector<std::vector<double>> kid_costs;
    for (const auto& ch : children(cube, max_depth)) kid_costs.push_back(antichain_costs(map, ch, max_depth));
    // cartesian sums of the child alternatives
    std::vector<double> sums{0.0};
    for (const auto& kc : kid_costs) {
        std::vector<double> next;
        next.reserve(sums.size() * kc.size());
        for (double s : sums)
            for (double v : kc) next.push_back(s + v);
        sums = std::move(next);
    }
    out.insert(out.end(), sums.begin(), sums.end());
    return out;
}

SampledMap random_finite_map(int depth, Rng& rng) {
    const std::size_t npts = 12;
    std::vector<double> m(npts * npts, 0.0);
    for (std::size_t i = 0; i < npts; ++i)
        for (std::size_t j = i + 1; j < npts; ++j) {
            double d = 0.05 + rng.next_double();
            m[i * npts + j] = d;
            m[j * npts + i] = d;
        }
    // shortest-path closure turns the random weights into a metric
    for (std::size_t k = 0; k < npts; ++k)
        for (std::size_t i = 0; i < npts; ++i)
            for (std::size_t j = 0; j < npts; ++j)
                m[i * npts + j] = std::min(m[i * npts + j], m[i * npts + k] + m[k * npts + j]);
    auto space = std::make_shared<FiniteMatrixSpace>(npts, std::move(m));
    std::int32_t extent = (1 << depth) + 1;
    std::vector<PointId> values;
    values.reserve(static_cast<std::size_t>(extent) * static_cast<std::size_t>(extent));
    for (int i = 0; i < extent * extent; ++i) values.push_back(static_cast<PointId>(rng.next_below(npts)));
    return SampledMap(1, 1, depth, space, std::move(values), 64.0);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(5);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------

std::pair<bool, std::string> c1_dp_oracle() {
    auto start = std::chrono::steady_clock::now();
    double worst_gap = 0;
    int checked = 0;
    auto check_map = [&](const SampledMap& map) {
        CellSet full = CellSet::full(2, map.depth());
        double dp = mapping_content(map, full, 3).value;
        auto all = antichain_costs(map, CubeId::root(2), 3);
        double oracle = *std::min_element(all.begin(), all.end());
        worst_gap = std::max(worst_gap, std::abs(dp - oracle));
        ++checked;
    };
    BuiltinParams p;
    p.depth = 4;
    p.star_k = 2;
    check_map(SampledMap::from_builtin("projection", p));
    check_map(SampledMap::from_builtin("constant", p));
    check_map(SampledMap::from_builtin("star9", p));
    Rng rng(2024);
    for (int t = 0; t < 20; ++t) check_map(random_finite_map(3, rng));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = worst_gap <= 1e-12 && secs < 10.0;
    return {pass, "maps=" + std::to_string(checked) + " worst-gap=" + fmt(worst_gap) + " time=" + fmt(secs) + "s"};
}

std::pair<bool, std::string> c2_projection_content() {
    BuiltinParams p;
    p.depth = 4;
    SampledMap proj = SampledMap::from_builtin("projection", p);
    CellSet full = CellSet::full(2, 4);
    double v = mapping_content(proj, full, 3).value;
    SampledMap cst = SampledMap::from_builtin("constant", p);
    double z = mapping_content(cst, full, 3).value;
    bool pass = std::abs(v - 1.0) <= 0.02 && z == 0.0;
    return {pass, "projection=" + fmt(v) + " constant=" + fmt(z)};
}

std::pair<bool, std::string> c3_subadditive_dominated() {
    const double c_dom = 8.0;  // frozen domination constant
    BuiltinParams p;
    p.depth = 4;
    p.star_k = 2;
    SampledMap star = SampledMap::from_builtin("star9", p);
    SampledMap proj = SampledMap::from_builtin("projection", p);
    Rng rng(7);
    double worst_sub = -1e9, worst_dom = 0;
    int trials = 0;
    for (const SampledMap* map : {&star, &proj}) {
        for (int t = 0; t < 50; ++t) {
            CellSet A(2, 4), B(2, 4);
            for (std::size_t cell = 0; cell < A.total_cells(); ++cell) {
                double u = rng.next_double();
                if (u < 0.3)
                    A.set_cell(cell);
                else if (u < 0.6)
                    B.set_cell(cell);
            }
            if (A.empty_set() || B.empty_set()) continue;
            double va = mapping_content(*map, A, 3).value;
            double vb = mapping_content(*map, B, 3).value;
            double vab = mapping_content(*map, A.set_union(B), 3).value;
            worst_sub = std::max(worst_sub, vab - va - vb);
            double denom = lebesgue_measure(A) * std::pow(map->declared_lipschitz(), map->n());
            if (denom > 0) worst_dom = std::max(worst_dom, va / denom);
            ++trials;
        }
    }
    bool pass = trials >= 100 && worst_sub <= 1e-9 && worst_dom <= c_dom;
    return {pass, "trials=" + std::to_string(trials) + " worst-subadd-slack=" + fmt(worst_sub) +
                      " worst-domination=" + fmt(worst_dom) + " (limit " + fmt(c_dom) + ")"};
}

std::pair<bool, std::string> c4_md_certification() {
    MdFitOptions fit;
    fit.c0 = 3;
    double worst_linear = 0;
    Rng rng(11);
    for (int t = 0; t < 6; ++t) {
        BuiltinParams lin;
        lin.depth = 4;
        lin.matrix = {{rng.next_in(-1, 1), rng.next_in(-1, 1)}, {rng.next_in(-1, 1), rng.next_in(-1, 1)}};
        SampledMap amap = SampledMap::from_builtin("linear", lin);
        for (const CubeId& cube : {CubeId::root(2), CubeId{1, 2, {1, 0}}, CubeId{2, 2, {2, 3}}}) {
            MdResult r = fit_seminorm(amap, cube, fit);
            worst_linear = std::max(worst_linear, r.md_upper);
        }
    }

    // bracket order and the norm bound over every Good cube
    bool order_ok = true, bound_ok = true;
    long good_cubes = 0;
    const double eps = 0.1, delta = 0.2;
    for (const char* name : {"projection", "star9"}) {
        BuiltinParams p;
        p.depth = 4;
        p.star_k = 2;
        SampledMap map = SampledMap::from_builtin(name, p);
        Classification cls = classify_cubes(map, eps, delta, 3, fit);
        for (int level = 0; level <= 3; ++level) {
            for (std::size_t r = 0; r < cls.levels[static_cast<std::size_t>(level)].size(); ++r) {
                const MdResult& f = cls.fits[static_cast<std::size_t>(level)][r];
                if (f.md_lower > f.md_upper + 1e-12) order_ok = false;
                if (cls.levels[static_cast<std::size_t>(level)][r].kind != CubeClassKind::Good) continue;
                ++good_cubes;
                if (!norm_bound_check(map, f, eps, fit).holds) bound_ok = false;
            }
        }
    }
    bool pass = worst_linear <= 1e-9 && order_ok && bound_ok && good_cubes > 0;
    return {pass, "worst-linear-md=" + fmt(worst_linear) + " bracket-order=" + (order_ok ? "ok" : "violated") +
                      " norm-bound-good-cubes=" + std::to_string(good_cubes) + (bound_ok ? " all-hold" : " VIOLATED")};
}

std::pair<bool, std::string> c5_quantitative_differentiation() {
    MdFitOptions fit;
    fit.c0 = 3;
    const double eps = 0.05;
    SampledMap s5 = build_star_map(3, 5);
    SampledMap s6 = build_star_map(3, 6);
    double e5 = exceedance_volume(md_profile(s5, 4, fit), eps);
    double e6 = exceedance_volume(md_profile(s6, 4, fit), eps);
    bool pass = std::isfinite(e5) && std::isfinite(e6) && e6 <= e5 + 1e-12;
    return {pass, "exceedance D5=" + fmt(e5) + " D6=" + fmt(e6)};
}

std::pair<bool, std::string> c6_splitting() {
    auto start = std::chrono::steady_clock::now();
    std::vector<CubeId> grid;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) grid.push_back(CubeId{3, 2, {i, j}});
    auto res = split_separated(grid, 5, 0.01);
    bool separated = true;
    for (const auto& fam : res.families)
        for (std::size_t i = 0; i < fam.size(); ++i)
            for (std::size_t j = i + 1; j < fam.size(); ++j)
                if (dilations_intersect(fam[i], fam[j], 5)) separated = false;
    double discarded = 0;
    for (const auto& c : res.discarded) discarded += cube_measure(c);
    int bound = split_family_bound(2, 5, 0.01);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = separated && discarded < 0.01 && static_cast<int>(res.families.size()) <= bound && secs < 1.0;
    return {pass, "families=" + std::to_string(res.families.size()) + " (bound " + std::to_string(bound) +
                      ") B-measure=" + fmt(discarded) + " time=" + fmt(secs) + "s"};
}

std::pair<bool, std::string> c7_coordinate_plane() {
    Rng rng(13);
    double min_c = 1e9;
    long checked = 0;
    struct Combo {
        int n, m;
    };
    for (Combo combo : {Combo{1, 1}, Combo{2, 1}, Combo{1, 2}}) {
        int d = combo.n + combo.m;
        for (int t = 0; t < 1000; ++t) {
            std::vector<std::vector<double>> basis;
            for (int b = 0; b < combo.m; ++b) {
                std::vector<double> v(static_cast<std::size_t>(d));
                for (int a = 0; a < d; ++a) v[static_cast<std::size_t>(a)] = rng.next_in(-1, 1);
                basis.push_back(std::move(v));
            }
            FarthestPlane fp = farthest_coordinate_plane(basis, d, combo.n, combo.m);
            if (!(fp.c > 0)) return {false, "c = 0 at trial " + std::to_string(t)};
            min_c = std::min(min_c, fp.c);
            ++checked;
        }
    }
    return {true, "subspaces=" + std::to_string(checked) + " min-c=" + fmt(min_c)};
}

std::pair<bool, std::string> c8_projection_pipeline() {
    RunConfig cfg;
    cfg.builtin = "projection";
    cfg.depth = 4;
    cfg.preset = "default";
    PipelineResult res = run_decomposition(cfg.make_map(), cfg.pipeline_options());
    double covered = 0;
    for (const auto& piece : res.pieces) covered += piece.cells.measure();
    double lo = 1e9, hi = 0;
    for (const auto& rep : res.piece_reports) {
        lo = std::min(lo, rep.c_low);
        hi = std::max(hi, rep.c_high);
    }
    bool pass = res.success && !res.pieces.empty() && covered >= 0.95 && res.leftover_content < 0.05 &&
                lo >= 0.99 && hi <= 1.01;
    return {pass, "pieces=" + std::to_string(res.pieces.size()) + " covered=" + fmt(covered) +
                      " leftover=" + fmt(res.leftover_content) + " ratios=[" + fmt(lo) + "," + fmt(hi) + "]"};
}

std::pair<bool, std::string> c9_star_pipeline() {
    auto start = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.builtin = "star9";
    cfg.star_k = 2;
    cfg.depth = 5;
    cfg.preset = "default";
    SampledMap map = cfg.make_map();
    PipelineResult res = run_decomposition(map, cfg.pipeline_options());

    std::string detail;
    bool pass = true;
    if (res.success) {
        detail = "pieces=" + std::to_string(res.pieces.size()) + " leftover=" + fmt(res.leftover_content);
        for (const auto& rep : res.piece_reports)
            if (!(rep.c_low > 0)) pass = false;
        // end-to-end certificates through the rotations on a few pieces
        HsTolerances tol;
        tol.c_star = 64.0;
        int certified = 0;
        for (std::size_t pi = 0; pi < res.pieces.size() && pi < 3; ++pi) {
            const Piece& piece = res.pieces[pi];
            SampledMap rotated = rotate_map(map, piece.rotation);
            CellSet cells = rotate_cells(piece.cells, piece.rotation);
            DirectionalResult dir = iterate_directional(rotated.restrict_to(cells), cells,
                                                        0.5 * lebesgue_measure(cells),
                                                        map.declared_lipschitz(), tol);
            for (const auto& cert : dir.certificates) {
                if (!cert.accepted) pass = false;
                auto cmp = content_measure_comparison(rotated, cert);
                if (!cmp.within) pass = false;
                ++certified;
            }
        }
        detail += " certificates=" + std::to_string(certified);
    } else {
        // a structured failure report is an admissible outcome for this preset
        pass = res.failure.has_value() && !res.failure->per_level.empty();
        detail = "failure-stage=" + (res.failure ? res.failure->stage : "?") +
                 " probed-levels=" + std::to_string(res.failure ? res.failure->per_level.size() : 0);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    pass = pass && secs < 300.0;
    return {pass, detail + " time=" + fmt(secs) + "s"};
}

std::pair<bool, std::string> c10_star_harness() {
    StarExampleReport r2 = verify_star_claims(2, 5);
    StarExampleReport r3 = verify_star_claims(3, 6);
    double gap = std::abs(r2.content_lower - r3.content_lower) / std::max(r2.content_lower, r3.content_lower);
    bool pass = r2.measure_a == 0.25 && r2.tree_length == 2.0 && r3.tree_length == 3.0 &&
                r2.injectivity_violations == 0 && r3.injectivity_violations == 0 && r2.content_lower > 0 &&
                r3.content_lower > 0 && gap <= 0.25;
    return {pass, "|A|=" + fmt(r2.measure_a) + " lengths=(" + fmt(r2.tree_length) + "," + fmt(r3.tree_length) +
                      ") lower-bounds=(" + fmt(r2.content_lower) + "," + fmt(r3.content_lower) + ") gap=" +
                      fmt(gap)};
}

std::pair<bool, std::string> c11_scaling() {
    auto corpus = default_scaling_corpus(4);
    ScalingReport rep = onedim_scaling_experiment(corpus, 1, 4);
    double c_limit = rep.max_ratio;
    bool rows_ok = true;
    for (const auto& row : rep.rows) {
        if (row.eta <= 0) continue;
        if (row.diam > c_limit * std::cbrt(row.eta) + 1e-12) rows_ok = false;
    }
    bool pass = rows_ok && std::isfinite(c_limit) && c_limit > 0;
    return {pass, "rows=" + std::to_string(rep.rows.size()) + " C=" + fmt(c_limit) + " slope=" + fmt(rep.slope)};
}

std::pair<bool, std::string> c12_two_contents() {
    const double dim_const = std::sqrt(2.0);
    BuiltinParams p;
    p.depth = 4;
    p.star_k = 2;
    double worst = 0;
    bool const_ok = true;
    for (const char* name : {"projection", "constant", "star9", "shear-demo"}) {
        SampledMap map = SampledMap::from_builtin(name, p);
        CellSet full = CellSet::full(2, 4);
        double dp = mapping_content(map, full, 3).value;
        double arb = arbitrary_mapping_content_upper(map, full, 3);
        if (std::string(name) == "constant") {
            const_ok = arb == 0.0 && dp == 0.0;
        } else if (dp > 0) {
            worst = std::max(worst, arb / dp);
        }
    }
    for (double t : {0.5, 0.25}) {
        BuiltinParams q;
        q.depth = 4;
        q.scale = t;
        SampledMap map = SampledMap::from_builtin("projection", q);
        CellSet full = CellSet::full(2, 4);
        double dp = mapping_content(map, full, 3).value;
        double arb = arbitrary_mapping_content_upper(map, full, 3);
        if (dp > 0) worst = std::max(worst, arb / dp);
    }
    bool pass = worst <= dim_const + 1e-9 && const_ok;
    return {pass, "worst-ratio=" + fmt(worst) + " (limit " + fmt(dim_const) + ") constants-vanish=" +
                      (const_ok ? "yes" : "no")};
}

std::pair<bool, std::string> c13_determinism() {
    auto run_once = [&](int threads, const std::string& tag) {
        RunConfig cfg;
        cfg.command = "verify-all";
        cfg.depth = 4;
        cfg.seed = 5150;
        cfg.threads = threads;
        cfg.out_dir = "acceptance-artifacts/verify-" + tag;
        return run_command(cfg);
    };
    RunOutcome a1 = run_once(1, "t1a");
    RunOutcome a2 = run_once(1, "t1b");
    RunOutcome b1 = run_once(8, "t8a");
    RunOutcome b2 = run_once(8, "t8b");
    bool identical = a1.manifest == a2.manifest && a1.manifest == b1.manifest && b1.manifest == b2.manifest;
    bool pass = identical && a1.exit_code == 0;
    return {pass, std::string("manifests ") + (identical ? "byte-identical" : "DIFFER") +
                      " across {1,8} threads x 2 runs"};
}

}  // namespace

int main() {
    std::printf("acceptance suite: %d criteria\n", 13);
    run_criterion(1, "dp-oracle-equivalence", c1_dp_oracle);
    run_criterion(2, "projection-content", c2_projection_content);
    run_criterion(3, "subadditivity-domination", c3_subadditive_dominated);
    run_criterion(4, "md-certification", c4_md_certification);
    run_criterion(5, "quantitative-differentiation", c5_quantitative_differentiation);
    run_criterion(6, "splitting-lemma", c6_splitting);
    run_criterion(7, "coordinate-plane", c7_coordinate_plane);
    run_criterion(8, "pipeline-projection", c8_projection_pipeline);
    run_criterion(9, "pipeline-star", c9_star_pipeline);
    run_criterion(10, "star-harness", c10_star_harness);
    run_criterion(11, "scaling-law", c11_scaling);
    run_criterion(12, "two-contents", c12_two_contents);
    run_criterion(13, "determinism", c13_determinism);

    if (g_failures == 0)
        std::printf("all 13 criteria passed\n");
    else
        std::printf("%d criteria FAILED\n", g_failures);
    return g_failures;
}
