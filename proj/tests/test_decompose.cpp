#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "mapcontent/decompose.hpp"
#include "mapcontent/hard_sard.hpp"
#include "mapcontent/rng.hpp"

using namespace mapcontent;

namespace {

MdFitOptions desk_fit() {
    MdFitOptions f;
    f.c0 = 3;
    return f;
}

}  // namespace

TEST_CASE("coordinate planes enumerate in lexicographic order") {
    auto p21 = coordinate_planes(2, 1);
    REQUIRE(p21.size() == 2);
    CHECK(p21[0] == 0b01);
    CHECK(p21[1] == 0b10);

    auto p31 = coordinate_planes(3, 1);
    CHECK(p31.size() == 3);
    auto p32 = coordinate_planes(3, 2);
    REQUIRE(p32.size() == 3);
    CHECK(p32[0] == 0b011);
    CHECK(p32[1] == 0b101);
    CHECK(p32[2] == 0b110);
}

TEST_CASE("classification: projection good, constant compressed") {
    BuiltinParams p;
    p.depth = 4;
    SampledMap proj = SampledMap::from_builtin("projection", p);
    Classification cls = classify_cubes(proj, 0.01, 0.2, 3, desk_fit());
    for (int level = 0; level <= 3; ++level)
        for (const auto& e : cls.levels[static_cast<std::size_t>(level)]) {
            CHECK(e.kind == CubeClassKind::Good);
            CHECK(e.plane == 0b01);  // span of the first axis
        }

    SampledMap cst = SampledMap::from_builtin("constant", p);
    Classification cls2 = classify_cubes(cst, 0.01, 0.2, 2, desk_fit());
    for (int level = 0; level <= 2; ++level)
        for (const auto& e : cls2.levels[static_cast<std::size_t>(level)])
            CHECK(e.kind == CubeClassKind::Compressed);
}

TEST_CASE("star classification is stable across depths") {
    Classification c5 = classify_cubes(build_star_map(2, 4), 0.1, 0.2, 3, desk_fit());
    Classification c6 = classify_cubes(build_star_map(2, 5), 0.1, 0.2, 3, desk_fit());
    std::size_t agree = 0, total = 0;
    for (int level = 2; level <= 3; ++level) {
        for (std::size_t r = 0; r < c5.levels[static_cast<std::size_t>(level)].size(); ++r) {
            ++total;
            if (c5.levels[static_cast<std::size_t>(level)][r].kind ==
                c6.levels[static_cast<std::size_t>(level)][r].kind)
                ++agree;
        }
    }
    // classification is threshold-based; the two depths may disagree on a
    // few borderline cubes but must agree on the bulk
    CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.9);
}

TEST_CASE("compressed garbage has small mapping content") {
    BuiltinParams p;
    p.depth = 4;
    SampledMap cst = SampledMap::from_builtin("constant", p);
    Classification cls = classify_cubes(cst, 0.05, 0.2, 3, desk_fit());
    auto bound = compressed_content_bound(cst, cls);
    CHECK(bound.content == 0.0);

    SampledMap proj = SampledMap::from_builtin("projection", p);
    Classification cls2 = classify_cubes(proj, 0.05, 0.2, 3, desk_fit());
    auto bound2 = compressed_content_bound(proj, cls2);
    CHECK(bound2.content == 0.0);  // no compressed cubes at all
    CHECK(bound2.cells.empty_set());

    // clamped map: constant for x > 1/2, compressed cubes on the right half
    BuiltinParams lin;
    lin.depth = 4;
    SampledMap clamped = [&] {
        auto space = std::make_shared<EuclideanSpace>(1);
        std::int32_t extent = (1 << 4) + 1;
        std::vector<PointId> values;
        values.reserve(static_cast<std::size_t>(extent) * static_cast<std::size_t>(extent));
        for (int iy = 0; iy < extent; ++iy)
            for (int ix = 0; ix < extent; ++ix) {
                double x = std::min(ix / 16.0, 0.5);
                values.push_back(space->intern({&x, 1}));
            }
        return SampledMap(1, 1, 4, space, values, 1.0);
    }();
    Classification cls3 = classify_cubes(clamped, 0.05, 0.2, 3, desk_fit());
    auto bound3 = compressed_content_bound(clamped, cls3);
    CHECK(!bound3.cells.empty_set());
    // measured constant: content stays comparable to eps + delta
    CHECK(bound3.content <= 4.0 * (0.05 + 0.2));
}

TEST_CASE("farthest coordinate plane: closed forms") {
    // K = span((0,1)): the first axis is fully transverse
    auto fp = farthest_coordinate_plane({{0, 1}}, 2, 1, 1);
    CHECK(fp.plane == 0b01);
    CHECK(fp.c == doctest::Approx(1.0).epsilon(1e-9));

    // K = diagonal: both coordinate lines sit at distance 1/sqrt(2)
    auto fd = farthest_coordinate_plane({{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}}, 2, 1, 1);
    CHECK(fd.c == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

    // random lines in R^3 against 2-planes always leave a positive gap
    Rng rng(3);
    double min_c = 1e9;
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v{rng.next_in(-1, 1), rng.next_in(-1, 1), rng.next_in(-1, 1)};
        auto r = farthest_coordinate_plane({v}, 3, 2, 1);
        CHECK(r.c > 0.0);
        min_c = std::min(min_c, r.c);
    }
    CHECK(min_c > 0.0);

    CHECK_THROWS_AS(farthest_coordinate_plane({{1, 0}, {0, 1}}, 2, 1, 1), ArgumentError);
}

TEST_CASE("coding: linear maps land in a single class") {
    BuiltinParams p;
    p.depth = 4;
    SampledMap proj = SampledMap::from_builtin("projection", p);
    CodingOptions copts;
    copts.eta = 0.05;
    Coding coding = coding_decomposition(proj, 0.05, copts, desk_fit());
    CHECK(coding.class_count == 1);
    CHECK(coding.remainder.empty_set());

    BuiltinParams lin;
    lin.depth = 4;
    lin.matrix = {{0.4, 0.3}};
    SampledMap amap = SampledMap::from_builtin("linear", lin);
    Coding c2 = coding_decomposition(amap, 0.05, copts, desk_fit());
    CHECK(c2.class_count == 1);
}

namespace {

// Enumerates same-class cell pairs (deterministically subsampled) and counts
// pairs whose minimal triple-containing cube still has large md.
std::pair<int, int> coding_replay(const SampledMap& map, const Coding& coding, double eps, const MdFitOptions& fit,
                                  std::size_t pair_budget) {
    CellSet probe(map.dim(), map.depth());
    std::size_t cells = probe.total_cells();
    std::vector<std::vector<std::size_t>> classes(static_cast<std::size_t>(coding.class_count));
    for (std::size_t cell = 0; cell < cells; ++cell)
        if (coding.cell_class[cell] >= 0) classes[static_cast<std::size_t>(coding.cell_class[cell])].push_back(cell);

    std::size_t total_pairs = 0;
    for (const auto& cl : classes) total_pairs += cl.size() * (cl.size() - 1) / 2;
    std::size_t stride = std::max<std::size_t>(1, total_pairs / std::max<std::size_t>(1, pair_budget));

    int checked = 0, violations = 0;
    std::size_t counter = 0;
    for (const auto& cl : classes) {
        for (std::size_t i = 0; i < cl.size(); ++i)
            for (std::size_t j = i + 1; j < cl.size(); ++j) {
                if (counter++ % stride != 0) continue;
                LatticePoint pa = probe.cell_coords(cl[i]);
                LatticePoint pb = probe.cell_coords(cl[j]);
                // cell centers live on the depth+1 lattice at odd coordinates
                LatticePoint xa{}, xb{};
                for (int a = 0; a < map.dim(); ++a) {
                    xa[a] = 2 * pa[a] + 1;
                    xb[a] = 2 * pb[a] + 1;
                }
                CubeId q = minimal_containing_cube(xa, xb, map.dim(), map.depth() + 1);
                if (q.level >= map.depth()) continue;  // window below lattice resolution
                MdResult r = fit_seminorm(map, q, fit);
                ++checked;
                if (r.md_upper >= eps) ++violations;
            }
    }
    return {checked, violations};
}

}  // namespace

TEST_CASE("coding property replay") {
    MdFitOptions fit = desk_fit();
    CodingOptions copts;
    copts.eta = 0.05;

    // star map: heavily fragmented classes at this depth, few same-class pairs
    SampledMap star = build_star_map(2, 5);
    Coding cstar = coding_decomposition(star, 0.1, copts, fit);
    CHECK(cstar.remainder.measure() < 0.05);
    auto [checked_star, viol_star] = coding_replay(star, cstar, 0.1, fit, 2000);
    CHECK(viol_star == 0);

    // crossfade map: coarser classes, plenty of pairs
    BuiltinParams p;
    p.depth = 5;
    SampledMap shear = SampledMap::from_builtin("shear-demo", p);
    Coding cshear = coding_decomposition(shear, 0.45, copts, fit);
    CHECK(cshear.remainder.measure() < 0.05);
    auto [checked_shear, viol_shear] = coding_replay(shear, cshear, 0.45, fit, 2000);
    CHECK(checked_shear > 100);
    CHECK(viol_shear == 0);
}

TEST_CASE("stopping time: projection never switches planes") {
    BuiltinParams p;
    p.depth = 4;
    SampledMap proj = SampledMap::from_builtin("projection", p);
    Classification cls = classify_cubes(proj, 0.01, 0.2, 3, desk_fit());
    StoppingForest forest = stopping_time(cls, CubeId{1, 2, {0, 0}}, 0.05, 4);
    CHECK(forest.levels.size() == 1);  // S^1 onward stays empty
    CHECK(forest.worst_contraction == 0.0);

    SampledMap cst = SampledMap::from_builtin("constant", p);
    Classification cls2 = classify_cubes(cst, 0.01, 0.2, 3, desk_fit());
    CHECK_THROWS_AS(stopping_time(cls2, CubeId{1, 2, {0, 0}}, 0.05, 4), StateError);
}

TEST_CASE("stopping time: the crossfade map switches from x to y") {
    BuiltinParams p;
    p.depth = 6;
    SampledMap shear = SampledMap::from_builtin("shear-demo", p);
    Classification cls = classify_cubes(shear, 0.45, 0.12, 5, desk_fit());

    // some level-4 top cube near the faded end must stop on a sub-cube
    // whose x-direction degenerated; the stopped cube re-anchors on the
    // y-axis plane
    bool found_switch = false;
    bool plane_flipped = false;
    const auto& lvl = cls.levels[4];
    for (std::size_t r = 0; r < lvl.size(); ++r) {
        if (lvl[r].kind != CubeClassKind::Good) continue;
        if (lvl[r].plane != 0b01) continue;  // anchored on the x-axis
        CubeId top{4, 2, {}};
        std::size_t rest = r;
        for (int a = 0; a < 2; ++a) {
            top.index[a] = static_cast<std::int32_t>(rest % 16);
            rest /= 16;
        }
        StoppingForest forest = stopping_time(cls, top, 0.11, 2);
        if (forest.levels.size() > 1 && !forest.levels[1].empty()) {
            found_switch = true;
            for (auto pl : forest.planes[1])
                if (pl == 0b10) plane_flipped = true;
            // measures decrease level to level
            CHECK(forest.level_measures[1] < forest.level_measures[0]);
        }
    }
    CHECK(found_switch);
    CHECK(plane_flipped);
}

TEST_CASE("rotation steps are exact lattice permutations") {
    PiecewiseRotation rot;
    rot.dim = 2;
    rot.depth = 4;
    CubeRotation cr;
    cr.cube = CubeId{2, 2, {1, 2}};
    cr.perm = {1, 0, 0, 0};  // swap the two axes
    rot.steps.push_back({cr});

    // setwise fixing: every lattice point of the cube stays inside it
    int shift = 4 - 2;
    for (int dx = 0; dx <= (1 << shift); ++dx)
        for (int dy = 0; dy <= (1 << shift); ++dy) {
            LatticePoint p{static_cast<std::int32_t>((1 << shift) * 1 + dx),
                           static_cast<std::int32_t>((1 << shift) * 2 + dy)};
            LatticePoint q = rot.apply(p);
            CHECK(q[0] >= (1 << shift) * 1);
            CHECK(q[0] <= (1 << shift) * 2);
            CHECK(q[1] >= (1 << shift) * 2);
            CHECK(q[1] <= (1 << shift) * 3);
        }
    // points outside the cube are fixed
    LatticePoint outside{0, 0};
    CHECK(rot.apply(outside) == outside);

    // the permutation matrix is orthogonal by construction: applying the
    // map twice with the inverse permutation returns the point
    LatticePoint p{5, 9};
    LatticePoint q = rot.apply(p);
    CHECK(rot.apply(q) == p);  // a swap is an involution on this cube
}

TEST_CASE("pipeline on the projection covers everything with unit constants") {
    BuiltinParams p;
    p.depth = 4;
    SampledMap proj = SampledMap::from_builtin("projection", p);
    PipelineOptions opts;
    opts.fit = desk_fit();
    opts.alpha = 0.05;
    PipelineResult res = run_decomposition(proj, opts);
    REQUIRE(res.success);
    CHECK(res.start_level == 1);
    CHECK(!res.pieces.empty());
    double covered = 0;
    for (const auto& piece : res.pieces) covered += piece.cells.measure();
    CHECK(covered >= 0.95);
    CHECK(res.leftover_content < 0.05);
    for (const auto& rep : res.piece_reports) {
        CHECK(rep.c_low >= 0.99);
        CHECK(rep.c_high <= 1.01);
    }
    // pieces are pairwise disjoint and disjoint from the leftover
    CellSet seen(2, 4);
    for (const auto& piece : res.pieces) {
        CHECK(!seen.intersects(piece.cells));
        seen = seen.set_union(piece.cells);
        CHECK(!res.leftover.intersects(piece.cells));
    }
    CHECK(seen.set_union(res.leftover) == CellSet::full(2, 4));
}

TEST_CASE("verifier rejects a degenerate piece on the constant map") {
    BuiltinParams p;
    p.depth = 3;
    SampledMap cst = SampledMap::from_builtin("constant", p);
    Piece fake;
    fake.top = CubeId{1, 2, {0, 0}};
    fake.cells = CellSet::of_cube(fake.top, 3);
    fake.rotation.dim = 2;
    fake.rotation.depth = 3;
    fake.rotation.steps.push_back({CubeRotation{fake.top, {0, 1, 0, 0}}});
    BilipReport rep = verify_supplemented_bilipschitz(cst, fake, 100000, 7);
    CHECK(rep.c_low == 0.0);  // pairs differing only in x collapse

    Piece tiny = fake;
    tiny.cells = CellSet(2, 3);
    CHECK_THROWS_AS(verify_supplemented_bilipschitz(cst, tiny, 1000, 7), ArgumentError);
}

TEST_CASE("crossfade pipeline produces verified pieces with nontrivial words") {
    BuiltinParams p;
    p.depth = 6;
    SampledMap shear = SampledMap::from_builtin("shear-demo", p);
    PipelineOptions opts;
    opts.fit = desk_fit();
    opts.eps = 0.45;
    opts.delta = 0.12;
    opts.delta_prime = 0.11;
    opts.alpha = 0.3;
    opts.alpha_prime = 0.1;
    opts.K = 2;
    PipelineResult res = run_decomposition(shear, opts);
    INFO("stage: ", res.failure ? res.failure->stage : "ok", " pieces: ", res.pieces.size());
    REQUIRE(res.success);
    CHECK(res.pieces.size() >= 2);
    int nontrivial = 0;
    for (const auto& piece : res.pieces)
        if (!piece.word.empty()) ++nontrivial;
    CHECK(nontrivial >= 2);
    for (const auto& rep : res.piece_reports) CHECK(rep.c_low > 0.0);
    CHECK(res.leftover_content < 0.3);

    // separation, rotation validity, and unique piece keys
    std::set<std::tuple<std::size_t, int, std::vector<int>>> keys;
    for (const auto& piece : res.pieces) {
        CHECK(keys.insert({piece.top.raster_index(), piece.coding_class, piece.word}).second);
        for (std::size_t lvl = 1; lvl < piece.t_cubes.size(); ++lvl)
            for (std::size_t i = 0; i < piece.t_cubes[lvl].size(); ++i)
                for (std::size_t j = i + 1; j < piece.t_cubes[lvl].size(); ++j)
                    CHECK(!dilations_intersect(piece.t_cubes[lvl][i], piece.t_cubes[lvl][j], opts.lambda));
        for (const auto& step : piece.rotation.steps)
            for (const auto& rot : step) {
                bool seen[4] = {false, false, false, false};
                for (int a = 0; a < 2; ++a) seen[rot.perm[static_cast<std::size_t>(a)]] = true;
                CHECK((seen[0] && seen[1]));  // a genuine axis permutation
            }
    }

    // rotations are exact lattice bijections: inverse round-trips, and the
    // rotated map agrees with the original through the rotation
    for (const auto& piece : res.pieces) {
        if (piece.word.empty()) continue;
        PiecewiseRotation inv = piece.rotation.inverse();
        SampledMap rotated = rotate_map(shear, piece.rotation);
        CellSet rcells = rotate_cells(piece.cells, piece.rotation);
        CHECK(rcells.cell_count() == piece.cells.cell_count());
        int hits = 0;
        for (std::size_t cell : piece.cells.cells()) {
            LatticePoint p = piece.cells.cell_coords(cell);
            LatticePoint q = piece.rotation.apply(p);
            CHECK(inv.apply(q) == p);
            CHECK(rotated.value(q) == shear.value(p));
            if (++hits >= 16) break;
        }
        break;
    }
}

TEST_CASE("end-to-end straightening through a rotated crossfade piece") {
    BuiltinParams p;
    p.depth = 6;
    SampledMap shear = SampledMap::from_builtin("shear-demo", p);
    PipelineOptions opts;
    opts.fit.c0 = 3;
    opts.eps = 0.45;
    opts.delta = 0.12;
    opts.delta_prime = 0.11;
    opts.alpha = 0.3;
    opts.alpha_prime = 0.1;
    opts.K = 2;
    PipelineResult res = run_decomposition(shear, opts);
    REQUIRE(res.success);

    // feed the largest piece, rotated into standard position, to the
    // slice-shear iteration and certify the result
    const Piece* best = nullptr;
    for (const auto& piece : res.pieces)
        if (!best || piece.cells.cell_count() > best->cells.cell_count()) best = &piece;
    REQUIRE(best != nullptr);
    REQUIRE(best->cells.cell_count() >= 8);

    SampledMap rotated = rotate_map(shear, best->rotation);
    CellSet cells = rotate_cells(best->cells, best->rotation);
    HsTolerances tol;
    tol.c_star = 64.0;
    double budget = 0.5 * lebesgue_measure(cells);
    DirectionalResult dir = iterate_directional(rotated.restrict_to(cells), cells, budget,
                                                shear.declared_lipschitz(), tol);
    REQUIRE(!dir.certificates.empty());
    double covered = 0;
    for (const auto& cert : dir.certificates) {
        CHECK(cert.accepted);
        CHECK(cert.residuals.fiber_violations == 0);
        covered += cert.cells.measure();
        auto cmp = content_measure_comparison(rotated, cert);
        CHECK(cmp.within);
    }
    CHECK(covered > 0.0);
}
