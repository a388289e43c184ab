#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mapcontent/dyadic.hpp"
#include "mapcontent/rng.hpp"

using namespace mapcontent;

namespace {

// Independent scan: all cubes at all levels, checking the triple containment
// directly, keeping the finest feasible level and its smallest index.
CubeId oracle_minimal_containing(const LatticePoint& x, const LatticePoint& y, int dim, int depth) {
    CubeId best = CubeId::root(dim);
    bool found = false;
    for (int k = 0; k <= depth; ++k) {
        std::int64_t side = std::int64_t{1} << k;
        std::int64_t scale = std::int64_t{1} << (depth - k);
        std::vector<CubeId> feas;
        std::array<std::int32_t, kMaxDim> idx{};
        // enumerate all cubes at level k
        std::int64_t total = 1;
        for (int a = 0; a < dim; ++a) total *= side;
        for (std::int64_t t = 0; t < total; ++t) {
            std::int64_t rest = t;
            for (int a = 0; a < dim; ++a) {
                idx[a] = static_cast<std::int32_t>(rest % side);
                rest /= side;
            }
            bool ok = true;
            for (int a = 0; a < dim && ok; ++a) {
                std::int64_t lo = (static_cast<std::int64_t>(idx[a]) - 1) * scale;
                std::int64_t hi = (static_cast<std::int64_t>(idx[a]) + 2) * scale;
                if (x[a] < lo || x[a] > hi || y[a] < lo || y[a] > hi) ok = false;
            }
            if (ok) feas.push_back(CubeId{k, dim, idx});
        }
        if (!feas.empty()) {
            std::sort(feas.begin(), feas.end());
            best = feas.front();
            found = true;
        }
    }
    REQUIRE(found);
    return best;
}

}  // namespace

TEST_CASE("children tile the parent") {
    CubeId root = CubeId::root(2);
    auto kids = children(root, 4);
    CHECK(kids.size() == 4);
    for (const auto& k : kids) {
        CHECK(k.level == 1);
        CHECK(root.contains(k));
    }
    CHECK(interiors_disjoint(kids));

    CubeId q{1, 2, {0, 0}};
    auto kk = children(q, 4);
    CHECK(kk.size() == 4);
    std::vector<std::pair<int, int>> got;
    for (const auto& k : kk) got.emplace_back(k.index[0], k.index[1]);
    std::vector<std::pair<int, int>> want{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);

    CubeId q3 = CubeId::root(3);
    auto kids3 = children(q3, 2);
    CHECK(kids3.size() == 8);
    double vol = 0;
    for (const auto& k : kids3) vol += cube_measure(k);
    CHECK(vol == doctest::Approx(cube_measure(q3)).epsilon(1e-12));

    CubeId deep{4, 2, {3, 3}};
    CHECK_THROWS_AS(children(deep, 4), DepthError);
}

TEST_CASE("dilate produces clipped concentric blocks") {
    // center cube of the level-2 grid
    CubeId center{2, 2, {1, 1}};
    Region r = dilate(center, 3);
    CHECK(!r.clipped);
    CHECK(r.cube_count() == 9);
    CHECK(r.lo[0] == 0);
    CHECK(r.hi[0] == 2);

    CubeId corner{1, 2, {0, 0}};
    Region rc = dilate(corner, 3);
    CHECK(rc.clipped);
    CHECK(rc.lo[0] == 0);
    CHECK(rc.hi[0] == 1);

    Region unclipped = dilate(corner, 3, BoundaryMode::Extend);
    CHECK(unclipped.lo[0] == -1);
    CHECK(unclipped.hi[0] == 1);

    Region identity = dilate(center, 1);
    CHECK(identity.cube_count() == 1);

    CHECK_THROWS_AS(dilate(center, 2), ArgumentError);
    CHECK_THROWS_AS(dilate(center, 0), ArgumentError);
}

TEST_CASE("minimal containing cube matches the exhaustive scan") {
    const int dim = 2, depth = 4;
    std::int32_t top = (1 << depth);

    // representative spot cases
    LatticePoint a{static_cast<std::int32_t>(0.1 * top), static_cast<std::int32_t>(0.1 * top)};
    LatticePoint b{static_cast<std::int32_t>(0.9 * top), static_cast<std::int32_t>(0.9 * top)};
    CubeId q = minimal_containing_cube(a, b, dim, depth);
    CHECK(q == oracle_minimal_containing(a, b, dim, depth));
    CHECK(q.level <= 1);

    LatticePoint c{5, 7};
    LatticePoint d{6, 7};  // one finest cell apart
    CubeId q2 = minimal_containing_cube(c, d, dim, depth);
    CHECK(q2 == oracle_minimal_containing(c, d, dim, depth));
    CHECK(q2.level >= depth - 2);

    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        LatticePoint x{}, y{};
        for (int ax = 0; ax < dim; ++ax) {
            x[ax] = static_cast<std::int32_t>(rng.next_below(top + 1));
            y[ax] = static_cast<std::int32_t>(rng.next_below(top + 1));
        }
        if (x == y) continue;
        CubeId got = minimal_containing_cube(x, y, dim, depth);
        CubeId want = oracle_minimal_containing(x, y, dim, depth);
        CHECK(got == want);
    }
}

TEST_CASE("points in one cube produce a cube at least that deep") {
    const int depth = 5;
    // both points interior to the level-2 cube (1,1)
    LatticePoint x{9, 9};
    LatticePoint y{14, 15};
    CubeId q = minimal_containing_cube(x, y, 2, depth);
    CHECK(q.level >= 2);
}

TEST_CASE("cell sets do measure and algebra") {
    CellSet full = CellSet::full(2, 3);
    CHECK(full.measure() == doctest::Approx(1.0));
    CubeId half_lo{1, 2, {0, 0}};
    CellSet q = CellSet::of_cube(half_lo, 3);
    CHECK(q.measure() == doctest::Approx(0.25));
    CellSet comp = q.complement();
    CHECK(comp.measure() == doctest::Approx(0.75));
    CHECK(q.set_union(comp) == full);
    CHECK(q.set_intersection(comp).empty_set());
    CHECK(q.is_subset_of(full));
    CHECK(q.meets_cube(CubeId::root(2)));
    CHECK(!q.meets_cube(CubeId{1, 2, {1, 1}}));
    CHECK(full.contains_cube(half_lo));

    auto runs = q.run_length_encode();
    std::size_t covered = 0;
    for (auto [start, len] : runs) covered += len;
    CHECK(covered == q.cell_count());
}

TEST_CASE("split_separated: single cube and distant cubes") {
    CubeId solo{3, 2, {4, 4}};
    auto res = split_separated({solo}, 5, 0.01);
    CHECK(res.families.size() == 1);
    CHECK(res.families[0].size() == 1);
    CHECK(res.discarded.empty());

    CubeId c1{3, 2, {0, 0}};
    CubeId c2{3, 2, {7, 7}};
    auto res2 = split_separated({c1, c2}, 5, 0.01);
    CHECK(res2.families.size() == 1);
    CHECK(res2.families[0].size() == 2);
    CHECK(res2.discarded.empty());

    CHECK_THROWS_AS(split_separated({solo}, 5, 0.0), ArgumentError);
    CHECK_THROWS_AS(split_separated({solo}, 4, 0.1), ArgumentError);
}

namespace {

// Plain reimplementation of the greedy loop, kept deliberately naive.
std::pair<std::vector<std::vector<CubeId>>, std::vector<CubeId>> replay_greedy(std::vector<CubeId> cubes, int lambda,
                                                                               double eta) {
    std::sort(cubes.begin(), cubes.end());
    std::vector<std::vector<CubeId>> fams;
    std::vector<CubeId> rest = cubes;
    auto measure_of = [](const std::vector<CubeId>& v) {
        double s = 0;
        for (const auto& c : v) s += cube_measure(c);
        return s;
    };
    while (!rest.empty() && measure_of(rest) >= eta) {
        std::vector<CubeId> fam;
        std::vector<CubeId> next;
        for (const auto& c : rest) {
            bool ok = true;
            for (const auto& f : fam)
                if (dilations_intersect(c, f, lambda)) ok = false;
            if (ok)
                fam.push_back(c);
            else
                next.push_back(c);
        }
        fams.push_back(fam);
        rest = next;
    }
    return {fams, rest};
}

}  // namespace

TEST_CASE("split_separated matches a greedy replay on the full level-2 grid") {
    std::vector<CubeId> grid;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) grid.push_back(CubeId{2, 2, {i, j}});
    auto res = split_separated(grid, 5, 0.01);
    auto [fams, rest] = replay_greedy(grid, 5, 0.01);
    REQUIRE(res.families.size() == fams.size());
    for (std::size_t i = 0; i < fams.size(); ++i) {
        CHECK(res.families[i].size() == fams[i].size());
        for (std::size_t j = 0; j < fams[i].size(); ++j) CHECK(res.families[i][j] == fams[i][j]);
    }
    CHECK(res.discarded.size() == rest.size());

    // separation within families, measure of B, family-count bound
    double discarded_measure = 0;
    for (const auto& c : res.discarded) discarded_measure += cube_measure(c);
    CHECK(discarded_measure < 0.01);
    for (const auto& fam : res.families)
        for (std::size_t i = 0; i < fam.size(); ++i)
            for (std::size_t j = i + 1; j < fam.size(); ++j) CHECK(!dilations_intersect(fam[i], fam[j], 5));
    CHECK(static_cast<int>(res.families.size()) <= split_family_bound(2, 5, 0.01));
}

TEST_CASE("split_separated on mixed-level antichains keeps every cube exactly once") {
    Rng rng(99);
    // random antichain: start from level-3 grid, promote some quads to their parent
    std::vector<CubeId> cubes;
    for (int i = 0; i < 8; i += 2)
        for (int j = 0; j < 8; j += 2) {
            if (rng.next_double() < 0.3) {
                cubes.push_back(CubeId{2, 2, {i / 2, j / 2}});
            } else {
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) cubes.push_back(CubeId{3, 2, {i + a, j + b}});
            }
        }
    REQUIRE(interiors_disjoint(cubes));
    auto res = split_separated(cubes, 5, 0.05);
    std::size_t placed = res.discarded.size();
    for (const auto& f : res.families) placed += f.size();
    CHECK(placed == cubes.size());
    for (const auto& fam : res.families)
        for (std::size_t i = 0; i < fam.size(); ++i)
            for (std::size_t j = i + 1; j < fam.size(); ++j) CHECK(!dilations_intersect(fam[i], fam[j], 5));
}
