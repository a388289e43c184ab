#include "mapcontent/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "mapcontent/content.hpp"

namespace mapcontent {

CellSet star_strips(int k, int depth) {
    std::vector<CubeId> cubes;
    int half = 1 << (k - 1);
    for (int a = 0; a < half; ++a)
        for (int b = 0; b < half; ++b) cubes.push_back(CubeId{k, 2, {2 * a, 2 * b}});
    return CellSet::of_cubes(cubes, 2, depth);
}

StarExampleReport verify_star_claims(int k, int depth, int threads) {
    if (depth < k + 2) throw ResolutionError("star harness needs depth >= k + 2");
    StarExampleReport rep;
    rep.k = k;
    rep.depth = depth;

    SampledMap star = build_star_map(k, depth);
    const auto& tree = dynamic_cast<const StarTree&>(star.target());
    rep.tree_length = tree.total_length();
    rep.lipschitz_estimate = lipschitz_estimate(star);

    CellSet strips = star_strips(k, depth);
    rep.measure_a = lebesgue_measure(strips);

    // Coarse injectivity over strip interiors: distinct interior cubes must
    // have disjoint images; interned point ids make equality exact.
    int cells_per = 1 << (depth - k);
    int half = 1 << (k - 1);
    std::vector<std::pair<std::size_t, PointId>> interior;  // (cube id, value)
    for (int a = 0; a < half; ++a)
        for (int b = 0; b < half; ++b) {
            std::size_t cube_tag = static_cast<std::size_t>(a) * static_cast<std::size_t>(half) + static_cast<std::size_t>(b);
            int x0 = 2 * a * cells_per, y0 = 2 * b * cells_per;
            for (int dx = 1; dx < cells_per; ++dx)
                for (int dy = 1; dy < cells_per; ++dy)
                    interior.emplace_back(cube_tag, star.value(LatticePoint{x0 + dx, y0 + dy}));
        }
    long violations = 0;
    for (std::size_t i = 0; i < interior.size(); ++i)
        for (std::size_t j = i + 1; j < interior.size(); ++j)
            if (interior[i].first != interior[j].first && interior[i].second == interior[j].second) ++violations;
    rep.injectivity_violations = violations;

    MappingContentResult dp = mapping_content(star, strips, depth - 1, threads);
    rep.content_upper = dp.value;
    rep.content_lower = dp.lower;

    // Candidate straightenings from the slice-shear iteration on the strips.
    HsTolerances tol;
    tol.c_star = 64.0;
    DirectionalResult dir = iterate_directional(star, strips, 0.5, 4.0, tol, threads);
    double budget = std::ldexp(1.0, -k);
    for (const auto& cert : dir.certificates) {
        CandidateBound cb;
        cb.accepted = cert.accepted;
        cb.overlap_measure = lebesgue_measure(cert.cells.set_intersection(strips));
        cb.bound = budget;
        cb.measured_constant = cb.overlap_measure / budget;

        // Disjoint projections: the x-extents of g over distinct strip cubes
        // must not overlap (interiors).
        struct Interval {
            double lo, hi;
        };
        std::vector<Interval> spans;
        for (int a = 0; a < half; ++a)
            for (int b = 0; b < half; ++b) {
                CubeId cube{k, 2, {2 * a, 2 * b}};
                CellSet overlap = cert.cells.set_intersection(CellSet::of_cube(cube, depth));
                if (overlap.empty_set()) continue;
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (std::size_t cell : overlap.cells()) {
                    LatticePoint c = overlap.cell_coords(cell);
                    std::size_t lin = star.lattice_linear(c);
                    if (!cert.g.defined_at(lin)) continue;
                    double x = cert.g.at(lin)[0];
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
                if (lo <= hi) spans.push_back({lo, hi});
            }
        double gap_tol = std::ldexp(1.0, -depth);
        for (std::size_t i = 0; i < spans.size(); ++i)
            for (std::size_t j = i + 1; j < spans.size(); ++j) {
                double inner = std::min(spans[i].hi, spans[j].hi) - std::max(spans[i].lo, spans[j].lo);
                if (inner > gap_tol) ++cb.projection_violations;
            }
        rep.candidates.push_back(cb);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Scaling experiment
// ---------------------------------------------------------------------------

namespace {

double image_diameter(const SampledMap& map) {
    std::vector<PointId> img;
    std::size_t total = map.lattice_size();
    for (std::size_t i = 0; i < total; ++i) {
        LatticePoint p = map.lattice_coords(i);
        if (map.in_domain(p)) img.push_back(map.value(p));
    }
    std::sort(img.begin(), img.end());
    img.erase(std::unique(img.begin(), img.end()), img.end());
    double diam = 0;
    for (std::size_t i = 0; i < img.size(); ++i)
        for (std::size_t j = i + 1; j < img.size(); ++j) diam = std::max(diam, map.target_distance(img[i], img[j]));
    return diam;
}

}  // namespace

std::vector<std::pair<std::string, SampledMap>> default_scaling_corpus(int depth) {
    std::vector<std::pair<std::string, SampledMap>> corpus;
    for (double t : {1.0, 0.5, 0.25, 0.125}) {
        BuiltinParams p;
        p.depth = depth;
        p.scale = t;
        corpus.emplace_back("projection-x" + std::to_string(t), SampledMap::from_builtin("projection", p));
    }
    BuiltinParams pc;
    pc.depth = depth;
    corpus.emplace_back("constant", SampledMap::from_builtin("constant", pc));
    corpus.emplace_back("shear-demo", SampledMap::from_builtin("shear-demo", pc));
    for (int k = 2; k <= 3 && k + 1 <= depth; ++k) corpus.emplace_back("star-k" + std::to_string(k), build_star_map(k, depth));
    return corpus;
}

ScalingReport onedim_scaling_experiment(const std::vector<std::pair<std::string, SampledMap>>& corpus, int m,
                                        int depth, int threads) {
    if (corpus.size() < 5) throw ArgumentError("scaling experiment needs at least five maps");
    ScalingReport rep;
    for (const auto& [id, map] : corpus) {
        if (map.m() != m) throw ArgumentError("corpus map " + id + " does not match the cube factor m");
        ScalingRow row;
        row.map_id = id;
        row.m = m;
        CellSet full = CellSet::full(map.dim(), map.depth());
        row.eta = mapping_content(map, full, std::min(depth, map.depth() - 1), threads).value;
        row.diam = image_diameter(map);
        rep.rows.push_back(row);
    }

    // log-log regression over the small-content rows
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (const auto& row : rep.rows) {
        if (row.eta <= 0 || row.eta >= 0.5 || row.diam <= 0) continue;
        double lx = std::log(row.eta), ly = std::log(row.diam);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++count;
    }
    if (count >= 2 && sxx * count - sx * sx > 1e-12) rep.slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);

    double exponent = 1.0 / (m + 2.0);
    for (const auto& row : rep.rows) {
        if (row.eta <= 0) continue;
        rep.max_ratio = std::max(rep.max_ratio, row.diam / std::pow(row.eta, exponent));
    }
    return rep;
}

}  // namespace mapcontent
