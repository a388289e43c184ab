#include "mapcontent/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mapcontent/svg.hpp"

namespace mapcontent {

namespace {

using nlohmann::json;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << text;
}

json antichain_json(const MappingContentResult& res) {
    json arr = json::array();
    for (std::size_t i = 0; i < res.antichain.size(); ++i) {
        json cube = json::array();
        cube.push_back(res.antichain[i].level);
        for (int a = 0; a < res.antichain[i].dim; ++a) cube.push_back(res.antichain[i].index[a]);
        arr.push_back(std::move(cube));
    }
    return arr;
}

json config_json(const RunConfig& c) {
    json j;
    j["builtin"] = c.builtin;
    if (!c.map_file.empty()) j["map_file"] = c.map_file;
    j["n"] = c.n;
    j["m"] = c.m;
    j["depth"] = c.depth;
    j["star_k"] = c.star_k;
    j["scale"] = c.scale;
    j["preset"] = c.preset;
    j["seed"] = c.seed;
    return j;
}

std::string fam_name(Seminorm::Family f) {
    switch (f) {
        case Seminorm::Family::Zero: return "zero";
        case Seminorm::Family::Euclidean: return "euclidean";
        case Seminorm::Family::MaxLinear: return "maxlinear";
        case Seminorm::Family::Tabulated: return "tabulated";
    }
    return "?";
}

json run_content(const RunConfig& cfg, const std::string& dir) {
    SampledMap map = cfg.make_map();
    CellSet full = CellSet::full(map.dim(), map.depth());
    MappingContentResult res = mapping_content(map, full, map.depth() - 1, cfg.threads);
    double arbitrary = arbitrary_mapping_content_upper(map, full, map.depth() - 1, cfg.threads);

    json j;
    j["value"] = res.value;
    j["lower"] = res.lower;
    j["upper"] = res.value;
    j["arbitrary_cover_upper"] = arbitrary;
    j["antichain"] = antichain_json(res);
    write_text(dir + "/content.json", j.dump(2) + "\n");

    std::string csv = "builtin,n,m,depth,value,lower,arbitrary_upper\n";
    csv += cfg.builtin + "," + std::to_string(map.n()) + "," + std::to_string(map.m()) + "," +
           std::to_string(map.depth()) + "," + std::to_string(res.value) + "," + std::to_string(res.lower) + "," +
           std::to_string(arbitrary) + "\n";
    write_text(dir + "/content.csv", csv);
    return j;
}

json run_md(const RunConfig& cfg, const std::string& dir) {
    SampledMap map = cfg.make_map();
    PipelineOptions opts = cfg.pipeline_options();
    int maxlevel = map.depth() - 1;
    auto table = md_profile(map, maxlevel, opts.fit, cfg.threads);

    std::string csv = "level,index,md_lower,md_upper,family,params\n";
    for (const auto& r : table) {
        std::string idx;
        for (int a = 0; a < r.cube.dim; ++a) idx += (a ? ";" : "") + std::to_string(r.cube.index[a]);
        std::string params;
        if (r.seminorm.family == Seminorm::Family::Euclidean) {
            for (std::size_t i = 0; i < r.seminorm.quad.size(); ++i)
                params += (i ? ";" : "") + std::to_string(r.seminorm.quad[i]);
        } else if (r.seminorm.family == Seminorm::Family::MaxLinear) {
            for (const auto& cov : r.seminorm.covectors)
                for (std::size_t i = 0; i < cov.size(); ++i) params += (params.empty() ? "" : ";") + std::to_string(cov[i]);
        }
        csv += std::to_string(r.cube.level) + "," + idx + "," + std::to_string(r.md_lower) + "," +
               std::to_string(r.md_upper) + "," + fam_name(r.seminorm.family) + "," + params + "\n";
    }
    write_text(dir + "/md-profile.csv", csv);

    json j;
    j["cubes"] = table.size();
    for (double eps : {0.01, 0.05, 0.1, 0.2})
        j["exceedance"][std::to_string(eps)] = exceedance_volume(table, eps);
    if (map.dim() == 2) {
        Classification cls = classify_cubes(map, opts.eps, opts.delta, std::min(maxlevel, 4), opts.fit, cfg.threads);
        write_md_heatmap_svg(dir + "/md-heatmap.svg", cls, std::min(maxlevel, 4));
    }
    return j;
}

json run_classify(const RunConfig& cfg, const std::string& dir) {
    SampledMap map = cfg.make_map();
    PipelineOptions opts = cfg.pipeline_options();
    int maxlevel = map.depth() - 1;
    Classification cls = classify_cubes(map, opts.eps, opts.delta, maxlevel, opts.fit, cfg.threads);

    json per_level = json::array();
    for (int level = 0; level <= maxlevel; ++level) {
        int md = 0, comp = 0, good = 0;
        for (const auto& e : cls.levels[static_cast<std::size_t>(level)]) {
            if (e.kind == CubeClassKind::Md) ++md;
            else if (e.kind == CubeClassKind::Compressed) ++comp;
            else ++good;
        }
        per_level.push_back({{"level", level}, {"md", md}, {"compressed", comp}, {"good", good}});
    }
    CompressedBound bound = compressed_content_bound(map, cls, cfg.threads);

    json j;
    j["levels"] = std::move(per_level);
    j["compressed_content"] = bound.content;
    j["compressed_ratio"] = bound.ratio;
    if (map.dim() == 2) write_class_map_svg(dir + "/class-map.svg", cls, std::min(maxlevel, 4));
    write_text(dir + "/classify.json", j.dump(2) + "\n");
    return j;
}

json pipeline_json(const PipelineResult& res) {
    json j;
    j["success"] = res.success;
    j["start_level"] = res.start_level;
    j["leftover_content"] = res.leftover_content;
    j["leftover_measure"] = res.leftover.empty_set() ? 0.0 : res.leftover.measure();
    j["compressed_ratio"] = res.compressed_ratio;
    j["coding_classes"] = res.coding.class_count;
    j["forests"] = res.forests.size();
    json pieces = json::array();
    for (std::size_t i = 0; i < res.pieces.size(); ++i) {
        const auto& piece = res.pieces[i];
        json p;
        json top = json::array();
        top.push_back(piece.top.level);
        for (int a = 0; a < piece.top.dim; ++a) top.push_back(piece.top.index[a]);
        p["top"] = std::move(top);
        p["class"] = piece.coding_class;
        p["word"] = piece.word;
        p["measure"] = piece.cells.measure();
        if (i < res.piece_reports.size()) {
            p["c_low"] = res.piece_reports[i].c_low;
            p["c_high"] = res.piece_reports[i].c_high;
        }
        pieces.push_back(std::move(p));
    }
    j["pieces"] = std::move(pieces);
    if (res.failure) {
        json f;
        f["stage"] = res.failure->stage;
        f["message"] = res.failure->message;
        json levels = json::array();
        for (const auto& lr : res.failure->per_level)
            levels.push_back({{"level", lr.level}, {"nongood_content", lr.nongood_content}});
        f["per_level"] = std::move(levels);
        j["failure"] = std::move(f);
    }
    return j;
}

json run_decompose(const RunConfig& cfg, const std::string& dir, int* exit_code) {
    SampledMap map = cfg.make_map();
    PipelineOptions opts = cfg.pipeline_options();
    PipelineResult res = run_decomposition(map, opts, cfg.threads);
    json j = pipeline_json(res);
    if (map.dim() == 2) {
        write_piece_map_svg(dir + "/piece-map.svg", res, map.dim(), map.depth());
        write_class_map_svg(dir + "/class-map.svg", res.classification,
                            std::min(res.classification.maxlevel, 4));
    }
    if (!res.success) *exit_code = 2;
    return j;
}

json run_hardsard(const RunConfig& cfg, const std::string& dir, int* exit_code) {
    SampledMap map = cfg.make_map();
    CellSet full = CellSet::full(map.dim(), map.depth());
    HsTolerances tol = cfg.hs_tolerances();
    json j;
    try {
        DirectionalResult res = iterate_directional(map, full, 0.1, map.declared_lipschitz(), tol, cfg.threads);
        j["certificates"] = res.certificates.size();
        j["garbage_measure"] = lebesgue_measure(res.garbage);
        j["measured_eta"] = res.measured_eta;
        json list = json::array();
        for (std::size_t i = 0; i < res.certificates.size(); ++i) {
            const auto& cert = res.certificates[i];
            cert.save_json(dir + "/certificate-" + std::to_string(i) + ".json");
            list.push_back({{"accepted", cert.accepted},
                            {"c_lip", cert.c_lip},
                            {"measure", cert.cells.measure()},
                            {"fiber_violations", cert.residuals.fiber_violations},
                            {"restricted_only", cert.restricted_only}});
        }
        j["list"] = std::move(list);
    } catch (const NotBiLipschitzError& e) {
        j["failure"] = {{"stage", "precheck"}, {"message", e.what()}};
        *exit_code = 2;
    }
    return j;
}

json star_report_json(const StarExampleReport& rep) {
    json j;
    j["k"] = rep.k;
    j["depth"] = rep.depth;
    j["measure_A"] = rep.measure_a;
    j["tree_length"] = rep.tree_length;
    j["lipschitz_estimate"] = rep.lipschitz_estimate;
    j["injectivity_violations"] = rep.injectivity_violations;
    j["content_lower"] = rep.content_lower;
    j["content_upper"] = rep.content_upper;
    json cands = json::array();
    for (const auto& c : rep.candidates)
        cands.push_back({{"overlap_measure", c.overlap_measure},
                         {"bound", c.bound},
                         {"measured_constant", c.measured_constant},
                         {"projection_violations", c.projection_violations},
                         {"accepted", c.accepted}});
    j["candidates"] = std::move(cands);
    return j;
}

json run_star_example(const RunConfig& cfg, const std::string& dir) {
    StarExampleReport rep = verify_star_claims(cfg.star_k, cfg.depth, cfg.threads);
    json j = star_report_json(rep);
    write_text(dir + "/star-example.json", j.dump(2) + "\n");
    write_star_tree_svg(dir + "/star-tree.svg", cfg.star_k);
    write_cells_svg(dir + "/star-strips.svg", star_strips(cfg.star_k, cfg.depth));
    return j;
}

json run_onedim(const RunConfig& cfg, const std::string& dir) {
    auto corpus = default_scaling_corpus(cfg.depth);
    ScalingReport rep = onedim_scaling_experiment(corpus, 1, cfg.depth, cfg.threads);
    std::string csv = "map_id,eta,diam,m\n";
    for (const auto& row : rep.rows)
        csv += row.map_id + "," + std::to_string(row.eta) + "," + std::to_string(row.diam) + "," +
               std::to_string(row.m) + "\n";
    write_text(dir + "/scaling.csv", csv);
    write_scaling_chart_svg(dir + "/scaling.svg", rep);

    json j;
    j["slope"] = rep.slope;
    j["max_ratio"] = rep.max_ratio;
    json rows = json::array();
    for (const auto& row : rep.rows) rows.push_back({{"map", row.map_id}, {"eta", row.eta}, {"diam", row.diam}});
    j["rows"] = std::move(rows);
    return j;
}

json run_verify_all(const RunConfig& cfg, int* exit_code) {
    json j;
    bool ok = true;

    {  // projection content pins the unit value; the constant map vanishes
        RunConfig sub = cfg;
        sub.builtin = "projection";
        sub.depth = std::min(cfg.depth, 4);
        SampledMap proj = sub.make_map();
        CellSet full = CellSet::full(2, proj.depth());
        double v = mapping_content(proj, full, proj.depth() - 1, cfg.threads).value;
        ok = ok && std::abs(v - 1.0) <= 0.02;
        sub.builtin = "constant";
        double z = mapping_content(sub.make_map(), full, proj.depth() - 1, cfg.threads).value;
        ok = ok && z == 0.0;
        j["content"] = {{"projection", v}, {"constant", z}};
    }
    {  // separated splitting on the full level-3 grid
        std::vector<CubeId> grid;
        for (int i = 0; i < 8; ++i)
            for (int jx = 0; jx < 8; ++jx) grid.push_back(CubeId{3, 2, {i, jx}});
        auto split = split_separated(grid, 5, 0.01);
        double discarded = 0;
        for (const auto& c : split.discarded) discarded += cube_measure(c);
        ok = ok && discarded < 0.01 &&
             static_cast<int>(split.families.size()) <= split_family_bound(2, 5, 0.01);
        j["splitting"] = {{"families", split.families.size()}, {"discarded_measure", discarded}};
    }
    {  // projection pipeline under the chosen preset
        RunConfig sub = cfg;
        sub.builtin = "projection";
        sub.depth = std::min(cfg.depth, 4);
        PipelineResult res = run_decomposition(sub.make_map(), sub.pipeline_options(), cfg.threads);
        double covered = 0;
        for (const auto& piece : res.pieces) covered += piece.cells.measure();
        ok = ok && res.success && covered >= 0.95;
        j["pipeline_projection"] = pipeline_json(res);
    }
    {  // star harness
        RunConfig sub = cfg;
        sub.star_k = 2;
        sub.depth = std::min(cfg.depth, 5);
        StarExampleReport rep = verify_star_claims(sub.star_k, std::max(sub.depth, 4), cfg.threads);
        ok = ok && rep.measure_a == 0.25 && rep.injectivity_violations == 0;
        j["star"] = star_report_json(rep);
    }
    {  // scaling table
        auto corpus = default_scaling_corpus(std::min(cfg.depth, 4));
        ScalingReport rep = onedim_scaling_experiment(corpus, 1, std::min(cfg.depth, 4), cfg.threads);
        ok = ok && std::isfinite(rep.max_ratio);
        j["scaling"] = {{"slope", rep.slope}, {"max_ratio", rep.max_ratio}};
    }

    j["all_checks_passed"] = ok;
    if (!ok) *exit_code = 2;
    return j;
}

}  // namespace

RunOutcome run_command(const RunConfig& config) {
    RunOutcome outcome;
    json manifest;
    manifest["command"] = config.command;
    manifest["config"] = config_json(config);

    std::string dir = config.out_dir.empty() ? "." : config.out_dir;
    std::filesystem::create_directories(dir);

    try {
        if (config.command == "content") {
            manifest["result"] = run_content(config, dir);
        } else if (config.command == "md") {
            manifest["result"] = run_md(config, dir);
        } else if (config.command == "classify") {
            manifest["result"] = run_classify(config, dir);
        } else if (config.command == "decompose") {
            manifest["result"] = run_decompose(config, dir, &outcome.exit_code);
        } else if (config.command == "hardsard") {
            manifest["result"] = run_hardsard(config, dir, &outcome.exit_code);
        } else if (config.command == "star-example") {
            manifest["result"] = run_star_example(config, dir);
        } else if (config.command == "onedim") {
            manifest["result"] = run_onedim(config, dir);
        } else if (config.command == "verify-all") {
            manifest["result"] = run_verify_all(config, &outcome.exit_code);
        } else {
            throw ArgumentError("unknown command: " + config.command);
        }
    } catch (const std::exception& e) {
        manifest["error"] = e.what();
        outcome.exit_code = 1;
    }

    outcome.manifest = manifest.dump(2) + "\n";
    write_text(dir + "/run-manifest.json", outcome.manifest);
    return outcome;
}

}  // namespace mapcontent
