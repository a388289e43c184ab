#include "mapcontent/config.hpp"

#include <fstream>

#include <json.hpp>

namespace mapcontent {

ParamPreset preset_by_name(const std::string& name) {
    if (name == "default") return ParamPreset{"default", 0, 0.01, 0.2, 0.05, 5, 6, 0.05, -1};
    if (name == "desk") return ParamPreset{"desk", 3, 0.1, 0.2, 0.05, 5, 4, 0.3, -1};
    if (name == "demo") return ParamPreset{"demo", 3, 0.45, 0.12, 0.11, 5, 2, 0.3, 0.1};
    throw ArgumentError("unknown preset: " + name);
}

RunConfig RunConfig::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("schema", "") != "mcfgv1") throw ArgumentError("config schema must be mcfgv1");
    RunConfig c;
    c.command = j.value("command", "");
    c.builtin = j.value("builtin", c.builtin);
    c.map_file = j.value("map_file", c.map_file);
    c.n = j.value("n", c.n);
    c.m = j.value("m", c.m);
    c.depth = j.value("depth", c.depth);
    c.star_k = j.value("star_k", c.star_k);
    c.scale = j.value("scale", c.scale);
    c.preset = j.value("preset", c.preset);
    c.alpha_override = j.value("alpha", c.alpha_override);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    return c;
}

void RunConfig::save_json(const std::string& path) const {
    nlohmann::json j;
    j["schema"] = "mcfgv1";
    j["command"] = command;
    j["builtin"] = builtin;
    if (!map_file.empty()) j["map_file"] = map_file;
    j["n"] = n;
    j["m"] = m;
    j["depth"] = depth;
    j["star_k"] = star_k;
    j["scale"] = scale;
    j["preset"] = preset;
    if (alpha_override > 0) j["alpha"] = alpha_override;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["threads"] = threads;
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << j.dump(2) << "\n";
}

SampledMap RunConfig::make_map() const {
    if (!map_file.empty()) return load_map_json(map_file);
    BuiltinParams p;
    p.n = n;
    p.m = m;
    p.depth = depth;
    p.star_k = star_k;
    p.scale = scale;
    if (builtin == "linear") {
        // identity-row matrix scaled; explicit matrices come through map files
        p.matrix.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n + m), 0.0));
        for (int r = 0; r < n; ++r) p.matrix[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)] = scale;
    }
    return SampledMap::from_builtin(builtin, p);
}

PipelineOptions RunConfig::pipeline_options() const {
    ParamPreset ps = preset_by_name(preset);
    PipelineOptions opts;
    opts.eps = ps.eps;
    opts.delta = ps.delta;
    opts.delta_prime = ps.delta_prime;
    opts.lambda = ps.lambda;
    opts.K = ps.K;
    opts.alpha = alpha_override > 0 ? alpha_override : ps.alpha;
    opts.alpha_prime = ps.alpha_prime;
    opts.fit.c0 = ps.c0 > 0 ? ps.c0 : 10 * (n + m);
    opts.seed = seed;
    return opts;
}

HsTolerances RunConfig::hs_tolerances() const {
    HsTolerances tol;
    tol.seed = seed;
    return tol;
}

}  // namespace mapcontent
