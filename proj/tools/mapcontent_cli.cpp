#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mapcontent/runner.hpp"

using mapcontent::RunConfig;

namespace {

void add_common(CLI::App* cmd, RunConfig* cfg) {
    cmd->add_option("--builtin", cfg->builtin, "builtin map: projection|constant|linear|star9|shear-demo");
    cmd->add_option("--map-file", cfg->map_file, "grid map JSON file (overrides --builtin)");
    cmd->add_option("--n", cfg->n, "horizontal factor dimension");
    cmd->add_option("--m", cfg->m, "vertical factor dimension");
    cmd->add_option("--depth", cfg->depth, "lattice depth D (spacing 2^-D)");
    cmd->add_option("--k", cfg->star_k, "star parameter for star9 / star-example");
    cmd->add_option("--scale", cfg->scale, "scale for projection/linear builtins");
    cmd->add_option("--preset", cfg->preset, "parameter preset: default|desk|demo");
    cmd->add_option("--alpha", cfg->alpha_override, "override the garbage budget alpha");
    cmd->add_option("--out", cfg->out_dir, "output directory");
    cmd->add_option("--seed", cfg->seed, "deterministic seed");
    cmd->add_option("--threads", cfg->threads, "worker threads (0 = hardware)")->envname("MAPCONTENT_THREADS");
    cmd->add_option_function<std::string>(
        "--config", [cfg](const std::string& path) { *cfg = RunConfig::load_json(path); },
        "load an mcfgv1 config file (flags given after it still apply)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mapping-content toolbox: contents, metric derivatives, decompositions"};
    app.require_subcommand(1);

    RunConfig cfg;
    const char* names[] = {"content", "md", "classify", "decompose", "hardsard",
                           "star-example", "onedim", "verify-all"};
    const char* descs[] = {"mapping content of a sampled map",
                           "metric-derivative profile over all cubes",
                           "cube classification and compressed-garbage bound",
                           "full decomposition pipeline",
                           "slice-shear straightening certificates",
                           "star-tree counterexample harness",
                           "one-dimensional scaling experiment",
                           "run the quick verification suite"};
    for (int i = 0; i < 8; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        add_common(sub, &cfg);
        sub->callback([&cfg, name = std::string(names[i])] { cfg.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    try {
        mapcontent::RunOutcome outcome = mapcontent::run_command(cfg);
        std::fputs(outcome.manifest.c_str(), stdout);
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
