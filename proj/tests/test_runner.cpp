#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mapcontent/runner.hpp"

using namespace mapcontent;

namespace {

nlohmann::json parse(const std::string& text) { return nlohmann::json::parse(text); }

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("content command reports the unit projection value") {
    TempDir dir("mc_test_content");
    RunConfig cfg;
    cfg.command = "content";
    cfg.builtin = "projection";
    cfg.depth = 4;
    cfg.out_dir = dir.path.string();
    RunOutcome out = run_command(cfg);
    CHECK(out.exit_code == 0);
    auto j = parse(out.manifest);
    CHECK(j["result"]["value"].get<double>() == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::filesystem::exists(dir.path / "content.json"));
    CHECK(std::filesystem::exists(dir.path / "content.csv"));
    CHECK(std::filesystem::exists(dir.path / "run-manifest.json"));
}

TEST_CASE("star-example command pins the strip measure") {
    TempDir dir("mc_test_star");
    RunConfig cfg;
    cfg.command = "star-example";
    cfg.star_k = 2;
    cfg.depth = 5;
    cfg.out_dir = dir.path.string();
    RunOutcome out = run_command(cfg);
    CHECK(out.exit_code == 0);
    auto j = parse(out.manifest);
    CHECK(j["result"]["measure_A"].get<double>() == 0.25);
    CHECK(j["result"]["injectivity_violations"].get<long>() == 0);
    CHECK(std::filesystem::exists(dir.path / "star-tree.svg"));
}

TEST_CASE("decompose exits 2 with a structured report when the schedule fails") {
    TempDir dir("mc_test_dec");
    RunConfig cfg;
    cfg.command = "decompose";
    cfg.builtin = "star9";
    cfg.star_k = 2;
    cfg.depth = 4;
    cfg.preset = "default";
    cfg.out_dir = dir.path.string();
    RunOutcome out = run_command(cfg);
    CHECK(out.exit_code == 2);
    auto j = parse(out.manifest);
    CHECK(j["result"]["failure"]["stage"].get<std::string>() == "initial-level");
    CHECK(!j["result"]["failure"]["per_level"].empty());
}

TEST_CASE("verify-all manifests are byte-identical across thread counts") {
    TempDir d1("mc_test_va1"), d8("mc_test_va8");
    RunConfig cfg;
    cfg.command = "verify-all";
    cfg.depth = 4;
    cfg.out_dir = d1.path.string();
    cfg.threads = 1;
    RunOutcome a = run_command(cfg);
    cfg.out_dir = d8.path.string();
    cfg.threads = 8;
    RunOutcome b = run_command(cfg);
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    // manifests embed the config; neutralize the intentional differences
    auto ja = parse(a.manifest);
    auto jb = parse(b.manifest);
    CHECK(ja["result"] == jb["result"]);
}

TEST_CASE("config files round trip") {
    TempDir dir("mc_test_cfg");
    RunConfig cfg;
    cfg.command = "content";
    cfg.builtin = "star9";
    cfg.depth = 5;
    cfg.preset = "desk";
    cfg.seed = 42;
    std::string path = (dir.path / "cfg.json").string();
    cfg.save_json(path);
    RunConfig loaded = RunConfig::load_json(path);
    CHECK(loaded.builtin == "star9");
    CHECK(loaded.depth == 5);
    CHECK(loaded.preset == "desk");
    CHECK(loaded.seed == 42);

    std::ofstream bad(dir.path / "bad.json");
    bad << "{\"schema\": \"nope\"}";
    bad.close();
    CHECK_THROWS_AS(RunConfig::load_json((dir.path / "bad.json").string()), ArgumentError);
}

TEST_CASE("presets resolve and unknown names are rejected") {
    CHECK(preset_by_name("default").eps == doctest::Approx(0.01));
    CHECK(preset_by_name("desk").c0 == 3);
    CHECK(preset_by_name("demo").delta_prime == doctest::Approx(0.11));
    CHECK_THROWS_AS(preset_by_name("nope"), ArgumentError);

    // default preset resolves the window factor per map dimensions
    RunConfig cfg;
    cfg.preset = "default";
    cfg.n = 1;
    cfg.m = 1;
    CHECK(cfg.pipeline_options().fit.c0 == 20);
}
