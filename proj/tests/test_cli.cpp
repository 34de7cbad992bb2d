#include "hydrocube/pipeline.hpp"
#include "hydrocube/plot.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace hydrocube;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny_config(const fs::path& root) {
    RunConfig cfg;
    cfg.seed = 11;
    cfg.scenes_dir = root / "scenes";
    cfg.output_dir = root / "run";
    cfg.validation_ratio = 0.25;
    cfg.synth.num_scenes = 4;
    cfg.synth.width = cfg.synth.height = 48;
    cfg.synth.timesteps = 10;
    cfg.synth.base_radius_px = 11;
    cfg.synth.radius_jitter_px = 1.0;
    cfg.synth.seasonal_amplitude_px = 2.5;
    cfg.synth.cloud_probability = 0.2;
    cfg.despeckle.model = {1, 8, 3, true};
    cfg.despeckle.epochs = 2;
    cfg.despeckle.max_pairs = 24;
    cfg.segmentation.depth = 2;
    cfg.segmentation.base_channels = 4;
    cfg.segmentation.epochs = 2;
    cfg.segmentation.tile = 48;
    cfg.segmentation.combos = {"S1", "S1+S2+Slo+El"};
    cfg.forecast.hidden = 4;
    cfg.forecast.epochs = 2;
    cfg.forecast.families = {"TD-CNN"};
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cmd_synth generates loadable containers, deterministically") {
    TempDir dir("hydrocube_test_synth");
    RunConfig cfg = tiny_config(dir.path);
    cmd_synth(cfg, false);

    int count = 0;
    for (const auto& entry : fs::directory_iterator(cfg.scenes_dir)) {
        DataCube cube = load_cube(entry.path());
        CHECK(cube.manifest.time_count() == 10);
        ++count;
    }
    CHECK(count == 4);

    // same seed: byte-identical containers
    const std::string before = slurp(cfg.scenes_dir / "scene_000" / "t_0.raw");
    const std::string manifest_before = slurp(cfg.scenes_dir / "scene_000" / "manifest.json");
    cmd_synth(cfg, true);
    CHECK(slurp(cfg.scenes_dir / "scene_000" / "t_0.raw") == before);
    CHECK(slurp(cfg.scenes_dir / "scene_000" / "manifest.json") == manifest_before);

    // refuses to clobber without --force
    CHECK_THROWS_AS(cmd_synth(cfg, false), StageError);

    RunConfig empty = cfg;
    empty.synth.num_scenes = 0;
    CHECK_THROWS_WITH_AS(cmd_synth(empty, true), doctest::Contains("nothing to generate"),
                         ConfigError);
}

TEST_CASE("stage filter writes only that stage's artifacts") {
    TempDir dir("hydrocube_test_stagefilter");
    RunConfig cfg = tiny_config(dir.path);
    cmd_synth(cfg, false);
    cmd_pipeline(cfg, {"segment"});

    CHECK(fs::exists(cfg.output_dir / "segmenter" / "ablation.csv"));
    CHECK(fs::exists(cfg.output_dir / "segmenter" / "best.json"));
    CHECK(!fs::exists(cfg.output_dir / "despeckler"));
    CHECK(!fs::exists(cfg.output_dir / "forecaster"));
    CHECK(!fs::exists(cfg.output_dir / "hydro"));
    CHECK(!fs::exists(cfg.output_dir / "report.json"));

    // forecast can now run standalone against the stored segmenter
    cmd_pipeline(cfg, {"forecast"});
    CHECK(fs::exists(cfg.output_dir / "forecaster" / "comparison.csv"));

    CHECK_THROWS_AS(cmd_pipeline(cfg, {"nonsense"}), ConfigError);
}

TEST_CASE("forecast without a segmenter fails with the stage name") {
    TempDir dir("hydrocube_test_nostage");
    RunConfig cfg = tiny_config(dir.path);
    cmd_synth(cfg, false);
    try {
        cmd_pipeline(cfg, {"forecast"});
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage == "forecast");
        CHECK(std::string(e.what()).find("segmenter") != std::string::npos);
    }
}

TEST_CASE("corrupt container aborts naming the datacube stage") {
    TempDir dir("hydrocube_test_corrupt");
    RunConfig cfg = tiny_config(dir.path);
    cmd_synth(cfg, false);
    // truncate one raster
    std::ofstream f(cfg.scenes_dir / "scene_001" / "t_3.raw", std::ios::binary | std::ios::trunc);
    f << "corrupt";
    f.close();
    try {
        cmd_pipeline(cfg, {});
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage == "datacube");
    }
}

TEST_CASE("full pipeline report blocks, report idempotency, cross-file consistency") {
    TempDir dir("hydrocube_test_full");
    RunConfig cfg = tiny_config(dir.path);
    cmd_synth(cfg, false);

    // report before the pipeline: missing inputs named explicitly
    CHECK_THROWS_WITH_AS(cmd_report(cfg), doctest::Contains("report.json"), StageError);

    cmd_pipeline(cfg, {});
    const std::string report_text = slurp(cfg.output_dir / "report.json");
    for (const char* key :
         {"\"ablation\"", "\"forecast\"", "\"hydro_series\"", "\"validation_olivo\"",
          "\"validation_synthetic\""})
        CHECK(report_text.find(key) != std::string::npos);

    // every emitted file is listed in the run manifest
    const std::string manifest = slurp(cfg.output_dir / "run_manifest.json");
    for (const char* f : {"report.json", "ablation.csv", "comparison.csv", "validation_olivo.csv"})
        CHECK(manifest.find(f) != std::string::npos);

    cmd_report(cfg);
    CHECK(fs::exists(cfg.output_dir / "report" / "volume_scene_000.png"));
    const std::string png = slurp(cfg.output_dir / "report" / "volume_scene_000.png");
    CHECK(png.substr(0, 4) == std::string("\x89PNG", 4));
    const std::string series_csv = slurp(cfg.output_dir / "report" / "hydro_series.csv");

    // idempotent re-run
    cmd_report(cfg);
    CHECK(slurp(cfg.output_dir / "report" / "volume_scene_000.png") == png);
    CHECK(slurp(cfg.output_dir / "report" / "hydro_series.csv") == series_csv);

    // consolidated series values equal the per-scene stage CSV values
    const std::string scene_csv = slurp(cfg.output_dir / "hydro" / "scene_000_series.csv");
    std::istringstream consolidated(series_csv), stage(scene_csv);
    std::string line_a, line_b;
    std::getline(consolidated, line_a);  // headers differ (scene column)
    std::getline(stage, line_b);
    while (std::getline(stage, line_b)) {
        REQUIRE(std::getline(consolidated, line_a));
        CHECK(line_a == "scene_000," + line_b);
    }
}

TEST_CASE("config parse errors and round trip") {
    TempDir dir("hydrocube_test_cfg");
    CHECK_THROWS_AS(RunConfig::from_json_file(dir.path / "missing.json"), ConfigError);

    std::ofstream bad(dir.path / "bad.json");
    bad << "{ not json";
    bad.close();
    CHECK_THROWS_AS(RunConfig::from_json_file(dir.path / "bad.json"), ConfigError);

    std::ofstream bad_combo(dir.path / "combo.json");
    bad_combo << R"({"segmentation": {"combos": ["S9"]}})";
    bad_combo.close();
    CHECK_THROWS_AS(RunConfig::from_json_file(dir.path / "combo.json"), ConfigError);

    RunConfig cfg = tiny_config(dir.path);
    std::ofstream out(dir.path / "cfg.json");
    out << cfg.to_json_string();
    out.close();
    RunConfig parsed = RunConfig::from_json_file(dir.path / "cfg.json");
    CHECK(parsed.seed == cfg.seed);
    CHECK(parsed.synth.num_scenes == cfg.synth.num_scenes);
    CHECK(parsed.segmentation.combos == cfg.segmentation.combos);
    CHECK(parsed.forecast.families == cfg.forecast.families);
    CHECK(parsed.to_json_string() == cfg.to_json_string());
}

TEST_CASE("line plot writer") {
    TempDir dir("hydrocube_test_plot");
    std::vector<double> x = {0, 1, 2, 3, 4}, y = {1.0, 3.0, 2.0, 5.0, 4.0};
    write_line_plot_png(dir.path / "plot.png", x, y);
    const std::string png = slurp(dir.path / "plot.png");
    CHECK(png.substr(0, 4) == std::string("\x89PNG", 4));
    write_line_plot_png(dir.path / "plot2.png", x, y);
    CHECK(slurp(dir.path / "plot2.png") == png);  // deterministic encode
    CHECK_THROWS_AS(write_line_plot_png(dir.path / "bad.png", {}, {}), std::invalid_argument);
}

#ifdef HYDROCUBE_BIN
TEST_CASE("binary exit codes") {
    TempDir dir("hydrocube_test_exit");
    RunConfig cfg = tiny_config(dir.path);
    std::ofstream out(dir.path / "cfg.json");
    out << cfg.to_json_string();
    out.close();
    const std::string bin = HYDROCUBE_BIN;
    auto run = [&](const std::string& args) {
        const int status = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(status);
    };
    CHECK(run("synth --config " + (dir.path / "cfg.json").string()) == 0);
    CHECK(run("synth --config " + (dir.path / "cfg.json").string()) == 3);  // non-empty, no --force
    CHECK(run("synth --config " + (dir.path / "nope.json").string()) == 2);
    CHECK(run("pipeline --config " + (dir.path / "cfg.json").string() + " --stage bogus") == 2);
    CHECK(run("report --config " + (dir.path / "cfg.json").string()) == 3);  // no report.json yet
}
#endif
