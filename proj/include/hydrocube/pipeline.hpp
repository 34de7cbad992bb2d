#pragma once

// Batch orchestration: scene generation, the despeckle -> segment ->
// forecast -> hydro pipeline over scene containers, and report rendering.
// Every run is driven by one JSON config and one top-level seed; per-stage
// randomness uses named sub-seeds derived from it.

#include "hydrocube/datacube.hpp"
#include "hydrocube/despeckle.hpp"
#include "hydrocube/forecast.hpp"
#include "hydrocube/hydro.hpp"
#include "hydrocube/segmentation.hpp"
#include "hydrocube/synthgen.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hydrocube {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string stage_name, const std::string& what)
        : std::runtime_error("stage " + stage_name + ": " + what), stage(std::move(stage_name)) {}
};

std::uint64_t sub_seed(std::uint64_t seed, const std::string& name);

struct SynthConfig {
    int num_scenes = 8;
    int width = 64, height = 64, timesteps = 20;
    double base_radius_px = 15.0, radius_jitter_px = 2.0;
    double seasonal_amplitude_px = 4.0, amplitude_jitter_px = 1.0;
    int seasonal_period = 6;
    double trend_px_per_step = -0.05, trend_jitter = 0.05;
    double bowl_depth_m = 10.0;
    int looks = 4;
    double cloud_probability = 0.15;
    double base_lat = 38.0, base_lon = 10.0;
    std::string processing_baseline = "04.00";
    Date start_date{2016, 7, 15};
    int cadence_months = 2;
};

struct DespeckleStageConfig {
    DespeckleModelSpec model{2, 16, 3, true};
    int epochs = 10;
    int batch_size = 8;
    double learning_rate = 1e-3;
    SpeckleLossWeights weights;
    int max_pairs = 400;
};

struct SegStageConfig {
    int depth = 3;
    int base_channels = 8;
    int epochs = 8;
    int batch_size = 8;
    double learning_rate = 2e-3;
    SegLossWeights weights;
    std::vector<std::string> combos;  // empty: all five
    double threshold = 0.5;
    int tile = 64;
};

struct ForecastStageConfig {
    int hidden = 8;
    int kernel = 3;
    int depth = 1;
    int history = 7;
    int epochs = 10;
    int batch_size = 8;
    double learning_rate = 2e-3;
    ForecastLossWeights weights;
    std::vector<std::string> families;  // empty: all three
};

struct HydroStageConfig {
    int seasonal_period = 6;
    int date_tolerance_days = 7;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::filesystem::path scenes_dir = "scenes";
    std::filesystem::path output_dir = "runs/experiment";
    double validation_ratio = 0.25;
    SynthConfig synth;
    DespeckleStageConfig despeckle;
    SegStageConfig segmentation;
    ForecastStageConfig forecast;
    HydroStageConfig hydro;

    static RunConfig from_json_file(const std::filesystem::path& file);
    std::string to_json_string() const;
};

/// Generate `synth.num_scenes` containers under scenes_dir. Refuses an
/// existing non-empty directory unless `force`.
void cmd_synth(const RunConfig& config, bool force);

/// Run the selected stages (empty: all of despeckle, segment, forecast,
/// hydro) over the scene containers. A full run writes report.json.
void cmd_pipeline(const RunConfig& config, const std::vector<std::string>& stages = {});

/// Render figures and consolidated tables from a completed experiment dir.
void cmd_report(const RunConfig& config);

const std::vector<std::string>& pipeline_stage_names();

}  // namespace hydrocube
