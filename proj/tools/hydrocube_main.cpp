// hydrocube: batch driver for the synthetic-scene hydrology pipeline.
//
//   hydrocube synth    --config cfg.json [--seed N] [--force]
//   hydrocube pipeline --config cfg.json [--stage NAME] [--seed N]
//   hydrocube report   --config cfg.json
//
// Exit codes: 0 success, 2 config error, 3 stage failure.

#include "hydrocube/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{"hydrological datacube pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string stage;
    std::uint64_t seed_override = 0;
    bool has_seed = false;
    bool force = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration (JSON)")->required();
        cmd->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { has_seed = true; });
    };

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic scene containers");
    add_common(synth);
    synth->add_flag("--force", force, "overwrite a non-empty scenes directory");

    CLI::App* pipeline = app.add_subcommand("pipeline", "run despeckle/segment/forecast/hydro");
    add_common(pipeline);
    pipeline->add_option("--stage", stage, "run a single stage (despeckle|segment|forecast|hydro)");

    CLI::App* report = app.add_subcommand("report", "render figures and tables for a finished run");
    add_common(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        hydrocube::RunConfig cfg = hydrocube::RunConfig::from_json_file(config_path);
        if (has_seed) cfg.seed = seed_override;

        if (synth->parsed()) {
            hydrocube::cmd_synth(cfg, force);
            std::printf("synth: %d scene containers in %s\n", cfg.synth.num_scenes,
                        cfg.scenes_dir.string().c_str());
        } else if (pipeline->parsed()) {
            std::vector<std::string> stages;
            if (!stage.empty()) stages.push_back(stage);
            hydrocube::cmd_pipeline(cfg, stages);
            std::printf("pipeline: outputs in %s\n", cfg.output_dir.string().c_str());
        } else if (report->parsed()) {
            hydrocube::cmd_report(cfg);
            std::printf("report: figures and tables in %s\n",
                        (cfg.output_dir / "report").string().c_str());
        }
    } catch (const hydrocube::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const hydrocube::StageError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
