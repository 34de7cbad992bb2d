#include "hydrocube/pipeline.hpp"

#include "hydrocube/metrics.hpp"
#include "hydrocube/plot.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace hydrocube {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::uint64_t sub_seed(std::uint64_t seed, const std::string& name) {
    // FNV-1a over the stage name, mixed with the master seed
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) {
        h ^= std::uint64_t(static_cast<unsigned char>(c));
        h *= 1099511628211ULL;
    }
    return h ^ (seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

json json_number(double v) {
    if (std::isinf(v)) return nullptr;
    return round6(v);
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

void parse_synth(const json& j, SynthConfig& s) {
    s.num_scenes = get_or(j, "num_scenes", s.num_scenes);
    s.width = get_or(j, "width", s.width);
    s.height = get_or(j, "height", s.height);
    s.timesteps = get_or(j, "timesteps", s.timesteps);
    s.base_radius_px = get_or(j, "base_radius_px", s.base_radius_px);
    s.radius_jitter_px = get_or(j, "radius_jitter_px", s.radius_jitter_px);
    s.seasonal_amplitude_px = get_or(j, "seasonal_amplitude_px", s.seasonal_amplitude_px);
    s.amplitude_jitter_px = get_or(j, "amplitude_jitter_px", s.amplitude_jitter_px);
    s.seasonal_period = get_or(j, "seasonal_period", s.seasonal_period);
    s.trend_px_per_step = get_or(j, "trend_px_per_step", s.trend_px_per_step);
    s.trend_jitter = get_or(j, "trend_jitter", s.trend_jitter);
    s.bowl_depth_m = get_or(j, "bowl_depth_m", s.bowl_depth_m);
    s.looks = get_or(j, "looks", s.looks);
    s.cloud_probability = get_or(j, "cloud_probability", s.cloud_probability);
    s.base_lat = get_or(j, "base_lat", s.base_lat);
    s.base_lon = get_or(j, "base_lon", s.base_lon);
    s.processing_baseline = get_or(j, "processing_baseline", s.processing_baseline);
    if (j.contains("start_date")) s.start_date = Date::parse_iso(j.at("start_date").get<std::string>());
    s.cadence_months = get_or(j, "cadence_months", s.cadence_months);
}

json synth_to_json(const SynthConfig& s) {
    return json{{"num_scenes", s.num_scenes},
                {"width", s.width},
                {"height", s.height},
                {"timesteps", s.timesteps},
                {"base_radius_px", s.base_radius_px},
                {"radius_jitter_px", s.radius_jitter_px},
                {"seasonal_amplitude_px", s.seasonal_amplitude_px},
                {"amplitude_jitter_px", s.amplitude_jitter_px},
                {"seasonal_period", s.seasonal_period},
                {"trend_px_per_step", s.trend_px_per_step},
                {"trend_jitter", s.trend_jitter},
                {"bowl_depth_m", s.bowl_depth_m},
                {"looks", s.looks},
                {"cloud_probability", s.cloud_probability},
                {"base_lat", s.base_lat},
                {"base_lon", s.base_lon},
                {"processing_baseline", s.processing_baseline},
                {"start_date", s.start_date.to_iso()},
                {"cadence_months", s.cadence_months}};
}

}  // namespace

RunConfig RunConfig::from_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("bad config " + file.string() + ": " + e.what());
    }
    try {
        RunConfig cfg;
        cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
        cfg.scenes_dir = get_or<std::string>(j, "scenes_dir", cfg.scenes_dir.string());
        cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir.string());
        cfg.validation_ratio = get_or(j, "validation_ratio", cfg.validation_ratio);
        if (j.contains("synth")) parse_synth(j.at("synth"), cfg.synth);
        if (j.contains("despeckle")) {
            const json& d = j.at("despeckle");
            cfg.despeckle.model.depth = get_or(d, "depth", cfg.despeckle.model.depth);
            cfg.despeckle.model.channels = get_or(d, "channels", cfg.despeckle.model.channels);
            cfg.despeckle.model.kernel = get_or(d, "kernel", cfg.despeckle.model.kernel);
            cfg.despeckle.epochs = get_or(d, "epochs", cfg.despeckle.epochs);
            cfg.despeckle.batch_size = get_or(d, "batch_size", cfg.despeckle.batch_size);
            cfg.despeckle.learning_rate = get_or(d, "learning_rate", cfg.despeckle.learning_rate);
            cfg.despeckle.max_pairs = get_or(d, "max_pairs", cfg.despeckle.max_pairs);
            cfg.despeckle.weights.alpha1 = get_or(d, "alpha1", cfg.despeckle.weights.alpha1);
            cfg.despeckle.weights.beta1 = get_or(d, "beta1", cfg.despeckle.weights.beta1);
            cfg.despeckle.weights.gamma1 = get_or(d, "gamma1", cfg.despeckle.weights.gamma1);
        }
        if (j.contains("segmentation")) {
            const json& s = j.at("segmentation");
            cfg.segmentation.depth = get_or(s, "depth", cfg.segmentation.depth);
            cfg.segmentation.base_channels = get_or(s, "base_channels", cfg.segmentation.base_channels);
            cfg.segmentation.epochs = get_or(s, "epochs", cfg.segmentation.epochs);
            cfg.segmentation.batch_size = get_or(s, "batch_size", cfg.segmentation.batch_size);
            cfg.segmentation.learning_rate = get_or(s, "learning_rate", cfg.segmentation.learning_rate);
            cfg.segmentation.combos = get_or(s, "combos", cfg.segmentation.combos);
            cfg.segmentation.threshold = get_or(s, "threshold", cfg.segmentation.threshold);
            cfg.segmentation.tile = get_or(s, "tile", cfg.segmentation.tile);
            cfg.segmentation.weights.alpha2 = get_or(s, "alpha2", cfg.segmentation.weights.alpha2);
            cfg.segmentation.weights.beta2 = get_or(s, "beta2", cfg.segmentation.weights.beta2);
            cfg.segmentation.weights.epsilon = get_or(s, "epsilon", cfg.segmentation.weights.epsilon);
        }
        if (j.contains("forecast")) {
            const json& f = j.at("forecast");
            cfg.forecast.hidden = get_or(f, "hidden", cfg.forecast.hidden);
            cfg.forecast.kernel = get_or(f, "kernel", cfg.forecast.kernel);
            cfg.forecast.depth = get_or(f, "depth", cfg.forecast.depth);
            cfg.forecast.history = get_or(f, "history", cfg.forecast.history);
            cfg.forecast.epochs = get_or(f, "epochs", cfg.forecast.epochs);
            cfg.forecast.batch_size = get_or(f, "batch_size", cfg.forecast.batch_size);
            cfg.forecast.learning_rate = get_or(f, "learning_rate", cfg.forecast.learning_rate);
            cfg.forecast.families = get_or(f, "families", cfg.forecast.families);
            cfg.forecast.weights.alpha3 = get_or(f, "alpha3", cfg.forecast.weights.alpha3);
            cfg.forecast.weights.beta3 = get_or(f, "beta3", cfg.forecast.weights.beta3);
            cfg.forecast.weights.gamma3 = get_or(f, "gamma3", cfg.forecast.weights.gamma3);
        }
        if (j.contains("hydro")) {
            const json& h = j.at("hydro");
            cfg.hydro.seasonal_period = get_or(h, "seasonal_period", cfg.hydro.seasonal_period);
            cfg.hydro.date_tolerance_days = get_or(h, "date_tolerance_days", cfg.hydro.date_tolerance_days);
        }
        for (const auto& name : cfg.segmentation.combos) combo_from_name(name);
        for (const auto& name : cfg.forecast.families) family_from_name(name);
        if (cfg.validation_ratio <= 0 || cfg.validation_ratio >= 1)
            throw std::invalid_argument("validation_ratio must be in (0,1)");
        return cfg;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("bad config " + file.string() + ": " + e.what());
    }
}

std::string RunConfig::to_json_string() const {
    json j;
    j["seed"] = seed;
    j["scenes_dir"] = scenes_dir.string();
    j["output_dir"] = output_dir.string();
    j["validation_ratio"] = validation_ratio;
    j["synth"] = synth_to_json(synth);
    j["despeckle"] = {{"depth", despeckle.model.depth},
                      {"channels", despeckle.model.channels},
                      {"kernel", despeckle.model.kernel},
                      {"epochs", despeckle.epochs},
                      {"batch_size", despeckle.batch_size},
                      {"learning_rate", despeckle.learning_rate},
                      {"max_pairs", despeckle.max_pairs},
                      {"alpha1", despeckle.weights.alpha1},
                      {"beta1", despeckle.weights.beta1},
                      {"gamma1", despeckle.weights.gamma1}};
    j["segmentation"] = {{"depth", segmentation.depth},
                         {"base_channels", segmentation.base_channels},
                         {"epochs", segmentation.epochs},
                         {"batch_size", segmentation.batch_size},
                         {"learning_rate", segmentation.learning_rate},
                         {"combos", segmentation.combos},
                         {"threshold", segmentation.threshold},
                         {"tile", segmentation.tile},
                         {"alpha2", segmentation.weights.alpha2},
                         {"beta2", segmentation.weights.beta2},
                         {"epsilon", segmentation.weights.epsilon}};
    j["forecast"] = {{"hidden", forecast.hidden},
                     {"kernel", forecast.kernel},
                     {"depth", forecast.depth},
                     {"history", forecast.history},
                     {"epochs", forecast.epochs},
                     {"batch_size", forecast.batch_size},
                     {"learning_rate", forecast.learning_rate},
                     {"families", forecast.families},
                     {"alpha3", forecast.weights.alpha3},
                     {"beta3", forecast.weights.beta3},
                     {"gamma3", forecast.weights.gamma3}};
    j["hydro"] = {{"seasonal_period", hydro.seasonal_period},
                  {"date_tolerance_days", hydro.date_tolerance_days}};
    return j.dump(2) + "\n";
}

const std::vector<std::string>& pipeline_stage_names() {
    static const std::vector<std::string> names = {"despeckle", "segment", "forecast", "hydro"};
    return names;
}

// ---------------------------------------------------------------------------
// Scene synthesis
// ---------------------------------------------------------------------------

void cmd_synth(const RunConfig& config, bool force) {
    const SynthConfig& s = config.synth;
    if (s.num_scenes <= 0) throw ConfigError("nothing to generate: synth.num_scenes is 0");
    if (fs::exists(config.scenes_dir) && !fs::is_empty(config.scenes_dir) && !force)
        throw StageError("synth", "output dir " + config.scenes_dir.string() +
                                      " is not empty (use --force to overwrite)");
    fs::create_directories(config.scenes_dir);

    std::mt19937_64 rng(sub_seed(config.seed, "synth"));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < s.num_scenes; ++i) {
        SceneParams p;
        p.width = s.width;
        p.height = s.height;
        p.timesteps = s.timesteps;
        p.base_radius_px = s.base_radius_px + s.radius_jitter_px * unit(rng);
        p.seasonal_amplitude_px = std::max(0.0, s.seasonal_amplitude_px + s.amplitude_jitter_px * unit(rng));
        p.seasonal_period = s.seasonal_period;
        p.trend_px_per_step = s.trend_px_per_step + s.trend_jitter * unit(rng);
        p.bowl_depth_m = s.bowl_depth_m;
        p.looks = s.looks;
        p.cloud_probability = s.cloud_probability;
        p.seed = sub_seed(config.seed, "scene." + std::to_string(i));
        p.lat = s.base_lat + 0.5 * i;
        p.lon = s.base_lon;
        p.start_date = s.start_date;
        p.cadence_months = s.cadence_months;
        p.processing_baseline = s.processing_baseline;
        try {
            p.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("synth parameters invalid: ") + e.what());
        }
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%03d", i);
        save_scene(generate_scene(p), config.scenes_dir / name);
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

PlaneF normalize_db_plane(const PlaneF& linear, double lo, double hi) {
    PlaneF out(linear.rows(), linear.cols());
    for (Eigen::Index r = 0; r < linear.rows(); ++r)
        for (Eigen::Index c = 0; c < linear.cols(); ++c) {
            const double v = linear(r, c) > 0 ? 10.0 * std::log10(double(linear(r, c))) : lo;
            out(r, c) = float(std::clamp((v - lo) / (hi - lo), 0.0, 1.0));
        }
    return out;
}

std::string csv_double(double v, int decimals = 6) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

class PipelineRunner {
  public:
    PipelineRunner(RunConfig cfg) : cfg_(std::move(cfg)) {}

    void run(std::vector<std::string> stages) {
        const bool full = stages.empty();
        if (full) stages = pipeline_stage_names();
        for (const auto& s : stages)
            if (std::find(pipeline_stage_names().begin(), pipeline_stage_names().end(), s) ==
                pipeline_stage_names().end())
                throw ConfigError("unknown stage '" + s + "'");

        fs::create_directories(cfg_.output_dir);
        emit(cfg_.output_dir / "run_config.json");
        {
            std::ofstream out(cfg_.output_dir / "run_config.json", std::ios::trunc);
            out << cfg_.to_json_string();
        }

        prepare_data();
        for (const auto& stage : stages) {
            try {
                if (stage == "despeckle") stage_despeckle();
                else if (stage == "segment") stage_segment();
                else if (stage == "forecast") stage_forecast();
                else if (stage == "hydro") stage_hydro();
            } catch (const StageError&) {
                throw;
            } catch (const std::exception& e) {
                throw StageError(stage, e.what());
            }
        }
        if (full) write_report();
        write_manifest();
    }

  private:
    RunConfig cfg_;
    std::vector<std::string> scene_names_;
    std::vector<SyntheticScene> scenes_;
    std::vector<DataCube> cubes_;  // harmonized + normalized
    std::optional<DespeckleModel> despeckler_;
    std::optional<UNetModel> segmenter_;
    std::string best_combo_;
    std::string best_family_;
    // probability maps per scene per timestep, filled lazily
    std::vector<std::vector<PlaneF>> prob_maps_;
    json report_ = json::object();
    std::set<std::string> emitted_;

    void emit(const fs::path& p) { emitted_.insert(fs::relative(p, cfg_.output_dir).string()); }

    void prepare_data() {
        try {
            if (!fs::is_directory(cfg_.scenes_dir))
                throw std::runtime_error("scenes dir not found: " + cfg_.scenes_dir.string());
            for (const auto& entry : fs::directory_iterator(cfg_.scenes_dir))
                if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
                    scene_names_.push_back(entry.path().filename().string());
            std::sort(scene_names_.begin(), scene_names_.end());
            if (scene_names_.empty())
                throw std::runtime_error("no scene containers in " + cfg_.scenes_dir.string());

            for (const auto& name : scene_names_) {
                SyntheticScene scene = load_scene(cfg_.scenes_dir / name);
                // harmonize optical DNs, then map all bands to [0,1]
                DataCube working = scene.cube;
                for (const char* band : {"R", "G", "B", "NIR"}) {
                    const int b = working.manifest.band_ordinal(band);
                    for (int t = 0; t < working.manifest.time_count(); ++t)
                        working.set_band_plane(
                            t, b, harmonize_dn(working.band_plane(t, b), working.manifest.processing_baseline));
                }
                working.manifest.processing_baseline = "03.01";  // offsets removed
                cubes_.push_back(normalize(working, default_normalization()));
                scenes_.push_back(std::move(scene));
            }
        } catch (const std::exception& e) {
            throw StageError("datacube", e.what());
        }
    }

    // Normalized clean SAR plane matching the cube's realized record.
    PlaneF clean_norm(const SyntheticScene& scene, const DataCube& cube, int t, bool vh) const {
        const auto& rec = cube.manifest.normalization->at(vh ? "VH" : "VV");
        return normalize_db_plane(vh ? scene.clean_vh[t] : scene.clean_vv[t], rec.lo, rec.hi);
    }

    std::optional<DespeckleModel> try_load_despeckler() {
        const fs::path dir = cfg_.output_dir / "despeckler";
        if (fs::exists(dir / "spec.json") && fs::exists(dir / "weights.bin"))
            return DespeckleModel::load(dir);
        return std::nullopt;
    }

    void stage_despeckle() {
        std::vector<std::pair<PlaneF, PlaneF>> pairs;
        for (std::size_t i = 0; i < scenes_.size(); ++i) {
            for (int t = 0; t < cubes_[i].manifest.time_count(); ++t) {
                pairs.push_back({cubes_[i].band_plane_named(t, "VV"), clean_norm(scenes_[i], cubes_[i], t, false)});
                pairs.push_back({cubes_[i].band_plane_named(t, "VH"), clean_norm(scenes_[i], cubes_[i], t, true)});
            }
        }
        std::mt19937_64 rng(sub_seed(cfg_.seed, "despeckle.pairs"));
        std::shuffle(pairs.begin(), pairs.end(), rng);
        if (int(pairs.size()) > cfg_.despeckle.max_pairs) pairs.resize(cfg_.despeckle.max_pairs);

        TrainConfig tc;
        tc.epochs = cfg_.despeckle.epochs;
        tc.batch_size = cfg_.despeckle.batch_size;
        tc.learning_rate = cfg_.despeckle.learning_rate;
        tc.seed = sub_seed(cfg_.seed, "despeckle");
        auto result = train_despeckler(pairs, cfg_.despeckle.model, tc, cfg_.despeckle.weights);

        const fs::path dir = cfg_.output_dir / "despeckler";
        result.model.save(dir);
        emit(dir / "spec.json");
        emit(dir / "weights.bin");
        write_despeckle_log(dir / "loss_log.csv", result.log);
        emit(dir / "loss_log.csv");
        despeckler_ = std::move(result.model);

        report_["despeckle"] = {{"pairs", pairs.size()},
                                {"epochs", result.log.size()},
                                {"final_loss", json_number(result.log.back().total)}};
    }

    /// Bands for one frame in the given order, with SAR bands despeckled when
    /// a model is available.
    std::vector<PlaneF> frame_bands(std::size_t scene_idx, int t, const std::vector<std::string>& names) {
        std::vector<PlaneF> out;
        for (const auto& name : names) {
            PlaneF p = cubes_[scene_idx].band_plane_named(t, name);
            if (despeckler_ && (name == "VV" || name == "VH")) p = despeckler_->apply(p);
            out.push_back(std::move(p));
        }
        return out;
    }

    std::vector<SegPatch> build_seg_dataset() {
        std::vector<SegPatch> patches;
        for (std::size_t i = 0; i < scenes_.size(); ++i) {
            const auto& manifest = cubes_[i].manifest;
            for (int t = 0; t < manifest.time_count(); ++t) {
                SegPatch patch;
                auto bands = frame_bands(i, t, canonical_band_names());
                for (int b = 0; b < kBandCount; ++b)
                    patch.bands[canonical_band_names()[b]] = std::move(bands[b]);
                patch.target = scenes_[i].truth_masks[t];
                patch.location = {manifest.lat, manifest.lon};
                patches.push_back(std::move(patch));
            }
        }
        return patches;
    }

    void stage_segment() {
        if (!despeckler_) despeckler_ = try_load_despeckler();
        auto dataset = build_seg_dataset();

        std::vector<std::string> combos = cfg_.segmentation.combos;
        if (combos.empty())
            for (BandCombo c : all_band_combos()) combos.push_back(combo_name(c));

        UNetSpec arch;
        arch.depth = cfg_.segmentation.depth;
        arch.base_channels = cfg_.segmentation.base_channels;
        arch.input_bands = {"placeholder"};  // set per combo by the trainer
        json ablation = json::array();
        double best_iou = -1.0;

        fs::create_directories(cfg_.output_dir / "segmenter");
        std::ofstream csv(cfg_.output_dir / "segmenter" / "ablation.csv", std::ios::trunc);
        csv << "combo,precision,recall,iou\n";

        for (const auto& combo_str : combos) {
            const BandCombo combo = combo_from_name(combo_str);
            TrainConfig tc;
            tc.epochs = cfg_.segmentation.epochs;
            tc.batch_size = cfg_.segmentation.batch_size;
            tc.learning_rate = cfg_.segmentation.learning_rate;
            tc.seed = sub_seed(cfg_.seed, "segment");
            tc.validation_ratio = cfg_.validation_ratio;
            auto result = train_segmenter(dataset, combo, arch, tc, cfg_.segmentation.weights);

            const auto& best = result.log[result.best_epoch];
            const fs::path dir = cfg_.output_dir / "segmenter" / combo_str;
            result.model.save(dir);
            emit(dir / "spec.json");
            emit(dir / "weights.bin");
            write_seg_log(dir / "epochs.csv", result.log);
            emit(dir / "epochs.csv");

            csv << combo_str << ',' << csv_double(best.precision) << ',' << csv_double(best.recall)
                << ',' << csv_double(best.iou) << "\n";
            ablation.push_back({{"combo", combo_str},
                                {"precision", json_number(best.precision)},
                                {"recall", json_number(best.recall)},
                                {"iou", json_number(best.iou)}});
            if (best.iou > best_iou) {
                best_iou = best.iou;
                best_combo_ = combo_str;
                segmenter_ = std::move(result.model);
            }
        }
        csv.close();
        emit(cfg_.output_dir / "segmenter" / "ablation.csv");

        {
            std::ofstream best(cfg_.output_dir / "segmenter" / "best.json", std::ios::trunc);
            best << json{{"combo", best_combo_}}.dump(2) << "\n";
            emit(cfg_.output_dir / "segmenter" / "best.json");
        }

        // classical index baseline for reference
        double ndwi_iou = 0;
        int frames = 0;
        for (std::size_t i = 0; i < scenes_.size(); ++i)
            for (int t = 0; t < cubes_[i].manifest.time_count(); ++t) {
                const Mask m = ndwi_baseline(cubes_[i].band_plane_named(t, "G"),
                                             cubes_[i].band_plane_named(t, "NIR"));
                ndwi_iou += weighted_report(m, scenes_[i].truth_masks[t]).iou;
                ++frames;
            }
        report_["ablation"] = ablation;
        report_["segmentation"] = {{"best_combo", best_combo_},
                                   {"best_iou", json_number(best_iou)},
                                   {"ndwi_baseline_iou", json_number(ndwi_iou / frames)}};
    }

    void ensure_segmenter() {
        if (segmenter_) return;
        const fs::path best_file = cfg_.output_dir / "segmenter" / "best.json";
        if (!fs::exists(best_file))
            throw std::runtime_error("no segmenter checkpoint; run the segment stage first");
        std::ifstream in(best_file);
        json j;
        in >> j;
        best_combo_ = j.at("combo").get<std::string>();
        segmenter_ = UNetModel::load(cfg_.output_dir / "segmenter" / best_combo_);
    }

    void ensure_probability_maps() {
        if (!prob_maps_.empty()) return;
        if (!despeckler_) despeckler_ = try_load_despeckler();
        ensure_segmenter();
        const auto bands = segmenter_->spec().input_bands;
        prob_maps_.resize(scenes_.size());
        for (std::size_t i = 0; i < scenes_.size(); ++i)
            for (int t = 0; t < cubes_[i].manifest.time_count(); ++t)
                prob_maps_[i].push_back(
                    predict_mask(*segmenter_, frame_bands(i, t, bands), cfg_.segmentation.tile));
    }

    void stage_forecast() {
        ensure_probability_maps();
        const int history = cfg_.forecast.history;

        std::vector<SequenceSample> samples;
        for (std::size_t i = 0; i < scenes_.size(); ++i) {
            const auto& manifest = cubes_[i].manifest;
            for (int t = history; t < manifest.time_count(); ++t) {
                SequenceSample s;
                s.history.assign(prob_maps_[i].begin() + (t - history), prob_maps_[i].begin() + t);
                s.target = prob_maps_[i][t];
                s.location = {manifest.lat, manifest.lon};
                s.target_date = manifest.timestamps[t];
                samples.push_back(std::move(s));
            }
        }
        if (samples.empty())
            throw std::runtime_error("time axis too short for history length " +
                                     std::to_string(history));

        std::vector<std::string> families = cfg_.forecast.families;
        if (families.empty())
            for (ForecastFamily f : all_forecast_families()) families.push_back(family_name(f));

        struct Row {
            std::string family;
            double mse, ssim_v, psnr_v;
        };
        std::vector<Row> rows;
        std::vector<std::size_t> shared_val;
        double best_mse = -1;

        for (const auto& fam_str : families) {
            ForecastModelSpec spec;
            spec.family = family_from_name(fam_str);
            spec.hidden = cfg_.forecast.hidden;
            spec.kernel = cfg_.forecast.kernel;
            spec.depth = cfg_.forecast.depth;
            spec.history = history;
            TrainConfig tc;
            tc.epochs = cfg_.forecast.epochs;
            tc.batch_size = cfg_.forecast.batch_size;
            tc.learning_rate = cfg_.forecast.learning_rate;
            tc.seed = sub_seed(cfg_.seed, "forecast");
            tc.validation_ratio = cfg_.validation_ratio;
            auto result = train_forecaster(samples, spec, tc, cfg_.forecast.weights);
            shared_val = result.val_indices;

            const auto& best = result.log[result.best_epoch];
            const fs::path dir = cfg_.output_dir / "forecaster" / fam_str;
            result.model.save(dir);
            emit(dir / "spec.json");
            emit(dir / "weights.bin");
            write_forecast_log(dir / "epochs.csv", result.log);
            emit(dir / "epochs.csv");
            rows.push_back({fam_str, best.val_mse, best.val_ssim, best.val_psnr});
            if (best_mse < 0 || best.val_mse < best_mse) {
                best_mse = best.val_mse;
                best_family_ = fam_str;
            }
        }

        // persistence control on the same validation samples
        double persistence_mse = 0;
        for (std::size_t idx : shared_val)
            persistence_mse += mse(persistence_baseline(samples[idx].history), samples[idx].target);
        persistence_mse /= double(shared_val.size());

        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.mse < b.mse; });
        fs::create_directories(cfg_.output_dir / "forecaster");
        std::ofstream csv(cfg_.output_dir / "forecaster" / "comparison.csv", std::ios::trunc);
        csv << "family,mse,ssim,psnr\n";
        json block = json::array();
        for (const auto& r : rows) {
            csv << r.family << ',' << csv_double(r.mse, 8) << ',' << csv_double(r.ssim_v) << ','
                << (std::isinf(r.psnr_v) ? std::string("inf") : csv_double(r.psnr_v, 4)) << "\n";
            block.push_back({{"family", r.family},
                             {"mse", json_number(r.mse)},
                             {"ssim", json_number(r.ssim_v)},
                             {"psnr", json_number(r.psnr_v)},
                             {"psnr_infinite", std::isinf(r.psnr_v)}});
        }
        csv.close();
        emit(cfg_.output_dir / "forecaster" / "comparison.csv");
        {
            std::ofstream best(cfg_.output_dir / "forecaster" / "best.json", std::ios::trunc);
            best << json{{"family", best_family_}}.dump(2) << "\n";
            emit(cfg_.output_dir / "forecaster" / "best.json");
        }
        report_["forecast"] = block;
        report_["forecast_persistence_mse"] = json_number(persistence_mse);
        report_["forecast_best_family"] = best_family_;
    }

    void stage_hydro() {
        ensure_probability_maps();
        fs::create_directories(cfg_.output_dir / "hydro");
        json series_block = json::object();
        json validation_block = json::array();

        for (std::size_t i = 0; i < scenes_.size(); ++i) {
            const auto& manifest = cubes_[i].manifest;
            std::vector<std::pair<Date, Mask>> dated;
            for (int t = 0; t < manifest.time_count(); ++t)
                dated.push_back({manifest.timestamps[t],
                                 binarize(prob_maps_[i][t], cfg_.segmentation.threshold)});
            const HydroSeries series = build_series(dated, scenes_[i].dem);

            const fs::path csv_path = cfg_.output_dir / "hydro" / (scene_names_[i] + "_series.csv");
            std::ofstream csv(csv_path, std::ios::trunc);
            csv << "date,area_m2,volume_m3,pixels\n";
            json records = json::array();
            for (const auto& rec : series.records) {
                csv << rec.date.to_iso() << ',' << csv_double(rec.area_m2, 3) << ','
                    << csv_double(rec.volume_m3, 3) << ',' << rec.pixels << "\n";
                records.push_back({{"date", rec.date.to_iso()},
                                   {"area_m2", json_number(rec.area_m2)},
                                   {"volume_m3", json_number(rec.volume_m3)},
                                   {"pixels", rec.pixels}});
            }
            csv.close();
            emit(csv_path);

            json scene_block;
            scene_block["records"] = records;
            std::vector<double> volumes;
            for (const auto& rec : series.records) volumes.push_back(rec.volume_m3);
            if (int(volumes.size()) >= 2 * cfg_.hydro.seasonal_period) {
                const auto decomposition = trend(volumes, cfg_.hydro.seasonal_period);
                scene_block["volume_slope_m3_per_step"] = json_number(decomposition.slope_per_step);
            }

            // synthetic ground truth from the scene's closed forms
            std::vector<std::pair<Date, double>> gt;
            for (int t = 0; t < manifest.time_count(); ++t)
                gt.push_back({manifest.timestamps[t], analytic_truth(scenes_[i].params, t).area_m2});
            const auto rows = validate_against_ground(series, gt, cfg_.hydro.date_tolerance_days);
            for (const auto& row : rows)
                validation_block.push_back({{"scene", scene_names_[i]},
                                            {"date", row.date.to_iso()},
                                            {"ground_truth_m2", json_number(row.ground_truth_m2)},
                                            {"measured_m2", json_number(row.measured_m2)},
                                            {"difference_m2", json_number(row.difference_m2)}});
            series_block[scene_names_[i]] = scene_block;
        }

        {
            const fs::path path = cfg_.output_dir / "hydro" / "validation_synthetic.csv";
            std::ofstream csv(path, std::ios::trunc);
            csv << "scene,date,ground_truth_m2,measured_m2,difference_m2\n";
            for (const auto& row : validation_block)
                csv << row.at("scene").get<std::string>() << ',' << row.at("date").get<std::string>()
                    << ',' << csv_double(row.at("ground_truth_m2").get<double>(), 3) << ','
                    << csv_double(row.at("measured_m2").get<double>(), 3) << ','
                    << csv_double(row.at("difference_m2").get<double>(), 3) << "\n";
            emit(path);
        }

        // published reference comparison, digits kept verbatim
        json olivo = json::array();
        {
            const fs::path path = cfg_.output_dir / "hydro" / "validation_olivo.csv";
            std::ofstream csv(path, std::ios::trunc);
            csv << "date,ground_truth_m2,measured_m2,difference_m2\n";
            for (const auto& row : olivo_reference_rows()) {
                const double diff = row.ground_truth_m2 - row.measured_m2;
                csv << row.date.to_iso() << ',' << std::int64_t(row.ground_truth_m2) << ','
                    << std::int64_t(row.measured_m2) << ',' << std::int64_t(diff) << "\n";
                olivo.push_back({{"date", row.date.to_iso()},
                                 {"ground_truth_m2", row.ground_truth_m2},
                                 {"measured_m2", row.measured_m2},
                                 {"difference_m2", diff}});
            }
            emit(path);
        }

        report_["hydro_series"] = series_block;
        report_["validation_synthetic"] = validation_block;
        report_["validation_olivo"] = olivo;
    }

    void write_report() {
        json out;
        out["schema_version"] = 1;
        out["seed"] = cfg_.seed;
        out["scenes"] = scene_names_;
        for (const auto& key : {"despeckle", "ablation", "segmentation", "forecast",
                                "forecast_persistence_mse", "forecast_best_family", "hydro_series",
                                "validation_synthetic", "validation_olivo"})
            if (report_.contains(key)) out[key] = report_[key];
        std::ofstream f(cfg_.output_dir / "report.json", std::ios::trunc);
        f << out.dump(2) << "\n";
        emit(cfg_.output_dir / "report.json");
    }

    void write_manifest() {
        emit(cfg_.output_dir / "run_manifest.json");
        json j;
        j["files"] = std::vector<std::string>(emitted_.begin(), emitted_.end());
        std::ofstream f(cfg_.output_dir / "run_manifest.json", std::ios::trunc);
        f << j.dump(2) << "\n";
    }
};

}  // namespace

void cmd_pipeline(const RunConfig& config, const std::vector<std::string>& stages) {
    PipelineRunner runner(config);
    runner.run(stages);
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

void cmd_report(const RunConfig& config) {
    const fs::path dir = config.output_dir;
    const fs::path report_file = dir / "report.json";
    if (!fs::exists(report_file))
        throw StageError("report", "missing input: " + report_file.string() +
                                       " (run the full pipeline first)");
    std::ifstream in(report_file);
    json report;
    in >> report;

    const fs::path out = dir / "report";
    fs::create_directories(out);
    std::vector<std::string> written;

    // figures: volume-vs-date curve per scene
    for (const auto& [scene, block] : report.at("hydro_series").items()) {
        std::vector<double> x, y;
        for (const auto& rec : block.at("records")) {
            x.push_back(double(Date::parse_iso(rec.at("date").get<std::string>()).to_days()));
            y.push_back(rec.at("volume_m3").get<double>());
        }
        const fs::path png = out / ("volume_" + scene + ".png");
        write_line_plot_png(png, x, y);
        written.push_back(png.filename().string());
    }

    // consolidated tables
    {
        std::ofstream csv(out / "ablation.csv", std::ios::trunc);
        csv << "combo,precision,recall,iou\n";
        for (const auto& row : report.at("ablation"))
            csv << row.at("combo").get<std::string>() << ','
                << csv_double(row.at("precision").get<double>()) << ','
                << csv_double(row.at("recall").get<double>()) << ','
                << csv_double(row.at("iou").get<double>()) << "\n";
        written.push_back("ablation.csv");
    }
    {
        std::ofstream csv(out / "forecast_comparison.csv", std::ios::trunc);
        csv << "family,mse,ssim,psnr\n";
        for (const auto& row : report.at("forecast"))
            csv << row.at("family").get<std::string>() << ','
                << csv_double(row.at("mse").get<double>(), 8) << ','
                << csv_double(row.at("ssim").get<double>()) << ','
                << (row.at("psnr").is_null() ? std::string("inf")
                                             : csv_double(row.at("psnr").get<double>(), 4))
                << "\n";
        written.push_back("forecast_comparison.csv");
    }
    {
        std::ofstream csv(out / "hydro_series.csv", std::ios::trunc);
        csv << "scene,date,area_m2,volume_m3,pixels\n";
        for (const auto& [scene, block] : report.at("hydro_series").items())
            for (const auto& rec : block.at("records"))
                csv << scene << ',' << rec.at("date").get<std::string>() << ','
                    << csv_double(rec.at("area_m2").get<double>(), 3) << ','
                    << csv_double(rec.at("volume_m3").get<double>(), 3) << ','
                    << rec.at("pixels").get<std::int64_t>() << "\n";
        written.push_back("hydro_series.csv");
    }
    {
        std::ofstream csv(out / "validation.csv", std::ios::trunc);
        csv << "source,scene,date,ground_truth_m2,measured_m2,difference_m2\n";
        for (const auto& row : report.at("validation_olivo"))
            csv << "olivo_reference,," << row.at("date").get<std::string>() << ','
                << std::int64_t(row.at("ground_truth_m2").get<double>()) << ','
                << std::int64_t(row.at("measured_m2").get<double>()) << ','
                << std::int64_t(row.at("difference_m2").get<double>()) << "\n";
        for (const auto& row : report.at("validation_synthetic"))
            csv << "synthetic," << row.at("scene").get<std::string>() << ','
                << row.at("date").get<std::string>() << ','
                << csv_double(row.at("ground_truth_m2").get<double>(), 3) << ','
                << csv_double(row.at("measured_m2").get<double>(), 3) << ','
                << csv_double(row.at("difference_m2").get<double>(), 3) << "\n";
        written.push_back("validation.csv");
    }
    {
        std::ofstream txt(out / "summary.txt", std::ios::trunc);
        txt << "experiment: " << dir.string() << "\n";
        txt << "seed: " << report.at("seed").get<std::uint64_t>() << "\n\n";
        txt << "segmentation ablation (weighted validation metrics):\n";
        for (const auto& row : report.at("ablation"))
            txt << "  " << row.at("combo").get<std::string>() << ": precision "
                << csv_double(row.at("precision").get<double>(), 4) << ", recall "
                << csv_double(row.at("recall").get<double>(), 4) << ", iou "
                << csv_double(row.at("iou").get<double>(), 4) << "\n";
        if (report.contains("segmentation"))
            txt << "  best combo: " << report.at("segmentation").at("best_combo").get<std::string>()
                << " | NDWI baseline iou "
                << csv_double(report.at("segmentation").at("ndwi_baseline_iou").get<double>(), 4)
                << "\n";
        txt << "\nnext-frame prediction (validation):\n";
        for (const auto& row : report.at("forecast"))
            txt << "  " << row.at("family").get<std::string>() << ": mse "
                << csv_double(row.at("mse").get<double>(), 6) << ", ssim "
                << csv_double(row.at("ssim").get<double>(), 4) << "\n";
        if (report.contains("forecast_persistence_mse"))
            txt << "  persistence mse: "
                << csv_double(report.at("forecast_persistence_mse").get<double>(), 6) << "\n";
        txt << "\nhydro series: " << report.at("hydro_series").size() << " scenes\n";
        written.push_back("summary.txt");
    }

    // fold the new files into the run manifest
    json manifest;
    const fs::path manifest_file = dir / "run_manifest.json";
    if (fs::exists(manifest_file)) {
        std::ifstream m(manifest_file);
        m >> manifest;
    }
    std::set<std::string> files;
    if (manifest.contains("files"))
        for (const auto& f : manifest.at("files")) files.insert(f.get<std::string>());
    for (const auto& f : written) files.insert("report/" + f);
    files.insert("run_manifest.json");
    manifest["files"] = std::vector<std::string>(files.begin(), files.end());
    std::ofstream m(manifest_file, std::ios::trunc);
    m << manifest.dump(2) << "\n";
}

}  // namespace hydrocube
