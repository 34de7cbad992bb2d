#include "hydrocube/synthgen.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

namespace hydrocube {

using json = nlohmann::ordered_json;

namespace {

constexpr double kRefElevationM = 100.0;

// Class signatures, linear power for SAR and surface reflectance for optics.
constexpr double kWaterVV = 0.02, kLandVV = 0.20;
constexpr double kWaterVH = 0.008, kLandVH = 0.08;
constexpr double kWaterOptical[4] = {0.06, 0.15, 0.18, 0.02};  // R,G,B,NIR
constexpr double kLandOptical[4] = {0.25, 0.18, 0.15, 0.42};
constexpr double kCloudReflectance = 0.9;
constexpr double kOpticalNoiseSigma = 0.01;

}  // namespace

double radius_at(const SceneParams& p, int t) {
    if (t < 0 || t >= p.timesteps) throw std::invalid_argument("radius_at: timestep out of range");
    return p.base_radius_px +
           p.seasonal_amplitude_px * std::sin(2.0 * std::numbers::pi * t / p.seasonal_period) +
           p.trend_px_per_step * t;
}

double max_radius(const SceneParams& p) {
    double rmax = 0;
    for (int t = 0; t < p.timesteps; ++t) rmax = std::max(rmax, radius_at(p, t));
    return rmax;
}

void SceneParams::validate() const {
    if (width < 16 || height < 16) throw std::invalid_argument("SceneParams: frame too small");
    if (timesteps < 1) throw std::invalid_argument("SceneParams: need at least one timestep");
    if (seasonal_period < 2) throw std::invalid_argument("SceneParams: seasonal period must be >= 2");
    if (looks < 1) throw std::invalid_argument("SceneParams: looks must be >= 1");
    if (cloud_probability < 0 || cloud_probability > 1)
        throw std::invalid_argument("SceneParams: cloud probability must be in [0,1]");
    if (bowl_depth_m <= 0) throw std::invalid_argument("SceneParams: bowl depth must be > 0");
    if (pixel_size_m <= 0) throw std::invalid_argument("SceneParams: pixel size must be > 0");
    for (int t = 0; t < timesteps; ++t)
        if (radius_at(*this, t) <= 2.0)
            throw std::invalid_argument("SceneParams: water vanishes (radius <= 2 px) at t=" +
                                        std::to_string(t));
    const double rmax = max_radius(*this);
    const double cr = resolved_center_row(), cc = resolved_center_col();
    if (cr - rmax < 1 || cc - rmax < 1 || cr + rmax > height - 2 || cc + rmax > width - 2)
        throw std::invalid_argument("SceneParams: basin leaves the frame at maximal extent");
}

AnalyticTruth analytic_truth(const SceneParams& p, int t) {
    const double r_m = radius_at(p, t) * p.pixel_size_m;
    const double rmax_m = max_radius(p) * p.pixel_size_m;
    AnalyticTruth out;
    out.area_m2 = std::numbers::pi * r_m * r_m;
    out.volume_m3 = rmax_m > 0 ? std::numbers::pi * p.bowl_depth_m * r_m * r_m *
                                     (1.0 - r_m * r_m / (2.0 * rmax_m * rmax_m))
                               : 0.0;
    return out;
}

SyntheticScene generate_scene(const SceneParams& params) {
    params.validate();
    const int W = params.width, H = params.height, T = params.timesteps;
    const double cr = params.resolved_center_row(), cc = params.resolved_center_col();
    const double rmax = max_radius(params);

    SyntheticScene scene;
    scene.params = params;

    // DEM: paraboloid bowl, zero depth at the shoreline of the maximal basin.
    scene.dem.pixel_area_m2 = params.pixel_size_m * params.pixel_size_m;
    scene.dem.heights.resize(H, W);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const double rho2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
            scene.dem.heights(r, c) =
                std::max(0.0, params.bowl_depth_m * (1.0 - rho2 / (rmax * rmax)));
        }

    // Static layers shared by every timestep.
    PlaneF elevation(H, W), slope(H, W);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) elevation(r, c) = float(kRefElevationM - scene.dem.heights(r, c));
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const int r0 = std::max(r - 1, 0), r1 = std::min(r + 1, H - 1);
            const int c0 = std::max(c - 1, 0), c1 = std::min(c + 1, W - 1);
            const double dzdy = (elevation(r1, c) - elevation(r0, c)) / ((r1 - r0) * params.pixel_size_m);
            const double dzdx = (elevation(r, c1) - elevation(r, c0)) / ((c1 - c0) * params.pixel_size_m);
            slope(r, c) = float(std::atan(std::hypot(dzdx, dzdy)) * 180.0 / std::numbers::pi);
        }

    CubeManifest manifest;
    manifest.lat = params.lat;
    manifest.lon = params.lon;
    manifest.pixel_size_m = params.pixel_size_m;
    manifest.width = W;
    manifest.height = H;
    manifest.bands = canonical_band_names();
    manifest.processing_baseline = params.processing_baseline;
    for (int t = 0; t < T; ++t)
        manifest.timestamps.push_back(params.start_date.add_months(params.cadence_months * t));
    scene.cube = DataCube::allocate(manifest);

    const double dn_offset = baseline_requires_offset(params.processing_baseline) ? 1000.0 : 0.0;
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> optical_noise(0.0, kOpticalNoiseSigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int t = 0; t < T; ++t) {
        const double rad = radius_at(params, t);

        Mask mask(H, W);
        PlaneF clean_vv(H, W), clean_vh(H, W);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const double rho2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
                const bool water = rho2 <= rad * rad;
                mask(r, c) = water ? 1 : 0;
                // Mild deterministic texture on land so the despeckler has
                // structure to preserve.
                const double tex =
                    0.25 * std::sin(2.0 * std::numbers::pi * c / W) * std::cos(2.0 * std::numbers::pi * r / H);
                clean_vv(r, c) = float(water ? kWaterVV : kLandVV * (1.0 + tex));
                clean_vh(r, c) = float(water ? kWaterVH : kLandVH * (1.0 + tex));
            }
        scene.truth_masks.push_back(mask);

        const PlaneF noisy_vv = apply_speckle(clean_vv, params.looks, rng);
        const PlaneF noisy_vh = apply_speckle(clean_vh, params.looks, rng);
        scene.clean_vv.push_back(clean_vv);
        scene.clean_vh.push_back(clean_vh);

        // Optical reflectance -> DN, with per-pixel noise.
        PlaneF optical[4];
        for (int b = 0; b < 4; ++b) optical[b].resize(H, W);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c)
                for (int b = 0; b < 4; ++b) {
                    const double refl = (mask(r, c) ? kWaterOptical[b] : kLandOptical[b]) + optical_noise(rng);
                    optical[b](r, c) = float(std::max(0.0, refl) * 10000.0 + dn_offset);
                }

        // Cloud occlusion: bright blobs over all four optical bands.
        if (unit(rng) < params.cloud_probability) {
            scene.cloudy_frames.push_back(t);
            const int blobs = 1 + int(rng() % 2);
            for (int i = 0; i < blobs; ++i) {
                const double br = unit(rng) * (H - 1);
                const double bc = unit(rng) * (W - 1);
                const double brad = 4.0 + unit(rng) * 8.0;
                for (int r = 0; r < H; ++r)
                    for (int c = 0; c < W; ++c)
                        if ((r - br) * (r - br) + (c - bc) * (c - bc) <= brad * brad)
                            for (int b = 0; b < 4; ++b)
                                optical[b](r, c) = float(kCloudReflectance * 10000.0 + dn_offset);
            }
        }

        scene.cube.set_band_plane(t, 0, noisy_vv);
        scene.cube.set_band_plane(t, 1, noisy_vh);
        for (int b = 0; b < 4; ++b) scene.cube.set_band_plane(t, 2 + b, optical[b]);
        scene.cube.set_band_plane(t, 6, slope);
        scene.cube.set_band_plane(t, 7, elevation);
    }
    return scene;
}

// --------------------------------------------------------------------------
// Sidecar IO
// --------------------------------------------------------------------------

namespace {

json params_to_json(const SceneParams& p) {
    json j;
    j["width"] = p.width;
    j["height"] = p.height;
    j["timesteps"] = p.timesteps;
    j["center_row"] = p.center_row;
    j["center_col"] = p.center_col;
    j["base_radius_px"] = p.base_radius_px;
    j["seasonal_amplitude_px"] = p.seasonal_amplitude_px;
    j["seasonal_period"] = p.seasonal_period;
    j["trend_px_per_step"] = p.trend_px_per_step;
    j["bowl_depth_m"] = p.bowl_depth_m;
    j["looks"] = p.looks;
    j["cloud_probability"] = p.cloud_probability;
    j["seed"] = p.seed;
    j["pixel_size_m"] = p.pixel_size_m;
    j["start_date"] = p.start_date.to_iso();
    j["cadence_months"] = p.cadence_months;
    j["lat"] = p.lat;
    j["lon"] = p.lon;
    j["processing_baseline"] = p.processing_baseline;
    return j;
}

SceneParams params_from_json(const json& j) {
    SceneParams p;
    p.width = j.at("width").get<int>();
    p.height = j.at("height").get<int>();
    p.timesteps = j.at("timesteps").get<int>();
    p.center_row = j.at("center_row").get<double>();
    p.center_col = j.at("center_col").get<double>();
    p.base_radius_px = j.at("base_radius_px").get<double>();
    p.seasonal_amplitude_px = j.at("seasonal_amplitude_px").get<double>();
    p.seasonal_period = j.at("seasonal_period").get<int>();
    p.trend_px_per_step = j.at("trend_px_per_step").get<double>();
    p.bowl_depth_m = j.at("bowl_depth_m").get<double>();
    p.looks = j.at("looks").get<int>();
    p.cloud_probability = j.at("cloud_probability").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.pixel_size_m = j.at("pixel_size_m").get<double>();
    p.start_date = Date::parse_iso(j.at("start_date").get<std::string>());
    p.cadence_months = j.at("cadence_months").get<int>();
    p.lat = j.at("lat").get<double>();
    p.lon = j.at("lon").get<double>();
    p.processing_baseline = j.at("processing_baseline").get<std::string>();
    return p;
}

}  // namespace

void save_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
    save_cube(scene.cube, dir);
    const int H = scene.cube.manifest.height, W = scene.cube.manifest.width;
    const int T = scene.cube.manifest.time_count();

    std::vector<std::uint8_t> masks(std::size_t(T) * H * W);
    for (int t = 0; t < T; ++t)
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c)
                masks[std::size_t((t * H + r)) * W + c] = scene.truth_masks[t](r, c);
    std::ofstream mf(dir / "truth_masks.raw", std::ios::binary | std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write truth_masks.raw");
    mf.write(reinterpret_cast<const char*>(masks.data()), std::streamsize(masks.size()));

    std::vector<float> dem(std::size_t(H) * W);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) dem[std::size_t(r) * W + c] = float(scene.dem.heights(r, c));
    write_raw_f32(dir / "dem.raw", dem.data(), dem.size());

    json j = params_to_json(scene.params);
    j["cloudy_frames"] = scene.cloudy_frames;
    std::ofstream pf(dir / "params.json", std::ios::trunc);
    if (!pf) throw std::runtime_error("cannot write params.json");
    pf << j.dump(2) << "\n";
}

SceneParams load_scene_params(const std::filesystem::path& dir) {
    std::ifstream in(dir / "params.json");
    if (!in) throw std::runtime_error("missing params.json in " + dir.string());
    json j;
    in >> j;
    return params_from_json(j);
}

SyntheticScene load_scene(const std::filesystem::path& dir) {
    SyntheticScene scene;
    scene.params = load_scene_params(dir);
    scene.cube = load_cube(dir);
    const int H = scene.cube.manifest.height, W = scene.cube.manifest.width;
    const int T = scene.cube.manifest.time_count();

    std::ifstream mf(dir / "truth_masks.raw", std::ios::binary | std::ios::ate);
    if (!mf) throw std::runtime_error("missing truth_masks.raw in " + dir.string());
    if (std::size_t(mf.tellg()) != std::size_t(T) * H * W)
        throw std::runtime_error("truth_masks.raw size mismatch in " + dir.string());
    mf.seekg(0);
    std::vector<std::uint8_t> masks(std::size_t(T) * H * W);
    mf.read(reinterpret_cast<char*>(masks.data()), std::streamsize(masks.size()));
    for (int t = 0; t < T; ++t) {
        Mask m(H, W);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) m(r, c) = masks[std::size_t((t * H + r)) * W + c];
        scene.truth_masks.push_back(m);
    }

    const auto dem = read_raw_f32(dir / "dem.raw", std::size_t(H) * W);
    scene.dem.pixel_area_m2 = scene.params.pixel_size_m * scene.params.pixel_size_m;
    scene.dem.heights.resize(H, W);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) scene.dem.heights(r, c) = dem[std::size_t(r) * W + c];

    {
        std::ifstream in(dir / "params.json");
        json j;
        in >> j;
        if (j.contains("cloudy_frames"))
            scene.cloudy_frames = j.at("cloudy_frames").get<std::vector<int>>();
    }

    // Clean SAR is not persisted; it is a deterministic function of the
    // parameters, so rebuild it.
    SyntheticScene regen = generate_scene(scene.params);
    scene.clean_vv = std::move(regen.clean_vv);
    scene.clean_vh = std::move(regen.clean_vh);
    return scene;
}

}  // namespace hydrocube
