#pragma once

// Fully-labeled synthetic datacubes with analytically known surface area and
// water volume: a disk-shaped basin whose radius follows
// r(t) = r0 + a*sin(2*pi*t/period) + b*t inside a paraboloid depth bowl.
// Everything downstream (despeckling, segmentation, forecasting, hydrology)
// is validated against these closed forms.

#include "hydrocube/datacube.hpp"
#include "hydrocube/hydro.hpp"
#include "hydrocube/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace hydrocube {

struct SceneParams {
    int width = 64;
    int height = 64;
    int timesteps = 12;
    double center_row = -1;  // < 0: frame center
    double center_col = -1;
    double base_radius_px = 16.0;
    double seasonal_amplitude_px = 4.0;
    int seasonal_period = 6;  // timesteps; 6 = one year at two-month cadence
    double trend_px_per_step = 0.0;
    double bowl_depth_m = 10.0;
    int looks = 4;                  // speckle looks L
    double cloud_probability = 0.1; // per optical frame
    std::uint64_t seed = 0;
    double pixel_size_m = 10.0;
    Date start_date{2016, 7, 15};
    int cadence_months = 2;
    double lat = 41.0;
    double lon = 12.5;
    std::string processing_baseline = "04.00";

    double resolved_center_row() const { return center_row < 0 ? (height - 1) / 2.0 : center_row; }
    double resolved_center_col() const { return center_col < 0 ? (width - 1) / 2.0 : center_col; }

    /// Water must never vanish (min radius > 2 px) and the basin must stay
    /// inside the frame at its maximal extent.
    void validate() const;
};

double radius_at(const SceneParams& params, int t);
double max_radius(const SceneParams& params);

struct SyntheticScene {
    DataCube cube;                  // raw (unnormalized) bands, speckled SAR, clouded optical
    std::vector<Mask> truth_masks;  // one per timestep
    DEMRaster dem;                  // basin depth, meters
    std::vector<PlaneF> clean_vv;   // speckle-free SAR, linear power
    std::vector<PlaneF> clean_vh;
    std::vector<int> cloudy_frames;  // timestep indices with cloud occlusion
    SceneParams params;
};

SyntheticScene generate_scene(const SceneParams& params);

/// Multiplicative L-look speckle: noisy = clean * n, n ~ Gamma(L, 1/L)
/// (unit mean, variance 1/L).
template <class S>
Plane<S> apply_speckle(const Plane<S>& clean, int looks, std::mt19937_64& rng) {
    if (looks < 1) throw std::invalid_argument("apply_speckle: looks must be >= 1");
    if ((clean.array() < 0).any()) throw std::invalid_argument("apply_speckle: negative input");
    std::gamma_distribution<double> gamma(double(looks), 1.0 / double(looks));
    Plane<S> noisy(clean.rows(), clean.cols());
    for (Eigen::Index r = 0; r < clean.rows(); ++r)
        for (Eigen::Index c = 0; c < clean.cols(); ++c) noisy(r, c) = S(clean(r, c) * gamma(rng));
    return noisy;
}

template <class S>
std::pair<Plane<S>, Plane<S>> speckle_pair(const Plane<S>& clean, int looks, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return {apply_speckle(clean, looks, rng), clean};
}

struct AnalyticTruth {
    double area_m2 = 0;
    double volume_m3 = 0;
};

/// Closed forms for the disk-in-paraboloid basin: area = pi * R^2 and
/// volume = pi * d * R^2 * (1 - R^2 / (2 * Rmax^2)) in physical units.
AnalyticTruth analytic_truth(const SceneParams& params, int t);

/// Sidecar writers/readers used alongside the datacube container:
/// truth_masks.raw (uint8), dem.raw (f32), params.json.
void save_scene(const SyntheticScene& scene, const std::filesystem::path& dir);
SyntheticScene load_scene(const std::filesystem::path& dir);
SceneParams load_scene_params(const std::filesystem::path& dir);

}  // namespace hydrocube
