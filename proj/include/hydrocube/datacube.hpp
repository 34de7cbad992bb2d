#pragma once

// Spatiotemporal datacube: one geolocation's full temporal stack of
// co-registered rasters, axes (time, height, width, band), band-interleaved
// in memory and on disk. The on-disk container is a directory holding
// manifest.json plus one little-endian float32 raster file per timestep.

#include "hydrocube/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hydrocube {

/// Canonical band set. Ordinals may be permuted per cube; names are unique.
struct BandIndex {
    int ordinal = 0;  // 0..7
    std::string name;
};

inline const std::vector<std::string>& canonical_band_names() {
    static const std::vector<std::string> names = {"VV",  "VH",    "R",     "G",
                                                   "B",   "NIR",   "SLOPE", "ELEVATION"};
    return names;
}
constexpr int kBandCount = 8;

/// Per-band normalization scheme. FixedRange maps [lo, hi] -> [0, 1] with
/// clamping; Percentile picks lo/hi from per-cube percentile ranks;
/// DbFixedRange converts to dB (10*log10) first, then maps a fixed dB range.
struct BandScheme {
    enum class Kind { FixedRange, Percentile, DbFixedRange };
    Kind kind = Kind::FixedRange;
    double lo = 0.0;  // FixedRange/DbFixedRange: lower bound; Percentile: rank in [0,100)
    double hi = 1.0;
    void validate() const;
};

using NormalizationSpec = std::map<std::string, BandScheme>;

/// Defaults: optical reflectance DN (0, 10000); SAR backscatter in dB
/// (-30, 0); slope (0, 90) degrees; elevation per-cube percentile (2, 98).
NormalizationSpec default_normalization();

struct CubeManifest {
    double lat = 0.0;
    double lon = 0.0;
    std::vector<Date> timestamps;
    double pixel_size_m = 10.0;
    int width = 0;
    int height = 0;
    std::vector<std::string> bands;  // storage order
    std::string dtype = "f32le";
    std::string processing_baseline = "04.00";
    std::vector<Date> gaps;  // nominal acquisition dates with no sample
    /// Realized normalization per band, recorded for reversibility.
    std::optional<NormalizationSpec> normalization;

    int band_count() const { return static_cast<int>(bands.size()); }
    int time_count() const { return static_cast<int>(timestamps.size()); }
    int band_ordinal(const std::string& name) const;  // -1 if absent

    /// Throws on structural violations: wrong band set, non-increasing
    /// timestamps, non-positive dimensions, unsupported dtype.
    void validate() const;
    /// True when consecutive timestamps sit within tolerance_days of the
    /// nominal two-month cadence (gaps listed in `gaps` excuse a step).
    bool cadence_ok(int tolerance_days = 20) const;
};

class DataCube {
  public:
    CubeManifest manifest;
    /// Flat (T, H, W, B) array, band fastest.
    std::vector<float> values;

    static DataCube allocate(CubeManifest m);

    std::size_t expected_size() const {
        return std::size_t(manifest.time_count()) * manifest.height * manifest.width *
               manifest.band_count();
    }
    float& at(int t, int row, int col, int band);
    float at(int t, int row, int col, int band) const;

    /// Copy of one (timestep, band) raster as a dense plane.
    PlaneF band_plane(int t, int band) const;
    PlaneF band_plane_named(int t, const std::string& band_name) const;
    void set_band_plane(int t, int band, const PlaneF& plane);

    bool all_finite() const;
    /// Shape consistency plus the static-band invariant (SLOPE/ELEVATION
    /// identical across time) when those bands are present.
    void validate() const;
};

/// Directory container: <path>/manifest.json + <path>/t_<index>.raw.
DataCube load_cube(const std::filesystem::path& path);
void save_cube(const DataCube& cube, const std::filesystem::path& path);

/// Raw raster helpers shared with the sidecar files.
void write_raw_f32(const std::filesystem::path& file, const float* data, std::size_t count);
std::vector<float> read_raw_f32(const std::filesystem::path& file, std::size_t expected_count);

/// True when `baseline` parses as major.minor and is >= 04.00.
bool baseline_requires_offset(const std::string& baseline);

/// Optical DN harmonization: products at or above processing baseline 04.00
/// carry a +1000 offset which is removed here (floored at zero).
template <class S>
Plane<S> harmonize_dn(const Plane<S>& raster, const std::string& baseline) {
    if (!baseline_requires_offset(baseline)) return raster;
    return raster.array().max(S(1000)).matrix() - Plane<S>::Constant(raster.rows(), raster.cols(), S(1000));
}

enum class ResampleMethod { Nearest, Bilinear };

/// Upsample a coarser-resolution raster to the 10 m grid. Supported source
/// resolutions: 10, 20, 60 m. Pixel-center convention with edge clamping.
template <class S>
Plane<S> resample_band(const Plane<S>& raster, double src_res_m, double dst_res_m,
                       ResampleMethod method = ResampleMethod::Bilinear) {
    if (dst_res_m != 10.0 || (src_res_m != 10.0 && src_res_m != 20.0 && src_res_m != 60.0))
        throw std::invalid_argument("resample_band: unsupported resolution pair");
    const int factor = static_cast<int>(src_res_m / dst_res_m);
    if (factor == 1) return raster;
    const Eigen::Index h = raster.rows(), w = raster.cols();
    Plane<S> out(h * factor, w * factor);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double sr = (r + 0.5) / factor - 0.5;
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            const double sc = (c + 0.5) / factor - 0.5;
            if (method == ResampleMethod::Nearest) {
                const Eigen::Index rr = std::clamp<Eigen::Index>(Eigen::Index(std::floor(sr + 0.5)), 0, h - 1);
                const Eigen::Index cc = std::clamp<Eigen::Index>(Eigen::Index(std::floor(sc + 0.5)), 0, w - 1);
                out(r, c) = raster(rr, cc);
            } else {
                const double fr = std::clamp(sr, 0.0, double(h - 1));
                const double fc = std::clamp(sc, 0.0, double(w - 1));
                const Eigen::Index r0 = Eigen::Index(std::floor(fr));
                const Eigen::Index c0 = Eigen::Index(std::floor(fc));
                const Eigen::Index r1 = std::min<Eigen::Index>(r0 + 1, h - 1);
                const Eigen::Index c1 = std::min<Eigen::Index>(c0 + 1, w - 1);
                const double ar = fr - double(r0), ac = fc - double(c0);
                out(r, c) = S((1 - ar) * (1 - ac) * raster(r0, c0) + (1 - ar) * ac * raster(r0, c1) +
                              ar * (1 - ac) * raster(r1, c0) + ar * ac * raster(r1, c1));
            }
        }
    }
    return out;
}

/// Map every band into [0, 1] per the scheme; the realized scheme (with
/// percentile ranks resolved to values) is recorded in the output manifest.
DataCube normalize(const DataCube& cube, const NormalizationSpec& spec);

/// Linear-interpolation percentile (rank = p/100 * (n-1)) over all values.
double percentile(std::vector<float> values, double p);

struct PatchSeries {
    double parent_lat = 0.0;
    double parent_lon = 0.0;
    int origin_row = 0;
    int origin_col = 0;
    int size = 0;
    DataCube patch;  // (T, size, size, B) copy with adjusted manifest
};

PatchSeries extract_patch_series(const DataCube& cube, int origin_row, int origin_col, int size);

/// Deterministic split of locations into train/validation index sets. Cubes
/// sharing a (lat, lon) location always land in the same partition.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};
SplitIndices temporal_split(const std::vector<std::pair<double, double>>& locations, double ratio,
                            std::uint64_t seed);

}  // namespace hydrocube
