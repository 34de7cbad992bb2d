#pragma once

// Surface-area and water-volume bookkeeping from binary masks and a basin
// depth raster, dated series construction, additive trend decomposition, and
// comparison against externally supplied ground-truth areas.

#include "hydrocube/types.hpp"

#include <utility>
#include <vector>

namespace hydrocube {

/// Per-pixel basin depth in meters at full extent; grid aligned with masks.
struct DEMRaster {
    Plane<double> heights;
    double pixel_area_m2 = 100.0;
    void validate() const;
};

/// area = pixel count * pixel area; volume from the depth raster restricted
/// to the mask.
double surface_area(const Mask& mask, double pixel_area_m2);
double water_volume(const Mask& mask, const DEMRaster& dem);

struct HydroRecord {
    Date date;
    double area_m2 = 0;
    double volume_m3 = 0;
    std::int64_t pixels = 0;
};

struct HydroSeries {
    std::vector<HydroRecord> records;
};

HydroSeries build_series(const std::vector<std::pair<Date, Mask>>& dated_masks,
                         const DEMRaster& dem);

/// Classical additive decomposition: centered moving average (2xm for even
/// periods) gives the trend over the interior, a least-squares line over that
/// trend gives the slope, per-phase means of the detrended interior give the
/// (mean-centered) seasonal component, and the remainder is the residual.
struct TrendResult {
    double slope_per_step = 0;
    std::vector<double> trend;       // size n; valid on [valid_begin, valid_end)
    std::vector<double> seasonal;    // one entry per phase, mean-centered
    std::vector<double> residual;    // size n; valid on [valid_begin, valid_end)
    std::size_t valid_begin = 0;
    std::size_t valid_end = 0;
};

TrendResult trend(const std::vector<double>& series, int seasonal_period);

struct ValidationRow {
    Date date;
    double ground_truth_m2 = 0;
    double measured_m2 = 0;
    double difference_m2 = 0;  // ground truth minus measured
};

/// Match each ground-truth row to the series record nearest in time (within
/// the day tolerance) and tabulate the area differences.
std::vector<ValidationRow> validate_against_ground(
    const HydroSeries& series, const std::vector<std::pair<Date, double>>& ground_truth,
    int tolerance_days = 7);

/// Published ground-truth vs satellite-measured surface areas for the Olivo
/// dam reservoir, 2016-2018. Used as a fixed regression reference for the
/// validation tabulation.
struct OlivoReferenceRow {
    Date date;
    double ground_truth_m2;
    double measured_m2;
};
const std::vector<OlivoReferenceRow>& olivo_reference_rows();

}  // namespace hydrocube
