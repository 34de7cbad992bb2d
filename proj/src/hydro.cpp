#include "hydrocube/hydro.hpp"

#include "hydrocube/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace hydrocube {

void DEMRaster::validate() const {
    if (pixel_area_m2 <= 0) throw std::invalid_argument("DEMRaster: pixel area must be > 0");
    if ((heights.array() < 0).any()) throw std::invalid_argument("DEMRaster: negative depth");
}

double surface_area(const Mask& mask, double pixel_area_m2) {
    if (pixel_area_m2 <= 0) throw std::invalid_argument("surface_area: pixel area must be > 0");
    check_binary(mask, "surface_area");
    std::int64_t count = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) count += mask.reshaped()(i);
    return double(count) * pixel_area_m2;
}

double water_volume(const Mask& mask, const DEMRaster& dem) {
    if (mask.rows() != dem.heights.rows() || mask.cols() != dem.heights.cols())
        throw std::invalid_argument("water_volume: mask/DEM shape mismatch");
    check_binary(mask, "water_volume");
    double v = 0;
    for (Eigen::Index r = 0; r < mask.rows(); ++r)
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
            if (mask(r, c)) v += dem.heights(r, c) * dem.pixel_area_m2;
    return v;
}

HydroSeries build_series(const std::vector<std::pair<Date, Mask>>& dated_masks,
                         const DEMRaster& dem) {
    HydroSeries series;
    Date prev;
    bool have_prev = false;
    for (const auto& [date, mask] : dated_masks) {
        if (have_prev && !(prev < date))
            throw std::invalid_argument("build_series: dates must be strictly increasing");
        prev = date;
        have_prev = true;
        HydroRecord rec;
        rec.date = date;
        rec.area_m2 = surface_area(mask, dem.pixel_area_m2);
        rec.volume_m3 = water_volume(mask, dem);
        rec.pixels = std::llround(rec.area_m2 / dem.pixel_area_m2);
        series.records.push_back(rec);
    }
    return series;
}

TrendResult trend(const std::vector<double>& series, int seasonal_period) {
    const std::size_t n = series.size();
    const int m = seasonal_period;
    if (m < 2) throw std::invalid_argument("trend: seasonal period must be >= 2");
    if (n < 2 * static_cast<std::size_t>(m))
        throw std::invalid_argument("trend: series shorter than two seasonal periods");

    TrendResult out;
    out.trend.assign(n, 0.0);
    out.residual.assign(n, 0.0);
    out.seasonal.assign(m, 0.0);

    // Centered moving average; for even m the classical 2xm variant with
    // half weights at both ends.
    const bool even = (m % 2 == 0);
    const std::size_t half = even ? static_cast<std::size_t>(m / 2) : static_cast<std::size_t>((m - 1) / 2);
    out.valid_begin = half;
    out.valid_end = n - half;
    for (std::size_t t = out.valid_begin; t < out.valid_end; ++t) {
        if (even) {
            double s = 0.5 * series[t - half] + 0.5 * series[t + half];
            for (std::size_t k = t - half + 1; k < t + half; ++k) s += series[k];
            out.trend[t] = s / double(m);
        } else {
            double s = 0;
            for (std::size_t k = t - half; k <= t + half; ++k) s += series[k];
            out.trend[t] = s / double(m);
        }
    }

    // Least-squares line over the interior trend points.
    const double count = double(out.valid_end - out.valid_begin);
    double mean_t = 0, mean_y = 0;
    for (std::size_t t = out.valid_begin; t < out.valid_end; ++t) {
        mean_t += double(t);
        mean_y += out.trend[t];
    }
    mean_t /= count;
    mean_y /= count;
    double sxx = 0, sxy = 0;
    for (std::size_t t = out.valid_begin; t < out.valid_end; ++t) {
        sxx += (double(t) - mean_t) * (double(t) - mean_t);
        sxy += (double(t) - mean_t) * (out.trend[t] - mean_y);
    }
    out.slope_per_step = (sxx > 0) ? sxy / sxx : 0.0;

    // Mean detrended value per phase, then centered so phases sum to zero.
    std::vector<double> phase_sum(m, 0.0);
    std::vector<int> phase_count(m, 0);
    for (std::size_t t = out.valid_begin; t < out.valid_end; ++t) {
        phase_sum[t % m] += series[t] - out.trend[t];
        phase_count[t % m] += 1;
    }
    for (int p = 0; p < m; ++p)
        out.seasonal[p] = phase_count[p] ? phase_sum[p] / double(phase_count[p]) : 0.0;
    const double season_mean =
        std::accumulate(out.seasonal.begin(), out.seasonal.end(), 0.0) / double(m);
    for (int p = 0; p < m; ++p) out.seasonal[p] -= season_mean;

    for (std::size_t t = out.valid_begin; t < out.valid_end; ++t)
        out.residual[t] = series[t] - out.trend[t] - out.seasonal[t % m];
    return out;
}

std::vector<ValidationRow> validate_against_ground(
    const HydroSeries& series, const std::vector<std::pair<Date, double>>& ground_truth,
    int tolerance_days) {
    std::vector<ValidationRow> rows;
    for (const auto& [gt_date, gt_area] : ground_truth) {
        const HydroRecord* best = nullptr;
        std::int64_t best_dist = tolerance_days + 1;
        for (const auto& rec : series.records) {
            const std::int64_t dist = std::llabs(days_between(gt_date, rec.date));
            if (dist < best_dist) {
                best_dist = dist;
                best = &rec;
            }
        }
        if (!best)
            throw std::invalid_argument("validate_against_ground: no series record within " +
                                        std::to_string(tolerance_days) + " days of " +
                                        gt_date.to_iso());
        rows.push_back({gt_date, gt_area, best->area_m2, gt_area - best->area_m2});
    }
    return rows;
}

const std::vector<OlivoReferenceRow>& olivo_reference_rows() {
    static const std::vector<OlivoReferenceRow> rows = {
        {{2016, 4, 13}, 512700, 445214}, {{2016, 7, 21}, 398100, 352533},
        {{2016, 10, 10}, 361180, 303055}, {{2017, 3, 19}, 397320, 342156},
        {{2017, 7, 7}, 354940, 295035},  {{2017, 9, 15}, 303440, 260546},
        {{2018, 1, 18}, 377300, 329973}, {{2018, 3, 29}, 409125, 345726},
        {{2018, 7, 7}, 401480, 344057},  {{2018, 9, 5}, 393680, 335012},
    };
    return rows;
}

}  // namespace hydrocube
