#include "hydrocube/hydro.hpp"

#include "hydrocube/synthgen.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace hydrocube;

namespace {

Mask disk_mask(int h, int w, double cr, double cc, double radius) {
    Mask m(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            m(r, c) = ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius) ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("surface area") {
    Mask empty = Mask::Constant(8, 8, 0);
    CHECK(surface_area(empty, 100.0) == 0.0);

    Mask three = empty;
    three(0, 0) = three(3, 4) = three(7, 7) = 1;
    CHECK(surface_area(three, 100.0) == 300.0);

    Mask disk = disk_mask(64, 64, 31.5, 31.5, 20.0);
    const double analytic = std::numbers::pi * 200.0 * 200.0;  // 20 px at 10 m
    CHECK(std::abs(surface_area(disk, 100.0) - analytic) / analytic < 0.05);
}

TEST_CASE("water volume") {
    DEMRaster dem;
    dem.pixel_area_m2 = 100.0;
    dem.heights = Plane<double>::Constant(8, 8, 2.0);

    Mask empty = Mask::Constant(8, 8, 0);
    CHECK(water_volume(empty, dem) == 0.0);

    Mask three = empty;
    three(1, 1) = three(2, 2) = three(3, 3) = 1;
    CHECK(water_volume(three, dem) == 600.0);  // exact

    Mask wrong_shape = Mask::Constant(4, 4, 1);
    CHECK_THROWS_AS(water_volume(wrong_shape, dem), std::invalid_argument);

    // paraboloid bowl integrated over its full disk: volume = pi*d*R^2/2
    const int n = 128;
    const double cr = (n - 1) / 2.0, radius = 30.0, depth = 12.0, px = 10.0;
    DEMRaster bowl;
    bowl.pixel_area_m2 = px * px;
    bowl.heights.resize(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const double rho2 = (r - cr) * (r - cr) + (c - cr) * (c - cr);
            bowl.heights(r, c) = std::max(0.0, depth * (1.0 - rho2 / (radius * radius)));
        }
    Mask full = disk_mask(n, n, cr, cr, radius);
    const double closed_form = std::numbers::pi * depth * (radius * px) * (radius * px) / 2.0;
    CHECK(std::abs(water_volume(full, bowl) - closed_form) / closed_form < 0.05);

    // doubling every height doubles the volume
    DEMRaster doubled = bowl;
    doubled.heights *= 2.0;
    CHECK(water_volume(full, doubled) == doctest::Approx(2.0 * water_volume(full, bowl)).epsilon(1e-12));
}

TEST_CASE("volume monotonicity and additivity") {
    std::mt19937_64 rng(61);
    std::bernoulli_distribution coin(0.4);
    DEMRaster dem;
    dem.pixel_area_m2 = 100.0;
    dem.heights.resize(16, 16);
    std::uniform_real_distribution<double> h(0.0, 5.0);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) dem.heights(r, c) = h(rng);

    Mask a(16, 16), b(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            a(r, c) = coin(rng) ? 1 : 0;
            b(r, c) = coin(rng) ? 1 : 0;
        }
    Mask sub = a;  // subset of a
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
            if (coin(rng)) sub(r, c) = 0;

    CHECK(surface_area(sub, 100.0) <= surface_area(a, 100.0));
    CHECK(water_volume(sub, dem) <= water_volume(a, dem));

    Mask both(16, 16), either(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            both(r, c) = a(r, c) && b(r, c);
            either(r, c) = a(r, c) || b(r, c);
        }
    CHECK(water_volume(either, dem) + water_volume(both, dem) ==
          doctest::Approx(water_volume(a, dem) + water_volume(b, dem)).epsilon(1e-12));
}

TEST_CASE("build_series") {
    DEMRaster dem;
    dem.pixel_area_m2 = 100.0;
    dem.heights = Plane<double>::Constant(8, 8, 1.5);

    Mask m = Mask::Constant(8, 8, 0);
    m(4, 4) = 1;
    std::vector<std::pair<Date, Mask>> dated = {{{2016, 1, 1}, m}, {{2016, 3, 1}, m}};
    auto series = build_series(dated, dem);
    REQUIRE(series.records.size() == 2);
    CHECK(series.records[0].area_m2 == series.records[1].area_m2);
    CHECK(series.records[0].pixels == 1);

    // shrinking disks give a strictly decreasing volume series
    DEMRaster dem16;
    dem16.pixel_area_m2 = 100.0;
    dem16.heights = Plane<double>::Constant(16, 16, 1.5);
    std::vector<std::pair<Date, Mask>> shrinking;
    Date d{2016, 1, 1};
    for (int i = 0; i < 5; ++i) {
        shrinking.push_back({d, disk_mask(16, 16, 7.5, 7.5, 6.5 - 1.0 * i)});
        d = d.add_months(2);
    }
    auto vseries = build_series(shrinking, dem16);
    for (std::size_t i = 1; i < vseries.records.size(); ++i)
        CHECK(vseries.records[i].volume_m3 < vseries.records[i - 1].volume_m3);

    std::vector<std::pair<Date, Mask>> dup = {{{2016, 1, 1}, m}, {{2016, 1, 1}, m}};
    CHECK_THROWS_AS(build_series(dup, dem), std::invalid_argument);
}

TEST_CASE("trend decomposition") {
    // pure linear series: slope recovered within 1%
    std::vector<double> linear;
    for (int t = 0; t < 24; ++t) linear.push_back(3.7 * t + 10.0);
    auto res = trend(linear, 6);
    CHECK(std::abs(res.slope_per_step - 3.7) / 3.7 < 0.01);

    // pure sinusoid: slope below the noise floor
    std::vector<double> sinus;
    const double amp = 40.0;
    for (int t = 0; t < 36; ++t) sinus.push_back(amp * std::sin(2 * std::numbers::pi * t / 6.0));
    auto sres = trend(sinus, 6);
    CHECK(std::abs(sres.slope_per_step) < 0.01 * amp / 6.0);

    // constant series: everything exactly zero (constant chosen to make the
    // moving-average arithmetic exact)
    std::vector<double> constant(18, 12.5);
    auto cres = trend(constant, 6);
    CHECK(cres.slope_per_step == 0.0);
    for (double s : cres.seasonal) CHECK(s == 0.0);
    for (std::size_t t = cres.valid_begin; t < cres.valid_end; ++t) CHECK(cres.residual[t] == 0.0);

    CHECK_THROWS_AS(trend(std::vector<double>(5, 1.0), 6), std::invalid_argument);
}

TEST_CASE("seasonal series autocorrelation peaks at the period") {
    SceneParams p;
    p.timesteps = 24;
    p.seasonal_amplitude_px = 5.0;
    p.seasonal_period = 6;
    std::vector<double> area;
    for (int t = 0; t < p.timesteps; ++t) area.push_back(analytic_truth(p, t).area_m2);

    const double mean = std::accumulate(area.begin(), area.end(), 0.0) / double(area.size());
    auto autocorr = [&](int lag) {
        double num = 0, den = 0;
        for (std::size_t t = 0; t + lag < area.size(); ++t)
            num += (area[t] - mean) * (area[t + lag] - mean);
        for (double v : area) den += (v - mean) * (v - mean);
        return num / den;
    };
    int best_lag = 1;
    for (int lag = 1; lag <= 12; ++lag)
        if (autocorr(lag) > autocorr(best_lag)) best_lag = lag;
    CHECK(best_lag == 6);
}

TEST_CASE("validation against ground truth") {
    DEMRaster dem;
    dem.pixel_area_m2 = 100.0;
    dem.heights = Plane<double>::Constant(4, 4, 1.0);
    Mask m = Mask::Constant(4, 4, 1);
    auto series = build_series({{{2016, 4, 10}, m}}, dem);  // area 1600

    auto rows = validate_against_ground(series, {{{2016, 4, 13}, 1600.0}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].difference_m2 == 0.0);

    rows = validate_against_ground(series, {{{2016, 4, 13}, 2000.0}});
    CHECK(rows[0].difference_m2 == 400.0);

    CHECK_THROWS_AS(validate_against_ground(series, {{{2017, 1, 1}, 100.0}}), std::invalid_argument);
}

TEST_CASE("olivo reference rows recompute exactly") {
    const auto& rows = olivo_reference_rows();
    REQUIRE(rows.size() == 10);
    CHECK(rows[0].ground_truth_m2 - rows[0].measured_m2 == 67486.0);

    // run the full fixture through the validation tabulation
    HydroSeries measured;
    for (const auto& r : rows)
        measured.records.push_back({r.date, r.measured_m2, 0.0, std::int64_t(r.measured_m2 / 100)});
    std::vector<std::pair<Date, double>> gt;
    for (const auto& r : rows) gt.push_back({r.date, r.ground_truth_m2});
    auto table = validate_against_ground(measured, gt);
    REQUIRE(table.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(table[i].measured_m2 == rows[i].measured_m2);
        CHECK(table[i].difference_m2 == rows[i].ground_truth_m2 - rows[i].measured_m2);
    }
}
