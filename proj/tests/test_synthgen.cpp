#include "hydrocube/synthgen.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace hydrocube;
namespace fs = std::filesystem;

TEST_CASE("constant-radius scenes have identical masks") {
    SceneParams p;
    p.seasonal_amplitude_px = 0.0;
    p.trend_px_per_step = 0.0;
    p.timesteps = 5;
    auto scene = generate_scene(p);
    for (int t = 1; t < 5; ++t) CHECK(scene.truth_masks[t] == scene.truth_masks[0]);
}

TEST_CASE("shrinking basin has non-increasing pixel counts and nested masks") {
    SceneParams p;
    p.seasonal_amplitude_px = 0.0;
    p.trend_px_per_step = -0.8;
    p.timesteps = 10;
    p.base_radius_px = 14.0;
    auto scene = generate_scene(p);
    auto count = [](const Mask& m) {
        int n = 0;
        for (Eigen::Index i = 0; i < m.size(); ++i) n += m.reshaped()(i);
        return n;
    };
    for (int t = 1; t < 10; ++t) {
        CHECK(count(scene.truth_masks[t]) <= count(scene.truth_masks[t - 1]));
        // nested: every later water pixel was already water
        for (int r = 0; r < p.height; ++r)
            for (int c = 0; c < p.width; ++c)
                if (scene.truth_masks[t](r, c)) CHECK(scene.truth_masks[t - 1](r, c));
    }
}

TEST_CASE("rasterized mask area tracks the analytic disk area") {
    SceneParams p;
    p.width = p.height = 80;
    p.base_radius_px = 20.0;
    p.seasonal_amplitude_px = 6.0;
    p.timesteps = 12;
    auto scene = generate_scene(p);
    for (int t = 0; t < p.timesteps; ++t) {
        if (radius_at(p, t) < 10.0) continue;
        double pixels = 0;
        for (Eigen::Index i = 0; i < scene.truth_masks[t].size(); ++i)
            pixels += scene.truth_masks[t].reshaped()(i);
        const double analytic = analytic_truth(p, t).area_m2;
        const double measured = pixels * p.pixel_size_m * p.pixel_size_m;
        CHECK(std::abs(measured - analytic) / analytic < 0.05);
    }
}

TEST_CASE("speckle statistics") {
    // Monte-Carlo oracle: multiplicative gamma noise has unit mean and
    // variance 1/L
    const int n = 100000;
    PlaneF clean = PlaneF::Constant(1, n, 2.0f);
    auto [noisy, echoed] = speckle_pair(clean, 4, 12345);
    CHECK(echoed == clean);

    double mean = 0;
    for (int i = 0; i < n; ++i) mean += noisy(0, i);
    mean /= n;
    CHECK(std::abs(mean - 2.0) / 2.0 < 0.01);

    double var = 0;
    for (int i = 0; i < n; ++i) {
        const double ratio = noisy(0, i) / 2.0;
        var += (ratio - mean / 2.0) * (ratio - mean / 2.0);
    }
    var /= (n - 1);
    CHECK(std::abs(var - 0.25) / 0.25 < 0.05);

    // L -> infinity limit: noise disappears
    auto [calm, _] = speckle_pair(clean, 1000000, 99);
    for (int i = 0; i < 100; ++i) CHECK(std::abs(calm(0, i) - 2.0) / 2.0 < 0.005);

    CHECK_THROWS_AS(speckle_pair(clean, 0, 1), std::invalid_argument);
}

TEST_CASE("analytic truth closed forms") {
    SceneParams p;
    p.base_radius_px = 20.0;
    p.seasonal_amplitude_px = 0.0;
    p.bowl_depth_m = 8.0;

    // boundary case r = 0 (bypasses scene validation; the formula itself)
    SceneParams flat = p;
    flat.base_radius_px = 0.0;
    auto zero = analytic_truth(flat, 0);
    CHECK(zero.area_m2 == 0.0);
    CHECK(zero.volume_m3 == 0.0);

    // full-disk volume equals pi*d*R^2/2 and matches 2-D quadrature
    auto truth = analytic_truth(p, 0);
    const double R = 20.0 * 10.0;
    CHECK(truth.volume_m3 == doctest::Approx(std::numbers::pi * 8.0 * R * R / 2.0).epsilon(1e-12));

    const int steps = 4000;
    const double rmax = max_radius(p) * p.pixel_size_m;
    double quad = 0;
    const double dr = R / steps;
    for (int i = 0; i < steps; ++i) {
        const double rho = (i + 0.5) * dr;
        quad += 8.0 * (1.0 - rho * rho / (rmax * rmax)) * 2.0 * std::numbers::pi * rho * dr;
    }
    CHECK(truth.volume_m3 == doctest::Approx(quad).epsilon(1e-5));

    // doubling depth doubles volume, area unchanged
    SceneParams deep = p;
    deep.bowl_depth_m = 16.0;
    auto t2 = analytic_truth(deep, 0);
    CHECK(t2.volume_m3 == doctest::Approx(2.0 * truth.volume_m3).epsilon(1e-12));
    CHECK(t2.area_m2 == truth.area_m2);

    CHECK_THROWS_AS(analytic_truth(p, 99), std::invalid_argument);
}

TEST_CASE("scene determinism and class separability") {
    SceneParams p;
    p.seed = 77;
    p.cloud_probability = 0.5;
    auto a = generate_scene(p);
    auto b = generate_scene(p);
    CHECK(a.cube.values == b.cube.values);
    CHECK(a.cloudy_frames == b.cloudy_frames);

    // water strictly darker than land in clean VV, every frame
    for (int t = 0; t < p.timesteps; ++t) {
        double water_sum = 0, land_sum = 0;
        int water_n = 0, land_n = 0;
        for (int r = 0; r < p.height; ++r)
            for (int c = 0; c < p.width; ++c) {
                if (a.truth_masks[t](r, c)) {
                    water_sum += a.clean_vv[t](r, c);
                    ++water_n;
                } else {
                    land_sum += a.clean_vv[t](r, c);
                    ++land_n;
                }
            }
        CHECK(water_sum / water_n < land_sum / land_n);
    }
}

TEST_CASE("scene validation rejects bad parameters") {
    SceneParams p;
    p.base_radius_px = 2.0;  // water vanishes
    CHECK_THROWS_AS(generate_scene(p), std::invalid_argument);

    SceneParams q;
    q.base_radius_px = 40.0;  // leaves a 64x64 frame
    CHECK_THROWS_AS(generate_scene(q), std::invalid_argument);

    SceneParams l;
    l.looks = 0;
    CHECK_THROWS_AS(generate_scene(l), std::invalid_argument);
}

TEST_CASE("scene sidecar round trip") {
    const fs::path dir = fs::temp_directory_path() / "hydrocube_test_scene";
    fs::remove_all(dir);
    SceneParams p;
    p.seed = 5;
    p.timesteps = 4;
    auto scene = generate_scene(p);
    save_scene(scene, dir);
    auto loaded = load_scene(dir);
    CHECK(loaded.cube.values == scene.cube.values);
    CHECK(loaded.truth_masks == scene.truth_masks);
    CHECK(loaded.dem.heights.isApprox(scene.dem.heights, 1e-6));
    CHECK(loaded.clean_vv[0] == scene.clean_vv[0]);
    CHECK(loaded.params.seed == 5);
    fs::remove_all(dir);
}

TEST_CASE("static bands are time invariant and cube passes validation") {
    SceneParams p;
    p.timesteps = 6;
    auto scene = generate_scene(p);
    scene.cube.validate();  // includes SLOPE/ELEVATION static check
    CHECK(scene.cube.all_finite());
}
