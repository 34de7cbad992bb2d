#include "hydrocube/datacube.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace hydrocube;
namespace fs = std::filesystem;

namespace {

CubeManifest small_manifest(int t = 4, int h = 16, int w = 16) {
    CubeManifest m;
    m.lat = 41.1;
    m.lon = 12.3;
    m.width = w;
    m.height = h;
    m.bands = canonical_band_names();
    Date d{2016, 7, 15};
    for (int i = 0; i < t; ++i) {
        m.timestamps.push_back(d);
        d = d.add_months(2);
    }
    return m;
}

DataCube random_cube(std::mt19937_64& rng, int t = 4, int h = 16, int w = 16) {
    DataCube cube = DataCube::allocate(small_manifest(t, h, w));
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (float& v : cube.values) v = dist(rng);
    // static layers must not vary across time
    for (int b : {6, 7}) {
        PlaneF layer(h, w);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) layer(r, c) = dist(rng);
        for (int ti = 0; ti < t; ++ti) cube.set_band_plane(ti, b, layer);
    }
    return cube;
}

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cube save/load round trip is bit identical") {
    TempDir dir("hydrocube_test_roundtrip");
    std::mt19937_64 rng(71);
    DataCube cube = random_cube(rng);
    save_cube(cube, dir.path / "cube");
    DataCube loaded = load_cube(dir.path / "cube");
    CHECK(loaded.manifest.timestamps == cube.manifest.timestamps);
    CHECK(loaded.manifest.bands == cube.manifest.bands);
    REQUIRE(loaded.values.size() == cube.values.size());
    CHECK(std::memcmp(loaded.values.data(), cube.values.data(),
                      cube.values.size() * sizeof(float)) == 0);
}

TEST_CASE("load_cube error paths") {
    TempDir dir("hydrocube_test_errors");
    CHECK_THROWS_WITH_AS(load_cube(dir.path / "nothing"),
                         doctest::Contains("missing manifest"), std::runtime_error);

    std::mt19937_64 rng(73);
    DataCube cube = random_cube(rng, 4);
    save_cube(cube, dir.path / "cube");

    SUBCASE("missing raster") {
        fs::remove(dir.path / "cube" / "t_3.raw");
        CHECK_THROWS_WITH_AS(load_cube(dir.path / "cube"),
                             doctest::Contains("payload/manifest mismatch"), std::runtime_error);
    }
    SUBCASE("truncated raster") {
        std::ofstream f(dir.path / "cube" / "t_2.raw", std::ios::binary | std::ios::trunc);
        f << "short";
        f.close();
        CHECK_THROWS_WITH_AS(load_cube(dir.path / "cube"),
                             doctest::Contains("payload/manifest mismatch"), std::runtime_error);
    }
    SUBCASE("unknown band name") {
        auto manifest = dir.path / "cube" / "manifest.json";
        std::ifstream in(manifest);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        auto pos = text.find("\"VV\"");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 4, "\"XX\"");
        std::ofstream out(manifest, std::ios::trunc);
        out << text;
        out.close();
        CHECK_THROWS_WITH_AS(load_cube(dir.path / "cube"), doctest::Contains("unknown band"),
                             std::invalid_argument);
    }
    SUBCASE("non-monotonic timestamps") {
        auto manifest = dir.path / "cube" / "manifest.json";
        std::ifstream in(manifest);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        auto pos = text.find("2016-09-15");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 10, "2016-07-01");
        std::ofstream out(manifest, std::ios::trunc);
        out << text;
        out.close();
        CHECK_THROWS_WITH_AS(load_cube(dir.path / "cube"), doctest::Contains("non-monotonic"),
                             std::invalid_argument);
    }
}

TEST_CASE("save_cube rejects bad cubes") {
    TempDir dir("hydrocube_test_savebad");
    std::mt19937_64 rng(79);
    DataCube cube = random_cube(rng);

    SUBCASE("NaN values") {
        cube.values[10] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_WITH_AS(save_cube(cube, dir.path / "bad"), doctest::Contains("non-finite"),
                             std::invalid_argument);
    }
    SUBCASE("empty time axis") {
        cube.manifest.timestamps.clear();
        cube.values.clear();
        CHECK_THROWS_WITH_AS(save_cube(cube, dir.path / "bad"), doctest::Contains("empty time axis"),
                             std::invalid_argument);
    }
}

TEST_CASE("harmonize_dn") {
    Plane<float> dn(1, 3);
    dn << 2500, 400, 0;
    auto adj = harmonize_dn(dn, "04.00");
    CHECK(adj(0, 0) == 1500.0f);
    CHECK(adj(0, 1) == 0.0f);  // floored
    CHECK(adj(0, 2) == 0.0f);

    auto same = harmonize_dn(dn, "03.01");
    CHECK(same(0, 0) == 2500.0f);

    auto later = harmonize_dn(dn, "05.10");
    CHECK(later(0, 0) == 1500.0f);

    CHECK_THROWS_AS(harmonize_dn(dn, "not-a-version"), std::invalid_argument);

    // idempotent below the cutoff
    CHECK(harmonize_dn(same, "03.01") == same);
}

TEST_CASE("resample_band") {
    Plane<float> r32 = Plane<float>::Constant(32, 32, 7.5f);
    auto up = resample_band(r32, 20.0, 10.0);
    CHECK(up.rows() == 64);
    CHECK(up.cols() == 64);
    CHECK((up.array() == 7.5f).all());  // constant stays constant

    // hand-computed bilinear 2x upsample of [[0,1],[0,1]]:
    // target columns sample source x = -0.25, 0.25, 0.75, 1.25 (clamped),
    // giving column values 0, 0.25, 0.75, 1 in every row.
    Plane<float> two(2, 2);
    two << 0, 1, 0, 1;
    auto b = resample_band(two, 20.0, 10.0, ResampleMethod::Bilinear);
    REQUIRE(b.rows() == 4);
    for (int r = 0; r < 4; ++r) {
        CHECK(b(r, 0) == doctest::Approx(0.0));
        CHECK(b(r, 1) == doctest::Approx(0.25));
        CHECK(b(r, 2) == doctest::Approx(0.75));
        CHECK(b(r, 3) == doctest::Approx(1.0));
    }

    // nearest preserves the source value set and inverts by stride sampling
    std::mt19937_64 rng(83);
    Plane<float> src(5, 7);
    std::uniform_real_distribution<float> dist(0, 10);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 7; ++c) src(r, c) = dist(rng);
    auto n2 = resample_band(src, 20.0, 10.0, ResampleMethod::Nearest);
    std::set<float> src_vals(src.data(), src.data() + src.size());
    for (int r = 0; r < n2.rows(); ++r)
        for (int c = 0; c < n2.cols(); ++c) CHECK(src_vals.count(n2(r, c)) == 1);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 7; ++c) CHECK(n2(2 * r, 2 * c) == src(r, c));

    auto n6 = resample_band(src, 60.0, 10.0, ResampleMethod::Nearest);
    CHECK(n6.rows() == 30);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 7; ++c) CHECK(n6(6 * r, 6 * c) == src(r, c));

    CHECK_THROWS_AS(resample_band(src, 15.0, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(resample_band(src, 20.0, 20.0), std::invalid_argument);
}

TEST_CASE("normalize") {
    std::mt19937_64 rng(89);
    DataCube cube = random_cube(rng, 2, 16, 16);

    SUBCASE("fixed range identity and constant band") {
        NormalizationSpec spec;
        for (const auto& b : canonical_band_names()) spec[b] = {BandScheme::Kind::FixedRange, 0.0, 1.0};
        DataCube out = normalize(cube, spec);
        // data already in [0,1] with range (0,1): identity
        for (std::size_t i = 0; i < cube.values.size(); ++i)
            CHECK(out.values[i] == doctest::Approx(cube.values[i]).epsilon(1e-6));
        REQUIRE(out.manifest.normalization.has_value());

        // a band constant at c with range (c, c+1) maps to all zeros
        for (int t = 0; t < 2; ++t) cube.set_band_plane(t, 2, PlaneF::Constant(16, 16, 4.0f));
        spec["R"] = {BandScheme::Kind::FixedRange, 4.0, 5.0};
        out = normalize(cube, spec);
        CHECK(out.band_plane(0, 2).isZero());
    }

    SUBCASE("percentile scheme on a ramp") {
        // band values form the ramp 0..255 over a 16x16 frame (both timesteps)
        PlaneF ramp(16, 16);
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c) ramp(r, c) = float(r * 16 + c);
        for (int t = 0; t < 2; ++t) cube.set_band_plane(t, 0, ramp);
        NormalizationSpec spec = default_normalization();
        spec["VV"] = {BandScheme::Kind::Percentile, 2.0, 98.0};
        DataCube out = normalize(cube, spec);
        // sorted band sample is 0,0,1,1,...,255,255 (n=512); rank 2%: 0.02*511
        // = 10.22 lands between two copies of 5, rank 98%: 500.78 between two
        // copies of 250
        const double lo = out.manifest.normalization->at("VV").lo;
        const double hi = out.manifest.normalization->at("VV").hi;
        CHECK(lo == doctest::Approx(5.0));
        CHECK(hi == doctest::Approx(250.0));
        // three hand-checked pixels: below lo clamps to 0, above hi clamps to 1,
        // midpoint lands linearly
        CHECK(out.at(0, 0, 0, 0) == doctest::Approx(0.0));
        CHECK(out.at(0, 15, 15, 0) == doctest::Approx(1.0));
        const double mid = (127.0 - lo) / (hi - lo);
        CHECK(out.at(0, 7, 15, 0) == doctest::Approx(mid).epsilon(1e-5));
    }

    SUBCASE("bad range rejected") {
        NormalizationSpec spec = default_normalization();
        spec["R"] = {BandScheme::Kind::FixedRange, 5.0, 5.0};
        CHECK_THROWS_AS(normalize(cube, spec), std::invalid_argument);
    }
}

TEST_CASE("extract_patch_series") {
    std::mt19937_64 rng(97);
    DataCube cube = random_cube(rng, 3, 128, 128);

    auto whole = extract_patch_series(cube, 0, 0, 128);
    CHECK(whole.patch.values == cube.values);

    auto patch = extract_patch_series(cube, 10, 10, 64);
    CHECK(patch.patch.manifest.width == 64);
    CHECK(patch.patch.manifest.time_count() == 3);
    CHECK(patch.patch.at(1, 0, 0, 3) == cube.at(1, 10, 10, 3));
    CHECK(patch.patch.at(2, 63, 63, 7) == cube.at(2, 73, 73, 7));

    CHECK_THROWS_AS(extract_patch_series(cube, 100, 100, 64), std::invalid_argument);
    CHECK_THROWS_AS(extract_patch_series(cube, 0, 0, 8), std::invalid_argument);

    // stride-64 tiling of a 128x128 frame covers it exactly with 4 patches
    int covered = 0;
    for (int r = 0; r + 64 <= 128; r += 64)
        for (int c = 0; c + 64 <= 128; c += 64) {
            auto p = extract_patch_series(cube, r, c, 64);
            covered += p.size * p.size;
        }
    CHECK(covered == 128 * 128);
}

TEST_CASE("temporal_split") {
    std::vector<std::pair<double, double>> locs;
    for (int i = 0; i < 10; ++i) locs.push_back({40.0 + i, 12.0});

    auto split = temporal_split(locs, 0.8, 42);
    CHECK(split.train.size() == 8);
    CHECK(split.validation.size() == 2);

    auto split2 = temporal_split(locs, 0.8, 42);
    CHECK(split.train == split2.train);
    CHECK(split.validation == split2.validation);

    // 329 locations at ratio 0.5: |train| in {164, 165}, partitions disjoint
    std::vector<std::pair<double, double>> many;
    for (int i = 0; i < 329; ++i) many.push_back({double(i), double(-i)});
    auto big = temporal_split(many, 0.5, 7);
    CHECK((big.train.size() == 164 || big.train.size() == 165));
    std::set<std::size_t> train_set(big.train.begin(), big.train.end());
    for (auto v : big.validation) CHECK(train_set.count(v) == 0);
    CHECK(big.train.size() + big.validation.size() == 329);

    // cubes sharing a location stay together
    std::vector<std::pair<double, double>> shared = {{1, 1}, {1, 1}, {2, 2}, {3, 3}};
    auto s = temporal_split(shared, 0.5, 1);
    std::set<std::size_t> t(s.train.begin(), s.train.end());
    CHECK(t.count(0) == t.count(1));

    CHECK_THROWS_AS(temporal_split({{1.0, 1.0}}, 0.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(temporal_split(locs, 1.5, 0), std::invalid_argument);
}
