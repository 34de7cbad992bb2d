#include "hydrocube/datacube.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

static_assert(std::endian::native == std::endian::little,
              "container format is little-endian; big-endian hosts are unsupported");

namespace hydrocube {

using json = nlohmann::ordered_json;

void BandScheme::validate() const {
    switch (kind) {
        case Kind::FixedRange:
        case Kind::DbFixedRange:
            if (hi <= lo) throw std::invalid_argument("BandScheme: max <= min");
            break;
        case Kind::Percentile:
            if (!(lo >= 0 && hi <= 100 && hi > lo))
                throw std::invalid_argument("BandScheme: percentile ranks must satisfy 0 <= lo < hi <= 100");
            break;
    }
}

NormalizationSpec default_normalization() {
    NormalizationSpec spec;
    spec["VV"] = {BandScheme::Kind::DbFixedRange, -30.0, 0.0};
    spec["VH"] = {BandScheme::Kind::DbFixedRange, -30.0, 0.0};
    for (const char* b : {"R", "G", "B", "NIR"}) spec[b] = {BandScheme::Kind::FixedRange, 0.0, 10000.0};
    spec["SLOPE"] = {BandScheme::Kind::FixedRange, 0.0, 90.0};
    spec["ELEVATION"] = {BandScheme::Kind::Percentile, 2.0, 98.0};
    return spec;
}

int CubeManifest::band_ordinal(const std::string& name) const {
    for (std::size_t i = 0; i < bands.size(); ++i)
        if (bands[i] == name) return static_cast<int>(i);
    return -1;
}

void CubeManifest::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("manifest: non-positive frame size");
    if (pixel_size_m <= 0) throw std::invalid_argument("manifest: non-positive pixel size");
    if (dtype != "f32le") throw std::invalid_argument("manifest: unsupported dtype '" + dtype + "'");
    if (bands.size() != kBandCount)
        throw std::invalid_argument("manifest: expected " + std::to_string(kBandCount) + " bands");
    std::set<std::string> seen(bands.begin(), bands.end());
    if (seen.size() != bands.size()) throw std::invalid_argument("manifest: duplicate band names");
    const auto& canon = canonical_band_names();
    for (const auto& b : bands)
        if (std::find(canon.begin(), canon.end(), b) == canon.end())
            throw std::invalid_argument("manifest: unknown band name '" + b + "'");
    if (timestamps.empty()) throw std::invalid_argument("manifest: empty time axis");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (!(timestamps[i - 1] < timestamps[i]))
            throw std::invalid_argument("manifest: non-monotonic timestamps");
}

bool CubeManifest::cadence_ok(int tolerance_days) const {
    std::set<std::int64_t> gap_days;
    for (const auto& g : gaps) gap_days.insert(g.to_days());
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        std::int64_t lo = timestamps[i - 1].to_days();
        std::int64_t hi = timestamps[i].to_days();
        // A step is fine if it is ~2 months, or bridged by recorded gaps.
        std::int64_t nominal = days_between(timestamps[i - 1], timestamps[i - 1].add_months(2));
        if (std::llabs((hi - lo) - nominal) <= tolerance_days) continue;
        bool bridged = false;
        for (std::int64_t g : gap_days) bridged |= (g > lo && g < hi);
        if (!bridged) return false;
    }
    return true;
}

DataCube DataCube::allocate(CubeManifest m) {
    m.validate();
    DataCube cube;
    cube.manifest = std::move(m);
    cube.values.assign(cube.expected_size(), 0.0f);
    return cube;
}

float& DataCube::at(int t, int row, int col, int band) {
    const int W = manifest.width, B = manifest.band_count();
    return values[std::size_t(((t * manifest.height + row) * W + col)) * B + band];
}

float DataCube::at(int t, int row, int col, int band) const {
    const int W = manifest.width, B = manifest.band_count();
    return values[std::size_t(((t * manifest.height + row) * W + col)) * B + band];
}

PlaneF DataCube::band_plane(int t, int band) const {
    PlaneF p(manifest.height, manifest.width);
    for (int r = 0; r < manifest.height; ++r)
        for (int c = 0; c < manifest.width; ++c) p(r, c) = at(t, r, c, band);
    return p;
}

PlaneF DataCube::band_plane_named(int t, const std::string& band_name) const {
    const int b = manifest.band_ordinal(band_name);
    if (b < 0) throw std::invalid_argument("cube has no band '" + band_name + "'");
    return band_plane(t, b);
}

void DataCube::set_band_plane(int t, int band, const PlaneF& plane) {
    if (plane.rows() != manifest.height || plane.cols() != manifest.width)
        throw std::invalid_argument("set_band_plane: shape mismatch");
    for (int r = 0; r < manifest.height; ++r)
        for (int c = 0; c < manifest.width; ++c) at(t, r, c, band) = plane(r, c);
}

bool DataCube::all_finite() const {
    for (float v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void DataCube::validate() const {
    manifest.validate();
    if (values.size() != expected_size())
        throw std::invalid_argument("cube: value array does not match manifest shape");
    for (const char* name : {"SLOPE", "ELEVATION"}) {
        const int b = manifest.band_ordinal(name);
        if (b < 0) continue;
        for (int t = 1; t < manifest.time_count(); ++t)
            for (int r = 0; r < manifest.height; ++r)
                for (int c = 0; c < manifest.width; ++c)
                    if (at(t, r, c, b) != at(0, r, c, b))
                        throw std::invalid_argument(std::string("cube: static band ") + name +
                                                    " varies across time");
    }
}

// --------------------------------------------------------------------------
// Container IO
// --------------------------------------------------------------------------

namespace {

json manifest_to_json(const CubeManifest& m) {
    json j;
    j["lat"] = m.lat;
    j["lon"] = m.lon;
    json ts = json::array();
    for (const auto& t : m.timestamps) ts.push_back(t.to_iso());
    j["timestamps"] = ts;
    j["pixel_size_m"] = m.pixel_size_m;
    j["width"] = m.width;
    j["height"] = m.height;
    j["footprint_m"] = {m.width * m.pixel_size_m, m.height * m.pixel_size_m};
    j["bands"] = m.bands;
    j["dtype"] = m.dtype;
    j["processing_baseline"] = m.processing_baseline;
    json gaps = json::array();
    for (const auto& g : m.gaps) gaps.push_back(g.to_iso());
    j["gaps"] = gaps;
    if (m.normalization) {
        json norm = json::object();
        for (const auto& [band, scheme] : *m.normalization) {
            const char* kind = scheme.kind == BandScheme::Kind::FixedRange ? "fixed"
                               : scheme.kind == BandScheme::Kind::Percentile ? "percentile"
                                                                             : "db_fixed";
            norm[band] = {{"kind", kind}, {"lo", scheme.lo}, {"hi", scheme.hi}};
        }
        j["normalization"] = norm;
    } else {
        j["normalization"] = nullptr;
    }
    return j;
}

CubeManifest manifest_from_json(const json& j) {
    CubeManifest m;
    m.lat = j.at("lat").get<double>();
    m.lon = j.at("lon").get<double>();
    for (const auto& t : j.at("timestamps")) m.timestamps.push_back(Date::parse_iso(t.get<std::string>()));
    m.pixel_size_m = j.at("pixel_size_m").get<double>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.bands = j.at("bands").get<std::vector<std::string>>();
    m.dtype = j.at("dtype").get<std::string>();
    m.processing_baseline = j.at("processing_baseline").get<std::string>();
    if (j.contains("gaps"))
        for (const auto& g : j.at("gaps")) m.gaps.push_back(Date::parse_iso(g.get<std::string>()));
    if (j.contains("normalization") && !j.at("normalization").is_null()) {
        NormalizationSpec spec;
        for (const auto& [band, s] : j.at("normalization").items()) {
            BandScheme scheme;
            const std::string kind = s.at("kind").get<std::string>();
            scheme.kind = kind == "fixed"        ? BandScheme::Kind::FixedRange
                          : kind == "percentile" ? BandScheme::Kind::Percentile
                                                 : BandScheme::Kind::DbFixedRange;
            scheme.lo = s.at("lo").get<double>();
            scheme.hi = s.at("hi").get<double>();
            spec[band] = scheme;
        }
        m.normalization = spec;
    }
    if (j.contains("footprint_m")) {
        const auto fp = j.at("footprint_m").get<std::vector<double>>();
        if (fp.size() != 2 || fp[0] != m.width * m.pixel_size_m || fp[1] != m.height * m.pixel_size_m)
            throw std::invalid_argument("manifest: footprint inconsistent with width/height * pixel size");
    }
    return m;
}

std::filesystem::path timestep_file(const std::filesystem::path& dir, int t) {
    return dir / ("t_" + std::to_string(t) + ".raw");
}

}  // namespace

void write_raw_f32(const std::filesystem::path& file, const float* data, std::size_t count) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(float)));
    if (!out) throw std::runtime_error("short write: " + file.string());
}

std::vector<float> read_raw_f32(const std::filesystem::path& file, std::size_t expected_count) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open: " + file.string());
    const std::size_t bytes = std::size_t(in.tellg());
    if (bytes != expected_count * sizeof(float))
        throw std::runtime_error("payload/manifest mismatch: " + file.string() + " holds " +
                                 std::to_string(bytes) + " bytes, expected " +
                                 std::to_string(expected_count * sizeof(float)));
    in.seekg(0);
    std::vector<float> data(expected_count);
    in.read(reinterpret_cast<char*>(data.data()), std::streamsize(bytes));
    if (!in) throw std::runtime_error("short read: " + file.string());
    return data;
}

DataCube load_cube(const std::filesystem::path& path) {
    const auto manifest_path = path / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("missing manifest: " + manifest_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("unreadable manifest " + manifest_path.string() + ": " + e.what());
    }
    DataCube cube;
    cube.manifest = manifest_from_json(j);
    cube.manifest.validate();

    const std::size_t per_step =
        std::size_t(cube.manifest.height) * cube.manifest.width * cube.manifest.band_count();
    cube.values.resize(cube.expected_size());
    for (int t = 0; t < cube.manifest.time_count(); ++t) {
        const auto file = timestep_file(path, t);
        if (!std::filesystem::exists(file))
            throw std::runtime_error("payload/manifest mismatch: missing " + file.string());
        const auto step = read_raw_f32(file, per_step);
        std::copy(step.begin(), step.end(), cube.values.begin() + std::int64_t(t) * std::int64_t(per_step));
    }
    return cube;
}

void save_cube(const DataCube& cube, const std::filesystem::path& path) {
    cube.manifest.validate();
    if (cube.manifest.time_count() == 0) throw std::invalid_argument("save_cube: empty time axis");
    if (cube.values.size() != cube.expected_size())
        throw std::invalid_argument("save_cube: value array does not match manifest shape");
    if (!cube.all_finite()) throw std::invalid_argument("save_cube: cube holds non-finite values");
    std::filesystem::create_directories(path);
    std::ofstream out(path / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    out << manifest_to_json(cube.manifest).dump(2) << "\n";
    const std::size_t per_step =
        std::size_t(cube.manifest.height) * cube.manifest.width * cube.manifest.band_count();
    for (int t = 0; t < cube.manifest.time_count(); ++t)
        write_raw_f32(timestep_file(path, t), cube.values.data() + std::size_t(t) * per_step, per_step);
}

bool baseline_requires_offset(const std::string& baseline) {
    int major = 0, minor = 0;
    if (std::sscanf(baseline.c_str(), "%d.%d", &major, &minor) != 2 || major < 0 || minor < 0)
        throw std::invalid_argument("unparseable processing baseline: '" + baseline + "'");
    return major > 4 || (major == 4 && minor >= 0);
}

double percentile(std::vector<float> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * double(values.size() - 1);
    const std::size_t lo = std::size_t(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - double(lo);
    return (1.0 - frac) * values[lo] + frac * values[hi];
}

DataCube normalize(const DataCube& cube, const NormalizationSpec& spec) {
    cube.validate();
    if (!cube.all_finite()) throw std::invalid_argument("normalize: input cube holds non-finite values");
    DataCube out = cube;
    NormalizationSpec realized;
    const int T = cube.manifest.time_count(), H = cube.manifest.height, W = cube.manifest.width;
    for (int b = 0; b < cube.manifest.band_count(); ++b) {
        const std::string& name = cube.manifest.bands[b];
        const auto it = spec.find(name);
        if (it == spec.end()) throw std::invalid_argument("normalize: no scheme for band " + name);
        BandScheme scheme = it->second;
        scheme.validate();

        double lo = scheme.lo, hi = scheme.hi;
        if (scheme.kind == BandScheme::Kind::Percentile) {
            std::vector<float> band_values;
            band_values.reserve(std::size_t(T) * H * W);
            for (int t = 0; t < T; ++t)
                for (int r = 0; r < H; ++r)
                    for (int c = 0; c < W; ++c) band_values.push_back(cube.at(t, r, c, b));
            lo = percentile(band_values, scheme.lo);
            hi = percentile(std::move(band_values), scheme.hi);
            if (hi <= lo) hi = lo + 1.0;  // constant band: map everything to 0
        }
        const double span = hi - lo;
        for (int t = 0; t < T; ++t)
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    double v = cube.at(t, r, c, b);
                    if (scheme.kind == BandScheme::Kind::DbFixedRange)
                        v = v > 0 ? 10.0 * std::log10(v) : lo;
                    out.at(t, r, c, b) = float(std::clamp((v - lo) / span, 0.0, 1.0));
                }
        realized[name] = BandScheme{scheme.kind, lo, hi};
    }
    out.manifest.normalization = realized;
    return out;
}

PatchSeries extract_patch_series(const DataCube& cube, int origin_row, int origin_col, int size) {
    if (size < 16) throw std::invalid_argument("extract_patch_series: size must be >= 16");
    if (origin_row < 0 || origin_col < 0 || origin_row + size > cube.manifest.height ||
        origin_col + size > cube.manifest.width)
        throw std::invalid_argument("extract_patch_series: patch out of bounds");
    PatchSeries out;
    out.parent_lat = cube.manifest.lat;
    out.parent_lon = cube.manifest.lon;
    out.origin_row = origin_row;
    out.origin_col = origin_col;
    out.size = size;
    CubeManifest m = cube.manifest;
    m.width = m.height = size;
    out.patch = DataCube::allocate(std::move(m));
    const int B = cube.manifest.band_count();
    for (int t = 0; t < cube.manifest.time_count(); ++t)
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c)
                for (int b = 0; b < B; ++b)
                    out.patch.at(t, r, c, b) = cube.at(t, origin_row + r, origin_col + c, b);
    return out;
}

SplitIndices temporal_split(const std::vector<std::pair<double, double>>& locations, double ratio,
                            std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("temporal_split: ratio must be in (0,1)");
    // Group indices sharing a location.
    std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < locations.size(); ++i) groups[locations[i]].push_back(i);
    if (groups.size() < 2) throw std::invalid_argument("temporal_split: need at least 2 locations");

    std::vector<std::vector<std::size_t>> group_list;
    for (auto& [_, idx] : groups) group_list.push_back(std::move(idx));
    std::mt19937_64 rng(seed);
    std::shuffle(group_list.begin(), group_list.end(), rng);

    std::size_t n_train = std::size_t(std::llround(ratio * double(group_list.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, group_list.size() - 1);

    SplitIndices out;
    for (std::size_t g = 0; g < group_list.size(); ++g) {
        auto& dst = (g < n_train) ? out.train : out.validation;
        dst.insert(dst.end(), group_list[g].begin(), group_list[g].end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    return out;
}

}  // namespace hydrocube
