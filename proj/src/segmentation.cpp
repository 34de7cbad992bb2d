#include "hydrocube/segmentation.hpp"

#include "hydrocube/datacube.hpp"
#include "hydrocube/nn/checkpoint.hpp"
#include "hydrocube/nn/optim.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace hydrocube {

using nn::Param;
using nn::Tape;
using nn::Tensor;
using nn::Value;
using json = nlohmann::ordered_json;

const std::vector<BandCombo>& all_band_combos() {
    static const std::vector<BandCombo> combos = {BandCombo::S1, BandCombo::S2, BandCombo::S1SloEl,
                                                  BandCombo::S2SloEl, BandCombo::All};
    return combos;
}

std::string combo_name(BandCombo combo) {
    switch (combo) {
        case BandCombo::S1: return "S1";
        case BandCombo::S2: return "S2";
        case BandCombo::S1SloEl: return "S1+Slo+El";
        case BandCombo::S2SloEl: return "S2+Slo+El";
        case BandCombo::All: return "S1+S2+Slo+El";
    }
    throw std::invalid_argument("combo_name: bad combo");
}

std::vector<std::string> combo_bands(BandCombo combo) {
    switch (combo) {
        case BandCombo::S1: return {"VV", "VH"};
        case BandCombo::S2: return {"R", "G", "B", "NIR"};
        case BandCombo::S1SloEl: return {"VV", "VH", "SLOPE", "ELEVATION"};
        case BandCombo::S2SloEl: return {"R", "G", "B", "NIR", "SLOPE", "ELEVATION"};
        case BandCombo::All: return {"VV", "VH", "R", "G", "B", "NIR", "SLOPE", "ELEVATION"};
    }
    throw std::invalid_argument("combo_bands: bad combo");
}

BandCombo combo_from_name(const std::string& name) {
    for (BandCombo c : all_band_combos())
        if (combo_name(c) == name) return c;
    throw std::invalid_argument("unknown band combo '" + name + "'");
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

UNetModel::UNetModel(UNetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 rng(seed);
    const int k = 3;
    int in_ch = int(spec_.input_bands.size());
    for (int level = 0; level < spec_.depth; ++level) {
        const int ch = spec_.base_channels << level;
        ConvPair cp{Param<float>("enc.w1", ch, in_ch * k * k), Param<float>("enc.b1", ch, 1),
                    Param<float>("enc.w2", ch, ch * k * k), Param<float>("enc.b2", ch, 1)};
        nn::init_conv(cp.w1, cp.b1, rng);
        nn::init_conv(cp.w2, cp.b2, rng);
        encoder_.push_back(std::move(cp));
        in_ch = ch;
    }
    const int mid = spec_.base_channels << spec_.depth;
    bottleneck_ = ConvPair{Param<float>("mid.w1", mid, in_ch * k * k), Param<float>("mid.b1", mid, 1),
                           Param<float>("mid.w2", mid, mid * k * k), Param<float>("mid.b2", mid, 1)};
    nn::init_conv(bottleneck_.w1, bottleneck_.b1, rng);
    nn::init_conv(bottleneck_.w2, bottleneck_.b2, rng);
    int up_ch = mid;
    for (int level = spec_.depth - 1; level >= 0; --level) {
        const int skip_ch = spec_.base_channels << level;
        const int ch = skip_ch;
        ConvPair cp{Param<float>("dec.w1", ch, (up_ch + skip_ch) * k * k),
                    Param<float>("dec.b1", ch, 1), Param<float>("dec.w2", ch, ch * k * k),
                    Param<float>("dec.b2", ch, 1)};
        nn::init_conv(cp.w1, cp.b1, rng);
        nn::init_conv(cp.w2, cp.b2, rng);
        decoder_.push_back(std::move(cp));
        up_ch = ch;
    }
    head_w_ = Param<float>("head.w", 1, up_ch);
    head_b_ = Param<float>("head.b", 1, 1);
    nn::init_conv(head_w_, head_b_, rng);
}

Value<float> UNetModel::forward(Tape<float>& tape, Value<float> input) {
    if (input.val().channels != int(spec_.input_bands.size()))
        throw std::invalid_argument("unet: band count mismatch");
    if (input.val().rows % spec_.divisor() || input.val().cols % spec_.divisor())
        throw std::invalid_argument("unet: input side must be divisible by 2^depth");
    std::vector<Value<float>> skips;
    Value<float> h = input;
    for (auto& cp : encoder_) {
        h = nn::relu(nn::conv2d(nn::relu(nn::conv2d(h, cp.w1, cp.b1, 3)), cp.w2, cp.b2, 3));
        skips.push_back(h);
        h = nn::maxpool2(h);
    }
    h = nn::relu(nn::conv2d(nn::relu(nn::conv2d(h, bottleneck_.w1, bottleneck_.b1, 3)),
                            bottleneck_.w2, bottleneck_.b2, 3));
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        auto& cp = decoder_[i];
        auto up = nn::upsample2(h);
        auto cat = nn::concat_channels(std::vector<Value<float>>{up, skips[skips.size() - 1 - i]});
        h = nn::relu(nn::conv2d(nn::relu(nn::conv2d(cat, cp.w1, cp.b1, 3)), cp.w2, cp.b2, 3));
    }
    return nn::sigmoid(nn::conv2d(h, head_w_, head_b_, 1));
}

PlaneF UNetModel::predict(const std::vector<PlaneF>& bands) {
    if (bands.size() != spec_.input_bands.size())
        throw std::invalid_argument("unet predict: band count mismatch");
    Tensor<float> input(int(bands.size()), int(bands[0].rows()), int(bands[0].cols()));
    for (std::size_t b = 0; b < bands.size(); ++b) {
        if (bands[b].rows() != bands[0].rows() || bands[b].cols() != bands[0].cols())
            throw std::invalid_argument("unet predict: band shape mismatch");
        input.m.row(Eigen::Index(b)) =
            Eigen::Map<const Eigen::RowVectorXf>(bands[b].data(), bands[b].size());
    }
    Tape<float> tape;
    return forward(tape, tape.input(std::move(input))).val().to_plane();
}

std::vector<Param<float>*> UNetModel::params() {
    std::vector<Param<float>*> out;
    auto push = [&out](ConvPair& cp) {
        out.push_back(&cp.w1);
        out.push_back(&cp.b1);
        out.push_back(&cp.w2);
        out.push_back(&cp.b2);
    };
    for (auto& cp : encoder_) push(cp);
    push(bottleneck_);
    for (auto& cp : decoder_) push(cp);
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
}

std::int64_t UNetModel::param_count() {
    std::int64_t n = 0;
    for (const auto* p : params()) n += p->count();
    return n;
}

void UNetModel::save(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json j;
    j["model"] = "unet";
    j["depth"] = spec_.depth;
    j["base_channels"] = spec_.base_channels;
    j["input_bands"] = spec_.input_bands;
    std::ofstream out(dir / "spec.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "spec.json").string());
    out << j.dump(2) << "\n";
    nn::save_weights(dir / "weights.bin", params());
}

UNetModel UNetModel::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "spec.json");
    if (!in) throw std::runtime_error("missing spec.json in " + dir.string());
    json j;
    in >> j;
    UNetSpec spec;
    spec.depth = j.at("depth").get<int>();
    spec.base_channels = j.at("base_channels").get<int>();
    spec.input_bands = j.at("input_bands").get<std::vector<std::string>>();
    UNetModel model(spec, 0);
    nn::load_weights(dir / "weights.bin", model.params());
    return model;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

Tensor<float> combo_input(const SegPatch& patch, const std::vector<std::string>& band_names) {
    const PlaneF* first = nullptr;
    for (const auto& name : band_names) {
        auto it = patch.bands.find(name);
        if (it == patch.bands.end())
            throw std::invalid_argument("dataset lacks band '" + name + "' required by the combo");
        if (!first) first = &it->second;
    }
    Tensor<float> input(int(band_names.size()), int(first->rows()), int(first->cols()));
    for (std::size_t b = 0; b < band_names.size(); ++b) {
        const PlaneF& p = patch.bands.at(band_names[b]);
        input.m.row(Eigen::Index(b)) = Eigen::Map<const Eigen::RowVectorXf>(p.data(), p.size());
    }
    return input;
}

PlaneF mask_to_plane(const Mask& m) {
    PlaneF p(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) p(r, c) = float(m(r, c));
    return p;
}

}  // namespace

SegTrainResult train_segmenter(const std::vector<SegPatch>& dataset, BandCombo combo,
                               const UNetSpec& arch, const TrainConfig& config,
                               const SegLossWeights& weights) {
    config.validate();
    weights.validate();
    if (dataset.empty()) throw std::invalid_argument("train_segmenter: empty dataset");

    UNetSpec spec = arch;
    spec.input_bands = combo_bands(combo);
    spec.validate();

    // Location-disjoint validation split; degenerate datasets train on
    // everything and validate on the training set.
    std::vector<std::size_t> train_idx, val_idx;
    std::set<std::pair<double, double>> locations;
    for (const auto& p : dataset) locations.insert(p.location);
    if (config.validation_ratio > 0 && locations.size() >= 2) {
        std::vector<std::pair<double, double>> locs;
        for (const auto& p : dataset) locs.push_back(p.location);
        auto split = temporal_split(locs, 1.0 - config.validation_ratio, config.seed);
        train_idx = split.train;
        val_idx = split.validation;
    } else {
        train_idx.resize(dataset.size());
        std::iota(train_idx.begin(), train_idx.end(), 0);
        val_idx = train_idx;
    }

    SegTrainResult result{UNetModel(spec, config.seed), {}, 0.0, -1};
    UNetModel& model = result.model;
    nn::Adam<float> opt(model.params(), config.learning_rate);
    std::mt19937_64 rng(config.seed + 1);
    std::vector<nn::RowMat<float>> best_snapshot;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        SegEpoch ep;
        ep.epoch = epoch;
        std::size_t done = 0;
        while (done < train_idx.size()) {
            const std::size_t batch = std::min<std::size_t>(config.batch_size, train_idx.size() - done);
            for (std::size_t i = 0; i < batch; ++i) {
                const SegPatch& patch = dataset[train_idx[done + i]];
                Tape<float> tape;
                auto pred = model.forward(tape, tape.input(combo_input(patch, spec.input_bands)));
                const PlaneF pred_plane = pred.val().to_plane();
                const PlaneF target = mask_to_plane(patch.target);

                const float loss = seg_loss(pred_plane, target, weights);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_segmenter: non-finite loss at epoch " +
                                             std::to_string(epoch));
                ep.loss += loss;
                tape.backward(pred, Tensor<float>::from_plane(seg_loss_grad(pred_plane, target, weights)));
            }
            opt.step(1.0 / double(batch));
            done += batch;
        }
        ep.loss /= double(train_idx.size());

        // weighted validation metrics, pooled over patches
        ConfusionCounts pooled;
        for (std::size_t idx : val_idx) {
            const SegPatch& patch = dataset[idx];
            Tape<float> tape;
            auto pred = model.forward(tape, tape.input(combo_input(patch, spec.input_bands)));
            const Mask mask = binarize(pred.val().to_plane());
            const ConfusionCounts c = confusion(mask, patch.target);
            pooled.tp += c.tp;
            pooled.fp += c.fp;
            pooled.fn += c.fn;
            pooled.tn += c.tn;
        }
        const auto water = precision_recall_iou(pooled);
        const auto background = precision_recall_iou({pooled.tn, pooled.fn, pooled.fp, pooled.tp});
        const double sw = double(pooled.tp + pooled.fn), sb = double(pooled.tn + pooled.fp);
        ep.precision = (sw * water.precision + sb * background.precision) / (sw + sb);
        ep.recall = (sw * water.recall + sb * background.recall) / (sw + sb);
        ep.iou = (sw * water.iou + sb * background.iou) / (sw + sb);
        result.log.push_back(ep);

        if (result.best_epoch < 0 || ep.iou > result.best_val_iou) {
            result.best_val_iou = ep.iou;
            result.best_epoch = epoch;
            best_snapshot = nn::snapshot_params(model.params());
        }
    }
    if (!best_snapshot.empty()) nn::restore_params(model.params(), best_snapshot);
    return result;
}

PlaneF predict_mask(UNetModel& model, const std::vector<PlaneF>& bands, int tile) {
    if (bands.empty()) throw std::invalid_argument("predict_mask: no bands");
    const int h = int(bands[0].rows()), w = int(bands[0].cols());
    const int div = model.spec().divisor();
    if (tile % div) throw std::invalid_argument("predict_mask: tile not divisible by 2^depth");

    if (h <= tile && w <= tile && h % div == 0 && w % div == 0) return model.predict(bands);
    if (h < tile || w < tile)
        throw std::invalid_argument("predict_mask: frame smaller than tile and not pool-aligned");

    const int stride = tile / 2;
    PlaneF acc = PlaneF::Zero(h, w), weight = PlaneF::Zero(h, w);
    std::vector<int> row_origins, col_origins;
    for (int r = 0;; r += stride) {
        row_origins.push_back(std::min(r, h - tile));
        if (r >= h - tile) break;
    }
    for (int c = 0;; c += stride) {
        col_origins.push_back(std::min(c, w - tile));
        if (c >= w - tile) break;
    }
    std::vector<PlaneF> tile_bands(bands.size());
    for (int r0 : row_origins) {
        for (int c0 : col_origins) {
            for (std::size_t b = 0; b < bands.size(); ++b)
                tile_bands[b] = bands[b].block(r0, c0, tile, tile);
            const PlaneF pred = model.predict(tile_bands);
            acc.block(r0, c0, tile, tile) += pred;
            weight.block(r0, c0, tile, tile).array() += 1.0f;
        }
    }
    return acc.array() / weight.array();
}

Mask binarize(const PlaneF& prob, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("binarize: threshold must be in (0,1)");
    Mask m(prob.rows(), prob.cols());
    for (Eigen::Index r = 0; r < prob.rows(); ++r)
        for (Eigen::Index c = 0; c < prob.cols(); ++c) m(r, c) = prob(r, c) >= threshold ? 1 : 0;
    return m;
}

Mask ndwi_baseline(const PlaneF& green, const PlaneF& nir, double threshold) {
    if (green.rows() != nir.rows() || green.cols() != nir.cols())
        throw std::invalid_argument("ndwi_baseline: shape mismatch");
    Mask m(green.rows(), green.cols());
    for (Eigen::Index r = 0; r < green.rows(); ++r)
        for (Eigen::Index c = 0; c < green.cols(); ++c) {
            const double denom = double(green(r, c)) + double(nir(r, c));
            if (denom == 0.0) {
                m(r, c) = 0;  // flagged undefined: counted as land
                continue;
            }
            const double ndwi = (double(green(r, c)) - double(nir(r, c))) / denom;
            m(r, c) = ndwi > threshold ? 1 : 0;
        }
    return m;
}

void write_seg_log(const std::filesystem::path& csv, const std::vector<SegEpoch>& log) {
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + csv.string());
    out << "epoch,loss,precision,recall,iou\n";
    char line[160];
    for (const auto& e : log) {
        std::snprintf(line, sizeof(line), "%d,%.8f,%.6f,%.6f,%.6f\n", e.epoch, e.loss, e.precision,
                      e.recall, e.iou);
        out << line;
    }
}

}  // namespace hydrocube
