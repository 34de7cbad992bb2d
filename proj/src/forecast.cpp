#include "hydrocube/forecast.hpp"

#include "hydrocube/datacube.hpp"
#include "hydrocube/metrics.hpp"
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

std::string family_name(ForecastFamily family) {
    switch (family) {
        case ForecastFamily::ConvLSTM: return "ConvLSTM";
        case ForecastFamily::BiConvLSTM: return "Bi-ConvLSTM";
        case ForecastFamily::TDCNN: return "TD-CNN";
    }
    throw std::invalid_argument("family_name: bad family");
}

ForecastFamily family_from_name(const std::string& name) {
    for (ForecastFamily f : all_forecast_families())
        if (family_name(f) == name) return f;
    throw std::invalid_argument("unknown forecast family '" + name + "'");
}

const std::vector<ForecastFamily>& all_forecast_families() {
    static const std::vector<ForecastFamily> families = {
        ForecastFamily::ConvLSTM, ForecastFamily::BiConvLSTM, ForecastFamily::TDCNN};
    return families;
}

ForecastModel::ForecastModel(ForecastModelSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    std::mt19937_64 rng(seed);
    const int k = spec_.kernel, hid = spec_.hidden;

    auto make_conv = [&rng](const char* name, int out_ch, int in_ch, int kk) {
        Conv c{Param<float>(std::string(name) + ".w", out_ch, in_ch * kk * kk),
               Param<float>(std::string(name) + ".b", out_ch, 1)};
        std::mt19937_64& r = rng;
        nn::init_conv(c.w, c.b, r);
        return c;
    };

    int decode_in = 0;
    switch (spec_.family) {
        case ForecastFamily::ConvLSTM:
            gates_fwd_ = make_conv("gates", 4 * hid, 1 + hid, k);
            decode_in = hid;
            break;
        case ForecastFamily::BiConvLSTM:
            gates_fwd_ = make_conv("gates_fwd", 4 * hid, 1 + hid, k);
            gates_bwd_ = make_conv("gates_bwd", 4 * hid, 1 + hid, k);
            decode_in = 2 * hid;
            break;
        case ForecastFamily::TDCNN:
            enc1_ = make_conv("enc1", hid, 1, k);
            enc2_ = make_conv("enc2", hid, hid, k);
            fuse_ = make_conv("fuse", 2 * hid, spec_.history * hid, k);
            decode_in = 2 * hid;
            break;
    }
    for (int i = 0; i < spec_.depth; ++i)
        decode_.push_back(make_conv("decode", decode_in, decode_in, k));
    head_ = make_conv("head", 1, decode_in, 1);
}

Value<float> ForecastModel::run_cell(Tape<float>& tape, const std::vector<Tensor<float>>& frames,
                                     bool reverse, Conv& gates) {
    const int hid = spec_.hidden, k = spec_.kernel;
    const int h = frames[0].rows, w = frames[0].cols;
    Value<float> hidden = tape.input(Tensor<float>::zeros(hid, h, w));
    Value<float> cell = tape.input(Tensor<float>::zeros(hid, h, w));
    for (std::size_t step = 0; step < frames.size(); ++step) {
        const auto& frame = frames[reverse ? frames.size() - 1 - step : step];
        auto x = tape.input(frame);
        auto z = nn::conv2d(nn::concat_channels(std::vector<Value<float>>{x, hidden}), gates.w,
                            gates.b, k);
        auto input_gate = nn::sigmoid(nn::slice_channels(z, 0, hid));
        auto forget_gate = nn::sigmoid(nn::slice_channels(z, hid, hid));
        auto output_gate = nn::sigmoid(nn::slice_channels(z, 2 * hid, hid));
        auto candidate = nn::tanh_op(nn::slice_channels(z, 3 * hid, hid));
        cell = nn::add(nn::hadamard(forget_gate, cell), nn::hadamard(input_gate, candidate));
        hidden = nn::hadamard(output_gate, nn::tanh_op(cell));
    }
    return hidden;
}

Value<float> ForecastModel::forward(Tape<float>& tape, const std::vector<Tensor<float>>& frames) {
    if (int(frames.size()) != spec_.history)
        throw std::invalid_argument("forecast: expected " + std::to_string(spec_.history) +
                                    " history frames, got " + std::to_string(frames.size()));
    for (const auto& f : frames)
        if (f.channels != 1 || f.rows != frames[0].rows || f.cols != frames[0].cols)
            throw std::invalid_argument("forecast: history frames must be single-channel, same shape");

    Value<float> features{nullptr, nullptr};
    switch (spec_.family) {
        case ForecastFamily::ConvLSTM:
            features = run_cell(tape, frames, false, gates_fwd_);
            break;
        case ForecastFamily::BiConvLSTM: {
            auto fwd = run_cell(tape, frames, false, gates_fwd_);
            auto bwd = run_cell(tape, frames, true, gates_bwd_);
            features = nn::concat_channels(std::vector<Value<float>>{fwd, bwd});
            break;
        }
        case ForecastFamily::TDCNN: {
            std::vector<Value<float>> encoded;
            for (const auto& frame : frames) {
                auto x = tape.input(frame);
                encoded.push_back(
                    nn::relu(nn::conv2d(nn::relu(nn::conv2d(x, enc1_.w, enc1_.b, spec_.kernel)),
                                        enc2_.w, enc2_.b, spec_.kernel)));
            }
            features = nn::relu(nn::conv2d(nn::concat_channels(encoded), fuse_.w, fuse_.b, spec_.kernel));
            break;
        }
    }
    for (auto& conv : decode_)
        features = nn::relu(nn::conv2d(features, conv.w, conv.b, spec_.kernel));
    return nn::sigmoid(nn::conv2d(features, head_.w, head_.b, 1));
}

PlaneF ForecastModel::predict(const std::vector<PlaneF>& history) {
    std::vector<Tensor<float>> frames;
    frames.reserve(history.size());
    for (const auto& h : history) frames.push_back(Tensor<float>::from_plane(h));
    Tape<float> tape;
    return forward(tape, frames).val().to_plane();
}

std::vector<Param<float>*> ForecastModel::params() {
    std::vector<Param<float>*> out;
    auto push = [&out](Conv& c) {
        if (c.w.value.size() == 0) return;
        out.push_back(&c.w);
        out.push_back(&c.b);
    };
    push(gates_fwd_);
    push(gates_bwd_);
    push(enc1_);
    push(enc2_);
    push(fuse_);
    for (auto& c : decode_) push(c);
    push(head_);
    return out;
}

std::int64_t ForecastModel::param_count() {
    std::int64_t n = 0;
    for (const auto* p : params()) n += p->count();
    return n;
}

void ForecastModel::save(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json j;
    j["model"] = "forecaster";
    j["family"] = family_name(spec_.family);
    j["hidden"] = spec_.hidden;
    j["kernel"] = spec_.kernel;
    j["depth"] = spec_.depth;
    j["history"] = spec_.history;
    std::ofstream out(dir / "spec.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "spec.json").string());
    out << j.dump(2) << "\n";
    nn::save_weights(dir / "weights.bin", params());
}

ForecastModel ForecastModel::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "spec.json");
    if (!in) throw std::runtime_error("missing spec.json in " + dir.string());
    json j;
    in >> j;
    ForecastModelSpec spec;
    spec.family = family_from_name(j.at("family").get<std::string>());
    spec.hidden = j.at("hidden").get<int>();
    spec.kernel = j.at("kernel").get<int>();
    spec.depth = j.at("depth").get<int>();
    spec.history = j.at("history").get<int>();
    ForecastModel model(spec, 0);
    nn::load_weights(dir / "weights.bin", model.params());
    return model;
}

PlaneF persistence_baseline(const std::vector<PlaneF>& history) {
    if (history.empty()) throw std::invalid_argument("persistence_baseline: empty history");
    return history.back();
}

ForecastTrainResult train_forecaster(const std::vector<SequenceSample>& samples,
                                     const ForecastModelSpec& spec, const TrainConfig& config,
                                     const ForecastLossWeights& weights) {
    config.validate();
    weights.validate();
    if (samples.empty()) throw std::invalid_argument("train_forecaster: empty dataset");
    for (const auto& s : samples)
        if (int(s.history.size()) != spec.history)
            throw std::invalid_argument("train_forecaster: sample history length mismatch");

    std::vector<std::size_t> train_idx, val_idx;
    std::set<std::pair<double, double>> locations;
    for (const auto& s : samples) locations.insert(s.location);
    if (config.validation_ratio > 0 && locations.size() >= 2) {
        std::vector<std::pair<double, double>> locs;
        for (const auto& s : samples) locs.push_back(s.location);
        auto split = temporal_split(locs, 1.0 - config.validation_ratio, config.seed);
        train_idx = split.train;
        val_idx = split.validation;
    } else {
        train_idx.resize(samples.size());
        std::iota(train_idx.begin(), train_idx.end(), 0);
        val_idx = train_idx;
    }

    ForecastTrainResult result{ForecastModel(spec, config.seed), {}, 0.0, -1, val_idx};
    ForecastModel& model = result.model;
    nn::Adam<float> opt(model.params(), config.learning_rate);
    std::mt19937_64 rng(config.seed + 1);
    SsimOptions ssim_opt;
    std::vector<nn::RowMat<float>> best_snapshot;

    auto to_frames = [](const SequenceSample& s) {
        std::vector<Tensor<float>> frames;
        frames.reserve(s.history.size());
        for (const auto& h : s.history) frames.push_back(Tensor<float>::from_plane(h));
        return frames;
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        ForecastEpoch ep;
        ep.epoch = epoch;
        std::size_t done = 0;
        while (done < train_idx.size()) {
            const std::size_t batch = std::min<std::size_t>(config.batch_size, train_idx.size() - done);
            for (std::size_t i = 0; i < batch; ++i) {
                const SequenceSample& s = samples[train_idx[done + i]];
                Tape<float> tape;
                auto pred = model.forward(tape, to_frames(s));
                const PlaneF pred_plane = pred.val().to_plane();
                const float loss = forecast_loss(pred_plane, s.target, s.history.back(), weights, ssim_opt);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_forecaster: non-finite loss at epoch " +
                                             std::to_string(epoch));
                ep.train_loss += loss;
                tape.backward(pred, Tensor<float>::from_plane(forecast_loss_grad(
                                        pred_plane, s.target, s.history.back(), weights, ssim_opt)));
            }
            opt.step(1.0 / double(batch));
            done += batch;
        }
        ep.train_loss /= double(train_idx.size());

        double sum_mse = 0, sum_ssim = 0;
        for (std::size_t idx : val_idx) {
            const SequenceSample& s = samples[idx];
            const PlaneF pred = model.predict(s.history);
            sum_mse += mse(pred, s.target);
            sum_ssim += ssim(pred, s.target, ssim_opt);
        }
        ep.val_mse = sum_mse / double(val_idx.size());
        ep.val_ssim = sum_ssim / double(val_idx.size());
        ep.val_psnr = psnr_from_mse(ep.val_mse);
        result.log.push_back(ep);

        if (result.best_epoch < 0 || ep.val_mse < result.best_val_mse) {
            result.best_val_mse = ep.val_mse;
            result.best_epoch = epoch;
            best_snapshot = nn::snapshot_params(model.params());
        }
    }
    if (!best_snapshot.empty()) nn::restore_params(model.params(), best_snapshot);
    return result;
}

void write_forecast_log(const std::filesystem::path& csv, const std::vector<ForecastEpoch>& log) {
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + csv.string());
    out << "epoch,train_loss,val_mse,val_ssim,val_psnr\n";
    char line[160];
    for (const auto& e : log) {
        std::snprintf(line, sizeof(line), "%d,%.8f,%.8f,%.6f,%.4f\n", e.epoch, e.train_loss,
                      e.val_mse, e.val_ssim, e.val_psnr);
        out << line;
    }
}

}  // namespace hydrocube
