#include "hydrocube/despeckle.hpp"

#include "hydrocube/nn/checkpoint.hpp"
#include "hydrocube/nn/optim.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace hydrocube {

using nn::Param;
using nn::Tape;
using nn::Tensor;
using nn::Value;
using json = nlohmann::ordered_json;

DespeckleModel::DespeckleModel(DespeckleModelSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    const int c = spec_.channels, k = spec_.kernel;
    std::mt19937_64 rng(seed);
    in_w_ = Param<float>("in.w", c, 1 * k * k);
    in_b_ = Param<float>("in.b", c, 1);
    nn::init_conv(in_w_, in_b_, rng);
    for (int i = 0; i < spec_.depth; ++i) {
        ResBlock blk{Param<float>("blk.w1", c, c * k * k), Param<float>("blk.b1", c, 1),
                     Param<float>("blk.w2", c, c * k * k), Param<float>("blk.b2", c, 1)};
        nn::init_conv(blk.w1, blk.b1, rng);
        nn::init_conv(blk.w2, blk.b2, rng);
        blocks_.push_back(std::move(blk));
    }
    // zero head: predicted speckle starts at zero, model starts as identity
    head_w_ = Param<float>("head.w", 1, c * k * k);
    head_b_ = Param<float>("head.b", 1, 1);
}

Value<float> DespeckleModel::forward(Tape<float>& tape, Value<float> input) {
    const int k = spec_.kernel;
    auto h = nn::relu(nn::conv2d(input, in_w_, in_b_, k));
    for (auto& blk : blocks_) {
        auto inner = nn::conv2d(nn::relu(nn::conv2d(h, blk.w1, blk.b1, k)), blk.w2, blk.b2, k);
        h = nn::relu(nn::add(inner, h));
    }
    auto noise = nn::conv2d(h, head_w_, head_b_, k);
    return nn::sub(input, noise);
}

PlaneF DespeckleModel::apply(const PlaneF& sar) {
    Tape<float> tape;
    auto out = forward(tape, tape.input(Tensor<float>::from_plane(sar)));
    return out.val().to_plane();
}

std::vector<PlaneF> DespeckleModel::apply_stack(const std::vector<PlaneF>& frames) {
    std::vector<PlaneF> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(apply(f));
    return out;
}

std::vector<Param<float>*> DespeckleModel::params() {
    std::vector<Param<float>*> out = {&in_w_, &in_b_};
    for (auto& blk : blocks_) {
        out.push_back(&blk.w1);
        out.push_back(&blk.b1);
        out.push_back(&blk.w2);
        out.push_back(&blk.b2);
    }
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
}

std::int64_t DespeckleModel::param_count() {
    std::int64_t n = 0;
    for (const auto* p : params()) n += p->count();
    return n;
}

void DespeckleModel::save(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json j;
    j["model"] = "despeckler";
    j["depth"] = spec_.depth;
    j["channels"] = spec_.channels;
    j["kernel"] = spec_.kernel;
    j["subtraction_head"] = spec_.subtraction_head;
    std::ofstream out(dir / "spec.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "spec.json").string());
    out << j.dump(2) << "\n";
    nn::save_weights(dir / "weights.bin", params());
}

DespeckleModel DespeckleModel::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "spec.json");
    if (!in) throw std::runtime_error("missing spec.json in " + dir.string());
    json j;
    in >> j;
    DespeckleModelSpec spec;
    spec.depth = j.at("depth").get<int>();
    spec.channels = j.at("channels").get<int>();
    spec.kernel = j.at("kernel").get<int>();
    spec.subtraction_head = j.at("subtraction_head").get<bool>();
    DespeckleModel model(spec, 0);
    nn::load_weights(dir / "weights.bin", model.params());
    return model;
}

DespeckleTrainResult train_despeckler(const std::vector<std::pair<PlaneF, PlaneF>>& pairs,
                                      const DespeckleModelSpec& spec, const TrainConfig& config,
                                      const SpeckleLossWeights& weights) {
    config.validate();
    weights.validate();
    if (pairs.empty()) throw std::invalid_argument("train_despeckler: empty dataset");

    DespeckleTrainResult result{DespeckleModel(spec, config.seed), {}};
    DespeckleModel& model = result.model;
    nn::Adam<float> opt(model.params(), config.learning_rate);
    std::mt19937_64 rng(config.seed + 1);
    SsimOptions ssim_opt;

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        DespeckleEpoch ep;
        ep.epoch = epoch;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch = std::min<std::size_t>(config.batch_size, order.size() - done);
            for (std::size_t i = 0; i < batch; ++i) {
                const auto& [noisy, clean] = pairs[order[done + i]];
                Tape<float> tape;
                auto pred = model.forward(tape, tape.input(Tensor<float>::from_plane(noisy)));
                const PlaneF pred_plane = pred.val().to_plane();

                const float m = mse(pred_plane, clean);
                const float s = 1.0f - ssim(pred_plane, clean, ssim_opt);
                const float tv = tv_penalty(pred_plane);
                const float total = float(weights.alpha1) * m + float(weights.beta1) * s +
                                    float(weights.gamma1) * tv;
                if (!std::isfinite(total))
                    throw std::runtime_error("train_despeckler: non-finite loss at epoch " +
                                             std::to_string(epoch));
                ep.mse += m;
                ep.ssim_term += s;
                ep.tv += tv;
                ep.total += total;

                const PlaneF grad = speckle_loss_grad(pred_plane, clean, weights, ssim_opt);
                tape.backward(pred, Tensor<float>::from_plane(grad));
            }
            opt.step(1.0 / double(batch));
            done += batch;
        }
        const double n = double(order.size());
        ep.mse /= n;
        ep.ssim_term /= n;
        ep.tv /= n;
        ep.total /= n;
        result.log.push_back(ep);
    }
    return result;
}

void write_despeckle_log(const std::filesystem::path& csv, const std::vector<DespeckleEpoch>& log) {
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + csv.string());
    out << "epoch,mse,ssim,tv,total\n";
    char line[160];
    for (const auto& e : log) {
        std::snprintf(line, sizeof(line), "%d,%.8f,%.8f,%.8f,%.8f\n", e.epoch, e.mse, e.ssim_term,
                      e.tv, e.total);
        out << line;
    }
}

}  // namespace hydrocube
