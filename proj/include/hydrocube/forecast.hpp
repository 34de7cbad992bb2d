#pragma once

// Next-frame water-mask prediction from a short history of probability maps.
// Three interchangeable families: a recurrent convolutional cell unrolled
// over the history (ConvLSTM), its bidirectional variant, and a
// time-distributed CNN that encodes each frame with shared weights before a
// convolutional fusion head. All trained with the composite
// MSE + (1 - SSIM) + temporal-smoothness objective.

#include "hydrocube/losses.hpp"
#include "hydrocube/nn/graph.hpp"
#include "hydrocube/training.hpp"
#include "hydrocube/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hydrocube {

enum class ForecastFamily { ConvLSTM, BiConvLSTM, TDCNN };

std::string family_name(ForecastFamily family);  // "ConvLSTM", "Bi-ConvLSTM", "TD-CNN"
ForecastFamily family_from_name(const std::string& name);
const std::vector<ForecastFamily>& all_forecast_families();

struct ForecastModelSpec {
    ForecastFamily family = ForecastFamily::TDCNN;
    int hidden = 8;       // cell/encoder feature channels
    int kernel = 3;
    int depth = 1;        // extra conv layers in the decode/fusion head
    int history = 7;      // frames, two-month cadence: 14 months of context

    void validate() const {
        if (hidden < 1) throw std::invalid_argument("ForecastModelSpec: hidden must be >= 1");
        if (kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("ForecastModelSpec: kernel must be odd");
        if (depth < 0) throw std::invalid_argument("ForecastModelSpec: depth must be >= 0");
        if (history < 2) throw std::invalid_argument("ForecastModelSpec: history must be >= 2");
    }
};

/// History of `history` frames at the nominal cadence plus the immediate
/// next frame as target.
struct SequenceSample {
    std::vector<PlaneF> history;
    PlaneF target;
    std::pair<double, double> location{0.0, 0.0};
    Date target_date;
};

class ForecastModel {
  public:
    ForecastModel(ForecastModelSpec spec, std::uint64_t seed);

    nn::Value<float> forward(nn::Tape<float>& tape, const std::vector<nn::Tensor<float>>& frames);

    /// Exactly spec().history frames in, one frame in [0,1] out.
    PlaneF predict(const std::vector<PlaneF>& history);

    std::vector<nn::Param<float>*> params();
    const ForecastModelSpec& spec() const { return spec_; }
    std::int64_t param_count();

    void save(const std::filesystem::path& dir);
    static ForecastModel load(const std::filesystem::path& dir);

  private:
    struct Conv {
        nn::Param<float> w, b;
    };
    nn::Value<float> run_cell(nn::Tape<float>& tape, const std::vector<nn::Tensor<float>>& frames,
                              bool reverse, Conv& gates);
    ForecastModelSpec spec_;
    Conv gates_fwd_;   // ConvLSTM / Bi-ConvLSTM gate convolution
    Conv gates_bwd_;   // Bi-ConvLSTM backward direction
    Conv enc1_, enc2_; // TD-CNN shared per-frame encoder
    Conv fuse_;        // TD-CNN fusion / first decode conv
    std::vector<Conv> decode_;
    Conv head_;
};

/// Repeat the most recent observation; the standard forecasting control.
PlaneF persistence_baseline(const std::vector<PlaneF>& history);

struct ForecastEpoch {
    int epoch = 0;
    double train_loss = 0;
    double val_mse = 0, val_ssim = 0, val_psnr = 0;
};

struct ForecastTrainResult {
    ForecastModel model;
    std::vector<ForecastEpoch> log;
    double best_val_mse = 0;
    int best_epoch = -1;
    std::vector<std::size_t> val_indices;  // sample indices used for validation
};

ForecastTrainResult train_forecaster(const std::vector<SequenceSample>& samples,
                                     const ForecastModelSpec& spec, const TrainConfig& config,
                                     const ForecastLossWeights& weights = {});

void write_forecast_log(const std::filesystem::path& csv, const std::vector<ForecastEpoch>& log);

}  // namespace hydrocube
