#pragma once

// Residual despeckling network: a small convolutional trunk predicts the
// speckle component, which a final subtraction head removes from the input.
// Trained with the composite MSE + (1 - SSIM) + TV objective from losses.hpp.

#include "hydrocube/losses.hpp"
#include "hydrocube/nn/graph.hpp"
#include "hydrocube/training.hpp"
#include "hydrocube/types.hpp"

#include <filesystem>
#include <vector>

namespace hydrocube {

struct DespeckleModelSpec {
    int depth = 6;     // residual blocks
    int channels = 32; // feature width
    int kernel = 3;
    bool subtraction_head = true;  // fixed: output = input - predicted speckle

    void validate() const {
        if (depth < 1 || channels < 1) throw std::invalid_argument("DespeckleModelSpec: bad sizes");
        if (kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("DespeckleModelSpec: kernel must be odd");
        if (!subtraction_head)
            throw std::invalid_argument("DespeckleModelSpec: the subtraction head is fixed");
    }
};

class DespeckleModel {
  public:
    /// The head starts at zero, so an untrained model is the identity.
    DespeckleModel(DespeckleModelSpec spec, std::uint64_t seed);

    nn::Value<float> forward(nn::Tape<float>& tape, nn::Value<float> input);

    /// Filter a single band image (any size >= kernel).
    PlaneF apply(const PlaneF& sar);
    /// Per-frame application over a temporal stack, order preserved.
    std::vector<PlaneF> apply_stack(const std::vector<PlaneF>& frames);

    std::vector<nn::Param<float>*> params();
    const DespeckleModelSpec& spec() const { return spec_; }
    std::int64_t param_count();

    void save(const std::filesystem::path& dir);
    static DespeckleModel load(const std::filesystem::path& dir);

  private:
    struct ResBlock {
        nn::Param<float> w1, b1, w2, b2;
    };
    DespeckleModelSpec spec_;
    nn::Param<float> in_w_, in_b_;
    std::vector<ResBlock> blocks_;
    nn::Param<float> head_w_, head_b_;
};

struct DespeckleEpoch {
    int epoch = 0;
    double mse = 0, ssim_term = 0, tv = 0, total = 0;
};

struct DespeckleTrainResult {
    DespeckleModel model;
    std::vector<DespeckleEpoch> log;
};

/// pairs: (noisy, clean), both in the normalized range. Deterministic given
/// config.seed. Throws on an empty dataset or a non-finite loss.
DespeckleTrainResult train_despeckler(const std::vector<std::pair<PlaneF, PlaneF>>& pairs,
                                      const DespeckleModelSpec& spec, const TrainConfig& config,
                                      const SpeckleLossWeights& weights = {});

void write_despeckle_log(const std::filesystem::path& csv, const std::vector<DespeckleEpoch>& log);

}  // namespace hydrocube
