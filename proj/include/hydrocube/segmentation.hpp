#pragma once

// U-Net water-body segmentation over configurable band subsets, trained with
// the BCE + gap composite objective. Produces per-pixel probabilities;
// binarize() turns them into masks. An NDWI threshold baseline is included
// for comparison.

#include "hydrocube/losses.hpp"
#include "hydrocube/metrics.hpp"
#include "hydrocube/nn/graph.hpp"
#include "hydrocube/training.hpp"
#include "hydrocube/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hydrocube {

enum class BandCombo { S1, S2, S1SloEl, S2SloEl, All };

const std::vector<BandCombo>& all_band_combos();
std::string combo_name(BandCombo combo);                 // e.g. "S1+Slo+El"
std::vector<std::string> combo_bands(BandCombo combo);   // band names, cube order
BandCombo combo_from_name(const std::string& name);

struct UNetSpec {
    int depth = 4;          // encoder levels
    int base_channels = 32;
    std::vector<std::string> input_bands;  // names, defines channel order

    void validate() const {
        if (depth < 1 || depth > 6) throw std::invalid_argument("UNetSpec: depth out of range");
        if (base_channels < 1) throw std::invalid_argument("UNetSpec: base channels must be >= 1");
        if (input_bands.empty()) throw std::invalid_argument("UNetSpec: no input bands");
    }
    int divisor() const { return 1 << depth; }
};

class UNetModel {
  public:
    UNetModel(UNetSpec spec, std::uint64_t seed);

    /// Input spatial side must be divisible by 2^depth.
    nn::Value<float> forward(nn::Tape<float>& tape, nn::Value<float> input);

    /// Probabilities for one frame given its bands (model's band order).
    PlaneF predict(const std::vector<PlaneF>& bands);

    std::vector<nn::Param<float>*> params();
    const UNetSpec& spec() const { return spec_; }
    std::int64_t param_count();

    void save(const std::filesystem::path& dir);
    static UNetModel load(const std::filesystem::path& dir);

  private:
    struct ConvPair {
        nn::Param<float> w1, b1, w2, b2;
    };
    UNetSpec spec_;
    std::vector<ConvPair> encoder_;
    ConvPair bottleneck_;
    std::vector<ConvPair> decoder_;
    nn::Param<float> head_w_, head_b_;
};

/// One training patch: all bands by name (already normalized, S1 already
/// despeckled upstream) plus the target mask and the parent location.
struct SegPatch {
    std::map<std::string, PlaneF> bands;
    Mask target;
    std::pair<double, double> location{0.0, 0.0};
};

struct SegEpoch {
    int epoch = 0;
    double loss = 0;
    double precision = 0, recall = 0, iou = 0;  // weighted, on validation
};

struct SegTrainResult {
    UNetModel model;
    std::vector<SegEpoch> log;
    double best_val_iou = 0;
    int best_epoch = -1;
};

/// Splits by location (config.validation_ratio, config.seed), trains on the
/// combo's bands, reports weighted validation metrics per epoch and restores
/// the best-IoU parameters at the end.
SegTrainResult train_segmenter(const std::vector<SegPatch>& dataset, BandCombo combo,
                               const UNetSpec& arch, const TrainConfig& config,
                               const SegLossWeights& weights = {});

/// Tiled inference with mean fusion for frames larger than `tile`; stride is
/// half a tile. Frames not exceeding the tile run in one shot.
PlaneF predict_mask(UNetModel& model, const std::vector<PlaneF>& bands, int tile = 64);

/// mask = 1 where probability >= threshold.
Mask binarize(const PlaneF& prob, double threshold = 0.5);

/// Classical NDWI water index baseline: (G - NIR) / (G + NIR) > threshold,
/// zero-denominator pixels forced to land.
Mask ndwi_baseline(const PlaneF& green, const PlaneF& nir, double threshold = 0.0);

void write_seg_log(const std::filesystem::path& csv, const std::vector<SegEpoch>& log);

}  // namespace hydrocube
