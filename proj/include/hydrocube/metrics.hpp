#pragma once

// Single source of truth for evaluation metrics. Confusion-based scores treat
// water as the positive class; degenerate denominators follow the logged
// convention: an empty prediction against an empty target is perfect (1.0),
// any other empty-denominator case scores 0.0. ssim() and mse() live in
// losses.hpp and are the canonical implementations reused here.

#include "hydrocube/losses.hpp"
#include "hydrocube/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace hydrocube {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::int64_t total() const { return tp + fp + fn + tn; }
};

inline void check_binary(const Mask& m, const char* what) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m.reshaped()(i) > 1) throw std::invalid_argument(std::string(what) + ": mask not binary");
}

inline ConfusionCounts confusion(const Mask& pred, const Mask& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("confusion: shape mismatch");
    check_binary(pred, "confusion");
    check_binary(target, "confusion");
    ConfusionCounts c;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const bool p = pred.reshaped()(i) != 0;
        const bool t = target.reshaped()(i) != 0;
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

struct ClassMetrics {
    double precision = 0, recall = 0, iou = 0;
};

inline ClassMetrics precision_recall_iou(const ConfusionCounts& c) {
    ClassMetrics m;
    m.precision = (c.tp + c.fp > 0) ? double(c.tp) / double(c.tp + c.fp) : (c.fn == 0 ? 1.0 : 0.0);
    m.recall = (c.tp + c.fn > 0) ? double(c.tp) / double(c.tp + c.fn) : (c.fp == 0 ? 1.0 : 0.0);
    m.iou = (c.tp + c.fp + c.fn > 0) ? double(c.tp) / double(c.tp + c.fp + c.fn) : 1.0;
    return m;
}

/// Two-class report (water / non-water) with support weighting taken from the
/// ground truth, matching the weighted-average evaluation protocol.
struct WeightedReport {
    ClassMetrics water;
    ClassMetrics background;
    std::int64_t support_water = 0;
    std::int64_t support_background = 0;
    double precision = 0, recall = 0, iou = 0;  // support-weighted averages
};

inline WeightedReport weighted_report(const Mask& pred, const Mask& target) {
    const ConfusionCounts c = confusion(pred, target);
    WeightedReport r;
    r.water = precision_recall_iou(c);
    // Complement classes: swap positives and negatives.
    r.background = precision_recall_iou(ConfusionCounts{c.tn, c.fn, c.fp, c.tp});
    r.support_water = c.tp + c.fn;
    r.support_background = c.tn + c.fp;
    const double total = double(r.support_water + r.support_background);
    auto weighted = [&](double water_v, double bg_v) {
        return (double(r.support_water) * water_v + double(r.support_background) * bg_v) / total;
    };
    r.precision = weighted(r.water.precision, r.background.precision);
    r.recall = weighted(r.water.recall, r.background.recall);
    r.iou = weighted(r.water.iou, r.background.iou);
    return r;
}

/// PSNR in dB; identical inputs produce the +infinity sentinel (serialized as
/// null plus a flag by the report writers).
inline double psnr_from_mse(double mse_value, double peak = 1.0) {
    if (peak <= 0) throw std::invalid_argument("psnr: peak must be > 0");
    if (mse_value < 0) throw std::invalid_argument("psnr: negative mse");
    if (mse_value == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse_value);
}

template <class S>
double psnr(const Plane<S>& a, const Plane<S>& b, double peak = 1.0) {
    return psnr_from_mse(double(mse(a, b)), peak);
}

}  // namespace hydrocube
