#pragma once

// Loss terms for despeckling, segmentation and next-frame prediction, plus
// their analytic gradients with respect to the prediction. Everything here is
// a pure function of dense planes; trainers seed network backprop with the
// *_grad results, and the test suite checks them against finite differences.

#include "hydrocube/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hydrocube {

// ---------------------------------------------------------------------------
// Total variation (isotropic). At the last row/column only the single
// available one-sided difference contributes.
// ---------------------------------------------------------------------------

template <class S>
S tv_penalty(const Plane<S>& img) {
    const Eigen::Index h = img.rows(), w = img.cols();
    if (h < 2 || w < 2) throw std::invalid_argument("tv_penalty: image must be at least 2x2");
    S total = 0;
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            const S dr = (r + 1 < h) ? img(r + 1, c) - img(r, c) : S(0);
            const S dc = (c + 1 < w) ? img(r, c + 1) - img(r, c) : S(0);
            total += std::sqrt(dr * dr + dc * dc);
        }
    }
    return total;
}

/// d tv_penalty / d img. Subgradient 0 where both local differences vanish.
template <class S>
Plane<S> tv_penalty_grad(const Plane<S>& img) {
    const Eigen::Index h = img.rows(), w = img.cols();
    if (h < 2 || w < 2) throw std::invalid_argument("tv_penalty: image must be at least 2x2");
    Plane<S> g = Plane<S>::Zero(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            const S dr = (r + 1 < h) ? img(r + 1, c) - img(r, c) : S(0);
            const S dc = (c + 1 < w) ? img(r, c + 1) - img(r, c) : S(0);
            const S norm = std::sqrt(dr * dr + dc * dc);
            if (norm == S(0)) continue;
            g(r, c) += -(dr + dc) / norm;
            if (r + 1 < h) g(r + 1, c) += dr / norm;
            if (c + 1 < w) g(r, c + 1) += dc / norm;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// SSIM with a uniform sliding window and reflect padding (edge not repeated).
// Window statistics use population variance. c1 = (k1*D)^2, c2 = (k2*D)^2.
// ---------------------------------------------------------------------------

struct SsimOptions {
    int window = 7;            // odd, >= 3
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

namespace detail {

inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * (n - 1) - i;
    return i;
}

template <class S>
void check_ssim_args(const Plane<S>& a, const Plane<S>& b, const SsimOptions& opt) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("ssim: shape mismatch");
    if (opt.window < 3 || opt.window % 2 == 0)
        throw std::invalid_argument("ssim: window must be odd and >= 3");
    if (opt.dynamic_range <= 0) throw std::invalid_argument("ssim: dynamic range must be > 0");
    const Eigen::Index pad = opt.window / 2;
    if (pad > a.rows() - 1 || pad > a.cols() - 1)
        throw std::invalid_argument("ssim: image too small for reflect padding at this window");
}

template <class S>
Plane<S> reflect_pad(const Plane<S>& x, Eigen::Index pad) {
    Plane<S> p(x.rows() + 2 * pad, x.cols() + 2 * pad);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const Eigen::Index sr = reflect_index(r - pad, x.rows());
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            p(r, c) = x(sr, reflect_index(c - pad, x.cols()));
    }
    return p;
}

// Per-window factors shared by the SSIM value and its gradient.
template <class S>
struct SsimWindowTerms {
    S mu_a, mu_b, a1, a2, b1, b2;
    S value() const { return (a1 * a2) / (b1 * b2); }
};

template <class S>
SsimWindowTerms<S> ssim_window(const Plane<S>& pa, const Plane<S>& pb, Eigen::Index r0,
                               Eigen::Index c0, int win, S c1, S c2) {
    const S n = S(win) * S(win);
    S sa = 0, sb = 0;
    for (Eigen::Index r = r0; r < r0 + win; ++r)
        for (Eigen::Index c = c0; c < c0 + win; ++c) {
            sa += pa(r, c);
            sb += pb(r, c);
        }
    const S mu_a = sa / n, mu_b = sb / n;
    S va = 0, vb = 0, cov = 0;
    for (Eigen::Index r = r0; r < r0 + win; ++r)
        for (Eigen::Index c = c0; c < c0 + win; ++c) {
            const S da = pa(r, c) - mu_a, db = pb(r, c) - mu_b;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
    va /= n;
    vb /= n;
    cov /= n;
    SsimWindowTerms<S> t;
    t.mu_a = mu_a;
    t.mu_b = mu_b;
    t.a1 = 2 * mu_a * mu_b + c1;
    t.a2 = 2 * cov + c2;
    t.b1 = mu_a * mu_a + mu_b * mu_b + c1;
    t.b2 = va + vb + c2;
    return t;
}

}  // namespace detail

/// Mean structural similarity over all window positions (one per pixel).
template <class S>
S ssim(const Plane<S>& a, const Plane<S>& b, const SsimOptions& opt = {}) {
    detail::check_ssim_args(a, b, opt);
    const Eigen::Index pad = opt.window / 2;
    const S c1 = S(opt.k1 * opt.dynamic_range) * S(opt.k1 * opt.dynamic_range);
    const S c2 = S(opt.k2 * opt.dynamic_range) * S(opt.k2 * opt.dynamic_range);
    const Plane<S> pa = detail::reflect_pad(a, pad);
    const Plane<S> pb = detail::reflect_pad(b, pad);
    S total = 0;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c)
            total += detail::ssim_window(pa, pb, r, c, opt.window, c1, c2).value();
    return total / (S(a.rows()) * S(a.cols()));
}

/// d ssim(a, b) / d a, accounting for reflect-padding multiplicity.
template <class S>
Plane<S> ssim_grad_a(const Plane<S>& a, const Plane<S>& b, const SsimOptions& opt = {}) {
    detail::check_ssim_args(a, b, opt);
    const Eigen::Index pad = opt.window / 2;
    const int win = opt.window;
    const S c1 = S(opt.k1 * opt.dynamic_range) * S(opt.k1 * opt.dynamic_range);
    const S c2 = S(opt.k2 * opt.dynamic_range) * S(opt.k2 * opt.dynamic_range);
    const Plane<S> pa = detail::reflect_pad(a, pad);
    const Plane<S> pb = detail::reflect_pad(b, pad);
    const S n = S(win) * S(win);
    const S num_windows = S(a.rows()) * S(a.cols());
    Plane<S> gpad = Plane<S>::Zero(pa.rows(), pa.cols());
    for (Eigen::Index r0 = 0; r0 < a.rows(); ++r0) {
        for (Eigen::Index c0 = 0; c0 < a.cols(); ++c0) {
            const auto t = detail::ssim_window(pa, pb, r0, c0, win, c1, c2);
            const S denom = t.b1 * t.b1 * t.b2 * t.b2;
            const S common = S(2) / (n * denom);
            for (Eigen::Index r = r0; r < r0 + win; ++r) {
                for (Eigen::Index c = c0; c < c0 + win; ++c) {
                    const S da = pa(r, c) - t.mu_a;
                    const S db = pb(r, c) - t.mu_b;
                    const S d = common * ((t.mu_b * t.a2 + db * t.a1) * t.b1 * t.b2 -
                                          t.a1 * t.a2 * (t.mu_a * t.b2 + da * t.b1));
                    gpad(r, c) += d / num_windows;
                }
            }
        }
    }
    // Fold padded contributions back onto their source pixels.
    Plane<S> g = Plane<S>::Zero(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < gpad.rows(); ++r) {
        const Eigen::Index sr = detail::reflect_index(r - pad, a.rows());
        for (Eigen::Index c = 0; c < gpad.cols(); ++c)
            g(sr, detail::reflect_index(c - pad, a.cols())) += gpad(r, c);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Pixel-wise terms.
// ---------------------------------------------------------------------------

template <class S>
S mse(const Plane<S>& a, const Plane<S>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("mse: shape mismatch");
    return (a - b).squaredNorm() / S(a.size());
}

template <class S>
Plane<S> mse_grad_a(const Plane<S>& a, const Plane<S>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("mse: shape mismatch");
    return (S(2) / S(a.size())) * (a - b);
}

/// Binary cross-entropy; predictions clamped to [eps, 1-eps] before the logs.
template <class S>
S bce(const Plane<S>& pred, const Plane<S>& target, S eps = S(1e-7)) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("bce: shape mismatch");
    const auto p = pred.array().max(eps).min(S(1) - eps);
    const auto y = target.array();
    return -(y * p.log() + (S(1) - y) * (S(1) - p).log()).mean();
}

template <class S>
Plane<S> bce_grad_pred(const Plane<S>& pred, const Plane<S>& target, S eps = S(1e-7)) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("bce: shape mismatch");
    const S inv_n = S(1) / S(pred.size());
    Plane<S> g(pred.rows(), pred.cols());
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const S raw = pred.reshaped()(i);
        const S p = std::clamp(raw, eps, S(1) - eps);
        // zero gradient in the clamped region
        g.reshaped()(i) = (raw < eps || raw > S(1) - eps)
                              ? S(0)
                              : inv_n * (p - target.reshaped()(i)) / (p * (S(1) - p));
    }
    return g;
}

/// Per-pixel squared-gap ratio (boundary-emphasizing segmentation term):
/// mean of (pred - y)^2 / ((pred + y)^2 + eps).
template <class S>
S gap_term(const Plane<S>& pred, const Plane<S>& target, S eps = S(1e-7)) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("gap_term: shape mismatch");
    const auto d = (pred - target).array();
    const auto s = (pred + target).array();
    return (d.square() / (s.square() + eps)).mean();
}

template <class S>
Plane<S> gap_term_grad_pred(const Plane<S>& pred, const Plane<S>& target, S eps = S(1e-7)) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("gap_term: shape mismatch");
    const S inv_n = S(1) / S(pred.size());
    Plane<S> g(pred.rows(), pred.cols());
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const S d = pred.reshaped()(i) - target.reshaped()(i);
        const S s = pred.reshaped()(i) + target.reshaped()(i);
        const S q = s * s + eps;
        g.reshaped()(i) = inv_n * (2 * d * q - d * d * 2 * s) / (q * q);
    }
    return g;
}

/// Temporal smoothness: 1/(T-1) * sum_t mean((f[t+1] - f[t])^2).
template <class S>
S tsl(const std::vector<Plane<S>>& frames) {
    if (frames.size() < 2) throw std::invalid_argument("tsl: need at least 2 frames");
    S total = 0;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        if (frames[t].rows() != frames[t + 1].rows() || frames[t].cols() != frames[t + 1].cols())
            throw std::invalid_argument("tsl: frame shape mismatch");
        total += (frames[t + 1] - frames[t]).squaredNorm() / S(frames[t].size());
    }
    return total / S(frames.size() - 1);
}

// ---------------------------------------------------------------------------
// Composite losses. The structural-similarity contribution enters as
// (1 - SSIM) so every term is non-negative and jointly minimized.
// ---------------------------------------------------------------------------

struct SpeckleLossWeights {
    double alpha1 = 1.0;   // MSE
    double beta1 = 0.5;    // 1 - SSIM
    double gamma1 = 1e-4;  // total variation of the prediction
    void validate() const {
        if (alpha1 < 0 || beta1 < 0 || gamma1 < 0 || alpha1 + beta1 + gamma1 <= 0)
            throw std::invalid_argument("SpeckleLossWeights: need non-negative weights, one positive");
    }
};

struct SegLossWeights {
    double alpha2 = 1.0;  // BCE
    double beta2 = 0.5;   // gap term
    double epsilon = 1e-7;
    void validate() const {
        if (epsilon <= 0) throw std::invalid_argument("SegLossWeights: epsilon must be > 0");
        if (alpha2 < 0 || beta2 < 0 || alpha2 + beta2 <= 0)
            throw std::invalid_argument("SegLossWeights: need non-negative weights, one positive");
    }
};

struct ForecastLossWeights {
    double alpha3 = 1.0;  // MSE
    double beta3 = 0.5;   // 1 - SSIM
    double gamma3 = 0.1;  // temporal smoothness vs the last observed frame
    void validate() const {
        if (alpha3 < 0 || beta3 < 0 || gamma3 < 0 || alpha3 + beta3 + gamma3 <= 0)
            throw std::invalid_argument("ForecastLossWeights: need non-negative weights, one positive");
    }
};

template <class S>
S speckle_loss(const Plane<S>& pred, const Plane<S>& target, const SpeckleLossWeights& w,
               const SsimOptions& opt = {}) {
    w.validate();
    return S(w.alpha1) * mse(pred, target) + S(w.beta1) * (S(1) - ssim(pred, target, opt)) +
           S(w.gamma1) * tv_penalty(pred);
}

template <class S>
Plane<S> speckle_loss_grad(const Plane<S>& pred, const Plane<S>& target,
                           const SpeckleLossWeights& w, const SsimOptions& opt = {}) {
    w.validate();
    Plane<S> g = S(w.alpha1) * mse_grad_a(pred, target);
    if (w.beta1 != 0) g -= S(w.beta1) * ssim_grad_a(pred, target, opt);
    if (w.gamma1 != 0) g += S(w.gamma1) * tv_penalty_grad(pred);
    return g;
}

template <class S>
S seg_loss(const Plane<S>& pred, const Plane<S>& target, const SegLossWeights& w) {
    w.validate();
    return S(w.alpha2) * bce(pred, target, S(w.epsilon)) +
           S(w.beta2) * gap_term(pred, target, S(w.epsilon));
}

template <class S>
Plane<S> seg_loss_grad(const Plane<S>& pred, const Plane<S>& target, const SegLossWeights& w) {
    w.validate();
    Plane<S> g = S(w.alpha2) * bce_grad_pred(pred, target, S(w.epsilon));
    if (w.beta2 != 0) g += S(w.beta2) * gap_term_grad_pred(pred, target, S(w.epsilon));
    return g;
}

/// Single-step forecast objective; the smoothness term compares the predicted
/// frame against the last observed (context) frame.
template <class S>
S forecast_loss(const Plane<S>& pred, const Plane<S>& target, const Plane<S>& context,
                const ForecastLossWeights& w, const SsimOptions& opt = {}) {
    w.validate();
    return S(w.alpha3) * mse(pred, target) + S(w.beta3) * (S(1) - ssim(pred, target, opt)) +
           S(w.gamma3) * tsl(std::vector<Plane<S>>{context, pred});
}

template <class S>
Plane<S> forecast_loss_grad(const Plane<S>& pred, const Plane<S>& target, const Plane<S>& context,
                            const ForecastLossWeights& w, const SsimOptions& opt = {}) {
    w.validate();
    Plane<S> g = S(w.alpha3) * mse_grad_a(pred, target);
    if (w.beta3 != 0) g -= S(w.beta3) * ssim_grad_a(pred, target, opt);
    if (w.gamma3 != 0) g += S(w.gamma3) * mse_grad_a(pred, context);
    return g;
}

}  // namespace hydrocube
