#pragma once

// Define-by-run reverse-mode autodiff over channel-major tensors. A Tape owns
// the nodes of one forward pass; ops append nodes whose backward closures
// accumulate gradients into input nodes and Params. Weight sharing (the same
// Param used by several ops, or across an unrolled recurrence) falls out of
// gradient accumulation.

#include "hydrocube/nn/tensor.hpp"

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace hydrocube::nn {

template <class S>
struct Node {
    Tensor<S> value;
    Tensor<S> grad;  // allocated lazily during backward
    bool grad_ready = false;
    std::function<void()> back;  // may be empty (inputs)

    void ensure_grad() {
        if (!grad_ready) {
            grad = Tensor<S>::zeros(value.channels, value.rows, value.cols);
            grad_ready = true;
        }
    }
};

template <class S>
class Tape;

template <class S>
struct Value {
    Node<S>* node = nullptr;
    Tape<S>* tape = nullptr;
    const Tensor<S>& val() const { return node->value; }
};

template <class S>
class Tape {
  public:
    Value<S> input(Tensor<S> t) {
        Node<S>* n = make();
        n->value = std::move(t);
        return {n, this};
    }

    Node<S>* make() {
        nodes_.push_back(std::make_unique<Node<S>>());
        return nodes_.back().get();
    }

    /// Reverse sweep from `out`, seeded with dL/d out.
    void backward(Value<S> out, const Tensor<S>& seed) {
        if (!out.node->value.same_shape(seed)) throw std::invalid_argument("backward: seed shape mismatch");
        out.node->ensure_grad();
        out.node->grad.m += seed.m;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if ((*it)->grad_ready && (*it)->back) (*it)->back();
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    std::vector<std::unique_ptr<Node<S>>> nodes_;
};

// ---------------------------------------------------------------------------
// im2col / col2im for stride-1 same-padding convolution, odd kernels.
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
void im2col(const Tensor<S>& x, int k, RowMat<S>& out) {
    const int pad = k / 2, h = x.rows, w = x.cols;
    out.setZero(x.channels * k * k, h * w);
    for (int ci = 0; ci < x.channels; ++ci) {
        for (int dr = 0; dr < k; ++dr) {
            for (int dc = 0; dc < k; ++dc) {
                const int krow = (ci * k + dr) * k + dc;
                const int roff = dr - pad, coff = dc - pad;
                const int c_lo = std::max(0, -coff), c_hi = std::min(w, w - coff);
                if (c_lo >= c_hi) continue;
                for (int r = 0; r < h; ++r) {
                    const int sr = r + roff;
                    if (sr < 0 || sr >= h) continue;
                    out.row(krow).segment(r * w + c_lo, c_hi - c_lo) =
                        x.m.row(ci).segment(sr * w + c_lo + coff, c_hi - c_lo);
                }
            }
        }
    }
}

template <class S>
void col2im_add(const RowMat<S>& cols, int k, Tensor<S>& x_grad) {
    const int pad = k / 2, h = x_grad.rows, w = x_grad.cols;
    for (int ci = 0; ci < x_grad.channels; ++ci) {
        for (int dr = 0; dr < k; ++dr) {
            for (int dc = 0; dc < k; ++dc) {
                const int krow = (ci * k + dr) * k + dc;
                const int roff = dr - pad, coff = dc - pad;
                const int c_lo = std::max(0, -coff), c_hi = std::min(w, w - coff);
                if (c_lo >= c_hi) continue;
                for (int r = 0; r < h; ++r) {
                    const int sr = r + roff;
                    if (sr < 0 || sr >= h) continue;
                    x_grad.m.row(ci).segment(sr * w + c_lo + coff, c_hi - c_lo) +=
                        cols.row(krow).segment(r * w + c_lo, c_hi - c_lo);
                }
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

/// Same-padding stride-1 convolution. w: (out_ch x in_ch*k*k), b: (out_ch x 1).
template <class S>
Value<S> conv2d(Value<S> x, Param<S>& w, Param<S>& b, int k) {
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("conv2d: kernel must be odd");
    const int in_ch = x.val().channels;
    const int out_ch = int(w.value.rows());
    if (w.value.cols() != in_ch * k * k)
        throw std::invalid_argument("conv2d: weight shape does not match input channels");
    if (b.value.rows() != out_ch || b.value.cols() != 1)
        throw std::invalid_argument("conv2d: bias shape mismatch");

    Node<S>* n = x.tape->make();
    n->value.channels = out_ch;
    n->value.rows = x.val().rows;
    n->value.cols = x.val().cols;
    RowMat<S> cols;
    detail::im2col(x.val(), k, cols);
    n->value.m.noalias() = w.value * cols;
    n->value.m.colwise() += b.value.col(0);

    Node<S>* xn = x.node;
    Param<S>* wp = &w;
    Param<S>* bp = &b;
    n->back = [n, xn, wp, bp, k]() {
        RowMat<S> cols_again;
        detail::im2col(xn->value, k, cols_again);
        bp->grad.col(0) += n->grad.m.rowwise().sum();
        wp->grad.noalias() += n->grad.m * cols_again.transpose();
        xn->ensure_grad();
        RowMat<S> back_cols;
        back_cols.noalias() = wp->value.transpose() * n->grad.m;
        detail::col2im_add(back_cols, k, xn->grad);
    };
    return {n, x.tape};
}

template <class S>
Value<S> relu(Value<S> x) {
    Node<S>* n = x.tape->make();
    n->value = x.val();
    n->value.m = n->value.m.cwiseMax(S(0));
    Node<S>* xn = x.node;
    n->back = [n, xn]() {
        xn->ensure_grad();
        xn->grad.m.array() += n->grad.m.array() * (n->value.m.array() > S(0)).template cast<S>();
    };
    return {n, x.tape};
}

template <class S>
Value<S> sigmoid(Value<S> x) {
    Node<S>* n = x.tape->make();
    n->value = x.val();
    n->value.m = (S(1) / (S(1) + (-n->value.m.array()).exp())).matrix();
    Node<S>* xn = x.node;
    n->back = [n, xn]() {
        xn->ensure_grad();
        xn->grad.m.array() +=
            n->grad.m.array() * n->value.m.array() * (S(1) - n->value.m.array());
    };
    return {n, x.tape};
}

template <class S>
Value<S> tanh_op(Value<S> x) {
    Node<S>* n = x.tape->make();
    n->value = x.val();
    n->value.m = n->value.m.array().tanh().matrix();
    Node<S>* xn = x.node;
    n->back = [n, xn]() {
        xn->ensure_grad();
        xn->grad.m.array() += n->grad.m.array() * (S(1) - n->value.m.array().square());
    };
    return {n, x.tape};
}

template <class S>
Value<S> add(Value<S> a, Value<S> b) {
    if (!a.val().same_shape(b.val())) throw std::invalid_argument("add: shape mismatch");
    Node<S>* n = a.tape->make();
    n->value = a.val();
    n->value.m += b.val().m;
    Node<S>* an = a.node;
    Node<S>* bn = b.node;
    n->back = [n, an, bn]() {
        an->ensure_grad();
        an->grad.m += n->grad.m;
        bn->ensure_grad();
        bn->grad.m += n->grad.m;
    };
    return {n, a.tape};
}

template <class S>
Value<S> sub(Value<S> a, Value<S> b) {
    if (!a.val().same_shape(b.val())) throw std::invalid_argument("sub: shape mismatch");
    Node<S>* n = a.tape->make();
    n->value = a.val();
    n->value.m -= b.val().m;
    Node<S>* an = a.node;
    Node<S>* bn = b.node;
    n->back = [n, an, bn]() {
        an->ensure_grad();
        an->grad.m += n->grad.m;
        bn->ensure_grad();
        bn->grad.m -= n->grad.m;
    };
    return {n, a.tape};
}

template <class S>
Value<S> hadamard(Value<S> a, Value<S> b) {
    if (!a.val().same_shape(b.val())) throw std::invalid_argument("hadamard: shape mismatch");
    Node<S>* n = a.tape->make();
    n->value = a.val();
    n->value.m.array() *= b.val().m.array();
    Node<S>* an = a.node;
    Node<S>* bn = b.node;
    n->back = [n, an, bn]() {
        an->ensure_grad();
        an->grad.m.array() += n->grad.m.array() * bn->value.m.array();
        bn->ensure_grad();
        bn->grad.m.array() += n->grad.m.array() * an->value.m.array();
    };
    return {n, a.tape};
}

template <class S>
Value<S> concat_channels(const std::vector<Value<S>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
    int total = 0;
    for (const auto& v : xs) {
        if (v.val().rows != xs[0].val().rows || v.val().cols != xs[0].val().cols)
            throw std::invalid_argument("concat_channels: spatial shape mismatch");
        total += v.val().channels;
    }
    Node<S>* n = xs[0].tape->make();
    n->value = Tensor<S>(total, xs[0].val().rows, xs[0].val().cols);
    int at = 0;
    for (const auto& v : xs) {
        n->value.m.middleRows(at, v.val().channels) = v.val().m;
        at += v.val().channels;
    }
    std::vector<Node<S>*> in_nodes;
    for (const auto& v : xs) in_nodes.push_back(v.node);
    n->back = [n, in_nodes]() {
        int row = 0;
        for (Node<S>* xn : in_nodes) {
            xn->ensure_grad();
            xn->grad.m += n->grad.m.middleRows(row, xn->value.channels);
            row += xn->value.channels;
        }
    };
    return {n, xs[0].tape};
}

template <class S>
Value<S> slice_channels(Value<S> x, int begin, int count) {
    if (begin < 0 || count < 1 || begin + count > x.val().channels)
        throw std::invalid_argument("slice_channels: range out of bounds");
    Node<S>* n = x.tape->make();
    n->value = Tensor<S>(count, x.val().rows, x.val().cols);
    n->value.m = x.val().m.middleRows(begin, count);
    Node<S>* xn = x.node;
    n->back = [n, xn, begin, count]() {
        xn->ensure_grad();
        xn->grad.m.middleRows(begin, count) += n->grad.m;
    };
    return {n, x.tape};
}

/// 2x2 max pooling, stride 2; spatial dimensions must be even.
template <class S>
Value<S> maxpool2(Value<S> x) {
    const int h = x.val().rows, w = x.val().cols, ch = x.val().channels;
    if (h % 2 || w % 2) throw std::invalid_argument("maxpool2: odd spatial size");
    Node<S>* n = x.tape->make();
    n->value = Tensor<S>(ch, h / 2, w / 2);
    auto argmax = std::make_shared<std::vector<int>>(std::size_t(ch) * (h / 2) * (w / 2));
    for (int c = 0; c < ch; ++c) {
        for (int r = 0; r < h / 2; ++r) {
            for (int cc = 0; cc < w / 2; ++cc) {
                int best_idx = (2 * r) * w + 2 * cc;
                S best = x.val().m(c, best_idx);
                for (int dr = 0; dr < 2; ++dr)
                    for (int dc = 0; dc < 2; ++dc) {
                        const int idx = (2 * r + dr) * w + (2 * cc + dc);
                        if (x.val().m(c, idx) > best) {
                            best = x.val().m(c, idx);
                            best_idx = idx;
                        }
                    }
                n->value.m(c, r * (w / 2) + cc) = best;
                (*argmax)[std::size_t(c) * (h / 2) * (w / 2) + r * (w / 2) + cc] = best_idx;
            }
        }
    }
    Node<S>* xn = x.node;
    n->back = [n, xn, argmax]() {
        xn->ensure_grad();
        const int out_hw = n->value.rows * n->value.cols;
        for (int c = 0; c < n->value.channels; ++c)
            for (int i = 0; i < out_hw; ++i)
                xn->grad.m(c, (*argmax)[std::size_t(c) * out_hw + i]) += n->grad.m(c, i);
    };
    return {n, x.tape};
}

/// Nearest-neighbour 2x upsampling.
template <class S>
Value<S> upsample2(Value<S> x) {
    const int h = x.val().rows, w = x.val().cols, ch = x.val().channels;
    Node<S>* n = x.tape->make();
    n->value = Tensor<S>(ch, 2 * h, 2 * w);
    for (int c = 0; c < ch; ++c)
        for (int r = 0; r < 2 * h; ++r)
            for (int cc = 0; cc < 2 * w; ++cc)
                n->value.m(c, r * 2 * w + cc) = x.val().m(c, (r / 2) * w + cc / 2);
    Node<S>* xn = x.node;
    n->back = [n, xn]() {
        xn->ensure_grad();
        const int w_in = xn->value.cols;
        for (int c = 0; c < n->value.channels; ++c)
            for (int r = 0; r < n->value.rows; ++r)
                for (int cc = 0; cc < n->value.cols; ++cc)
                    xn->grad.m(c, (r / 2) * w_in + cc / 2) += n->grad.m(c, r * n->value.cols + cc);
    };
    return {n, x.tape};
}

}  // namespace hydrocube::nn
