#pragma once

#include "hydrocube/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace hydrocube::nn {

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Channel-major activation tensor: row i of `m` is channel i, flattened
/// row-major over (rows, cols).
template <class S>
struct Tensor {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    RowMat<S> m;

    Tensor() = default;
    Tensor(int ch, int h, int w) : channels(ch), rows(h), cols(w), m(RowMat<S>::Zero(ch, h * w)) {}

    static Tensor zeros(int ch, int h, int w) { return Tensor(ch, h, w); }

    static Tensor from_plane(const Plane<S>& p) {
        Tensor t(1, int(p.rows()), int(p.cols()));
        t.m.row(0) = Eigen::Map<const Eigen::RowVectorX<S>>(p.data(), p.size());
        return t;
    }

    Plane<S> to_plane(int channel = 0) const {
        Plane<S> p(rows, cols);
        Eigen::Map<Eigen::RowVectorX<S>>(p.data(), p.size()) = m.row(channel);
        return p;
    }

    S operator()(int ch, int r, int c) const { return m(ch, r * cols + c); }
    S& operator()(int ch, int r, int c) { return m(ch, r * cols + c); }

    bool same_shape(const Tensor& o) const {
        return channels == o.channels && rows == o.rows && cols == o.cols;
    }
};

/// Trainable weight block. Interpretation of the matrix shape is up to the
/// op that owns it (conv: out_ch x in_ch*k*k; bias: out_ch x 1).
template <class S>
struct Param {
    std::string name;
    RowMat<S> value;
    RowMat<S> grad;

    Param() = default;
    Param(std::string n, int rows, int cols)
        : name(std::move(n)), value(RowMat<S>::Zero(rows, cols)), grad(RowMat<S>::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
    std::int64_t count() const { return value.size(); }
};

}  // namespace hydrocube::nn
