#pragma once

// Checkpoint layout: <dir>/spec.json (written by the model owner) plus
// <dir>/weights.bin, the f32 little-endian concatenation of every Param in
// declaration order.

#include "hydrocube/nn/tensor.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace hydrocube::nn {

inline void save_weights(const std::filesystem::path& file, const std::vector<Param<float>*>& params) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    for (const Param<float>* p : params)
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  std::streamsize(p->value.size() * sizeof(float)));
    if (!out) throw std::runtime_error("short write: " + file.string());
}

inline void load_weights(const std::filesystem::path& file, const std::vector<Param<float>*>& params) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::size_t expected = 0;
    for (const Param<float>* p : params) expected += std::size_t(p->value.size());
    if (std::size_t(in.tellg()) != expected * sizeof(float))
        throw std::runtime_error("weight blob size mismatch: " + file.string());
    in.seekg(0);
    for (Param<float>* p : params)
        in.read(reinterpret_cast<char*>(p->value.data()),
                std::streamsize(p->value.size() * sizeof(float)));
    if (!in) throw std::runtime_error("short read: " + file.string());
}

/// Snapshot/restore for best-epoch tracking during training.
template <class S>
std::vector<RowMat<S>> snapshot_params(const std::vector<Param<S>*>& params) {
    std::vector<RowMat<S>> out;
    out.reserve(params.size());
    for (const Param<S>* p : params) out.push_back(p->value);
    return out;
}

template <class S>
void restore_params(const std::vector<Param<S>*>& params, const std::vector<RowMat<S>>& snap) {
    if (snap.size() != params.size()) throw std::invalid_argument("restore_params: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace hydrocube::nn
