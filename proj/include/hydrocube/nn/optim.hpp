#pragma once

#include "hydrocube/nn/tensor.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace hydrocube::nn {

/// Adam with bias correction. step() consumes accumulated gradients (scaled
/// by `grad_scale`, typically 1/batch) and zeroes them.
template <class S>
class Adam {
  public:
    Adam(std::vector<Param<S>*> params, double lr)
        : params_(std::move(params)), lr_(lr) {
        for (Param<S>* p : params_)
            state_.push_back({RowMat<S>::Zero(p->value.rows(), p->value.cols()),
                              RowMat<S>::Zero(p->value.rows(), p->value.cols())});
    }

    void step(double grad_scale = 1.0) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Param<S>& p = *params_[i];
            auto g = (p.grad * S(grad_scale)).eval();
            state_[i].m = S(beta1_) * state_[i].m + S(1 - beta1_) * g;
            state_[i].v.array() = S(beta2_) * state_[i].v.array() + S(1 - beta2_) * g.array().square();
            p.value.array() -= S(lr_) * (state_[i].m.array() / S(bc1)) /
                               ((state_[i].v.array() / S(bc2)).sqrt() + S(eps_));
            p.zero_grad();
        }
    }

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

  private:
    struct State {
        RowMat<S> m, v;
    };
    std::vector<Param<S>*> params_;
    std::vector<State> state_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int t_ = 0;
};

/// He-uniform fan-in initialization for a conv weight (out_ch x in_ch*k*k).
template <class S>
void init_conv(Param<S>& w, Param<S>& b, std::mt19937_64& rng, double gain = 1.0) {
    const double limit = gain * std::sqrt(6.0 / double(w.value.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.reshaped()(i) = S(dist(rng));
    b.value.setZero();
}

}  // namespace hydrocube::nn
