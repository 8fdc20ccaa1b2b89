#pragma once

// Adam with bias correction. The model is tiny, so there is one state pair
// per parameter tensor and a shared step counter.

#include <vector>

#include "ted/common.hpp"
#include "ted/tensor.hpp"

namespace ted {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Tensor m;
    Tensor v;
};

// One bias-corrected update of a single tensor. `t` is the 1-based step.
inline void adam_step(Tensor& param, const Tensor& grad, AdamState& state, long t,
                      const AdamConfig& cfg = {}) {
    if (!param.same_shape(grad))
        throw ShapeError("adam_step: gradient shape " + grad.shape_str() +
                         " does not match parameter " + param.shape_str());
    if (state.m.numel() == 0) {
        state.m = Tensor(param.shape(), 0.0);
        state.v = Tensor(param.shape(), 0.0);
    }
    if (!state.m.same_shape(param))
        throw ShapeError("adam_step: optimizer state shape does not match parameter");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.numel(); ++i) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// Optimizer over a fixed-order parameter list.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
        if (params.size() != grads.size())
            throw ShapeError("Adam::step: parameter/gradient count mismatch");
        if (states_.empty()) states_.resize(params.size());
        if (states_.size() != params.size())
            throw ShapeError("Adam::step: state count mismatch");
        ++t_;
        for (std::size_t i = 0; i < params.size(); ++i)
            adam_step(*params[i], *grads[i], states_[i], t_, cfg_);
    }

    long steps_taken() const { return t_; }

  private:
    AdamConfig cfg_;
    std::vector<AdamState> states_;
    long t_ = 0;
};

}  // namespace ted
