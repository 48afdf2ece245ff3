#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strsparse/layers.hpp"
#include "strsparse/tensor.hpp"

namespace strs {

/// Training knobs. lambda is the single weight-decay coefficient shared by
/// the weights and the threshold parameters s; it is the knob that controls
/// how much sparsity the run ends up with.
struct TrainConfig {
    double lambda = 0.0;
    double s_init = -8.0;
    double base_lr = 0.1;
    double momentum = 0.9;
    std::int64_t batch_size = 32;
    std::int64_t epochs = 20;
    std::int64_t warmup_epochs = 2;
    std::uint64_t seed = 1;
    /// Pin every threshold at exactly zero and skip s updates (dense limit).
    bool freeze_thresholds = false;

    void validate() const;
};

/// Warm-up then cosine decay: linear 0 -> base_lr over warmup_steps, then
/// 0.5*base_lr*(1+cos(pi*(step-warmup)/(total-warmup))).
double cosine_lr(std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps,
                 double base_lr);

/// One SGD step with momentum and coupled L2 decay:
///   velocity <- momentum*velocity + (grad + lambda*param)
///   param    <- param - lr*velocity
/// With momentum 0 and zero grad this is exactly param *= (1 - lr*lambda).
/// Threshold parameters s take the same update with grad = dL/ds.
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double lambda,
              double momentum);

/// Momentum-SGD over a fixed parameter list; velocities are created on
/// registration and keyed by position, so the caller must pass the same list
/// every step.
class SgdMomentum {
public:
    SgdMomentum(std::vector<ParamRef> params, double momentum);

    /// skip_thresholds freezes every is_threshold parameter for this step.
    void step(double lr, double lambda, bool skip_thresholds = false);

    std::vector<ParamRef>& params() { return params_; }
    Tensor& velocity(std::size_t i) { return velocities_[i]; }

private:
    std::vector<ParamRef> params_;
    std::vector<Tensor> velocities_;
    double momentum_;
};

}  // namespace strs
