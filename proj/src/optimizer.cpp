#include "strsparse/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "strsparse/kernels.hpp"

namespace strs {

void TrainConfig::validate() const {
    if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (warmup_epochs < 0 || warmup_epochs >= epochs)
        throw std::invalid_argument("warmup_epochs must be in [0, epochs)");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (base_lr <= 0) throw std::invalid_argument("base_lr must be > 0");
    if (momentum < 0 || momentum >= 1) throw std::invalid_argument("momentum must be in [0,1)");
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps,
                 double base_lr) {
    if (step < 0 || step >= total_steps)
        throw std::out_of_range("cosine_lr: step " + std::to_string(step) +
                                " outside [0," + std::to_string(total_steps) + ")");
    if (step < warmup_steps)
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    const double t = static_cast<double>(step - warmup_steps) /
                     static_cast<double>(total_steps - warmup_steps);
    return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double lambda,
              double momentum) {
    require_same_shape(param, grad, "sgd_step");
    require_same_shape(param, velocity, "sgd_step");
    kern::ops().sgd_update(param.data(), velocity.data(), grad.data(),
                           static_cast<std::size_t>(param.numel()), lr, lambda, momentum);
}

SgdMomentum::SgdMomentum(std::vector<ParamRef> params, double momentum)
    : params_(std::move(params)), momentum_(momentum) {
    velocities_.reserve(params_.size());
    for (const ParamRef& p : params_) velocities_.emplace_back(p.value->shape());
}

void SgdMomentum::step(double lr, double lambda, bool skip_thresholds) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (skip_thresholds && params_[i].is_threshold) continue;
        sgd_step(*params_[i].value, *params_[i].grad, velocities_[i], lr, lambda, momentum_);
    }
}

}  // namespace strs
