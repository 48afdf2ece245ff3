#pragma once

#include <cstdint>
#include <string>

#include "strsparse/tensor.hpp"

namespace strs {

// ----- threshold functions ----------------------------------------------------

enum class ThresholdKind { kSigmoid, kExponential };

/// Monotone positive map from the trainable scalar s to the pruning
/// threshold alpha. Sigmoid: k/(1+e^-s), bounded by k; exponential: k*e^s.
struct ThresholdFn {
    ThresholdKind kind = ThresholdKind::kSigmoid;
    double k = 1.0;
};

/// alpha = g(s). For the sigmoid, s < -745 evaluates to exactly 0 so that
/// fully-inactive thresholds cannot leak denormals into sparsity counts.
double g_eval(const ThresholdFn& fn, double s);

/// Analytic derivative of g_eval.
double g_prime(const ThresholdFn& fn, double s);

/// sign(w) * max(|w|-alpha, 0); zero iff |w| <= alpha. sign(0) = 0.
double soft_threshold(double w, double alpha);

ThresholdKind threshold_kind_from_string(const std::string& name);
std::string to_string(ThresholdKind kind);

// ----- learnable threshold parameters -----------------------------------------

enum class Granularity { kGlobal, kPerLayer, kPerChannel, kPerWeight };

Granularity granularity_from_string(const std::string& name);
std::string to_string(Granularity g);

/// Trainable threshold state for one weight tensor. `s` holds a single entry
/// for global/per-layer scope, one entry per output channel for per-channel,
/// and one entry per weight for per-weight. Global sharing across layers is
/// the trainer's job (it sums the per-layer s-gradients and mirrors one
/// value back); the per-layer kernels here are identical for both scopes.
struct StrParam {
    Granularity granularity = Granularity::kPerLayer;
    Tensor s;
    ThresholdFn fn;

    static StrParam make(Granularity g, const Tensor& weight_like, double s_init,
                         ThresholdFn fn = {});
    /// Threshold(s) evaluated from s; scalar for global/per-layer, vector of
    /// length C for per-channel, full weight shape for per-weight.
    Tensor thresholds() const;
    void check_compatible(const Tensor& weight) const;
};

// ----- forward / backward ------------------------------------------------------

/// Elementwise soft threshold of W with alpha broadcast per granularity.
Tensor str_forward(const Tensor& weight, const StrParam& p);

/// Sub-gradient w.r.t. W: upstream gradient masked to the support of W~.
Tensor grad_w(const Tensor& upstream, const Tensor& sparse_weight);

/// Sub-gradient w.r.t. s: -g'(s) * sum over each entry's scope of
/// upstream ⊙ sign(W) ⊙ 1{|W| > g(s)}. Returns the shape of p.s.
Tensor grad_s(const Tensor& upstream, const Tensor& weight, const StrParam& p);

/// Fraction of exactly-zero entries.
double sparsity(const Tensor& t);
std::int64_t nonzero_count(const Tensor& t);

}  // namespace strs
