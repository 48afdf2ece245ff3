#pragma once

#include <utility>
#include <vector>

#include "strsparse/layers.hpp"
#include "strsparse/rng.hpp"
#include "strsparse/str_ops.hpp"
#include "strsparse/tensor.hpp"

namespace strs {

/// Gated recurrent cell whose projection matrices are square low-rank
/// products gated by learnable mask vectors:
///   W = (W1 ⊙ 1 m~_W^T) W2,   U = (U1 ⊙ 1 m~_U^T) U2,
/// with m~ the soft-thresholded masks; nnz(m~) bounds the effective rank.
/// Recurrence per step (row-vector convention):
///   a_t = x_t W + h_{t-1} U
///   z_t = sigmoid(a_t + b_z),  c_t = tanh(a_t + b_h)
///   h_t = (zeta (1 - z_t) + nu) ⊙ c_t + z_t ⊙ h_{t-1}
/// zeta and nu are sigmoid-squashed trained scalars. Gate biases and the
/// final classifier stay dense and carry no thresholds. Masks use the
/// exponential threshold function, one trainable s per mask entry.
class LowRankFastGRNN {
public:
    LowRankFastGRNN(std::int64_t input_dim, std::int64_t hidden_dim, std::int64_t classes,
                    double s_init, Rng& rng);

    /// One recurrence step, pure: x_t [1,D], h_prev [1,Dh] -> h_t [1,Dh].
    Tensor step(const Tensor& x_t, const Tensor& h_prev) const;

    /// Full-sequence forward: x [T, D] -> logits [1, classes]. Caches the
    /// per-step activations for backward().
    Tensor forward(const Tensor& seq);

    /// BPTT from d(loss)/d(logits); accumulates all parameter gradients.
    void backward(const Tensor& grad_logits);

    void collect_params(std::vector<ParamRef>& out);
    void zero_grads();

    /// (nnz(m~_W), nnz(m~_U)).
    std::pair<std::int64_t, std::int64_t> effective_rank() const;

    Tensor effective_w() const;
    Tensor effective_u() const;
    Tensor mask_w() const { return str_forward(m_w_, p_w_); }
    Tensor mask_u() const { return str_forward(m_u_, p_u_); }

    std::int64_t input_dim() const { return input_dim_; }
    std::int64_t hidden_dim() const { return hidden_dim_; }
    StrParam& w_param() { return p_w_; }
    StrParam& u_param() { return p_u_; }
    /// Force both masks dense: thresholds pinned at zero (full-rank baseline).
    void freeze_masks_dense();

private:
    std::int64_t input_dim_, hidden_dim_, classes_;

    Tensor w1_, w2_;  // [D,D], [D,Dh]
    Tensor u1_, u2_;  // [Dh,Dh], [Dh,Dh]
    Tensor m_w_, m_u_;
    StrParam p_w_, p_u_;
    Tensor b_z_, b_h_;
    Tensor zeta_raw_, nu_raw_;  // scalars, squashed through sigmoid
    Tensor classifier_;         // [classes, Dh]

    Tensor g_w1_, g_w2_, g_u1_, g_u2_, g_m_w_, g_m_u_, g_s_w_, g_s_u_;
    Tensor g_b_z_, g_b_h_, g_zeta_, g_nu_, g_classifier_;

    // forward cache
    Tensor cached_seq_;
    std::vector<Tensor> hs_;  // h_0..h_T, each [1,Dh]
    std::vector<Tensor> zs_, cs_, as_;
    Tensor cached_w_, cached_u_;   // effective matrices
    Tensor cached_mw_t_, cached_mu_t_;
};

}  // namespace strs
