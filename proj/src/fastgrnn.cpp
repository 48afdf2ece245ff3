#include "strsparse/fastgrnn.hpp"

#include <cmath>

#include "strsparse/kernels.hpp"

namespace strs {

namespace {

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void gaussian_init(Tensor& t, double std, Rng& rng) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = std * rng.normal();
}

// B = A with column j scaled by m[j]
Tensor scale_columns(const Tensor& a, const Tensor& m) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.dim(0); ++i)
        for (std::int64_t j = 0; j < a.dim(1); ++j) out.at2(i, j) = a.at2(i, j) * m[j];
    return out;
}

}  // namespace

LowRankFastGRNN::LowRankFastGRNN(std::int64_t input_dim, std::int64_t hidden_dim,
                                 std::int64_t classes, double s_init, Rng& rng)
    : input_dim_(input_dim),
      hidden_dim_(hidden_dim),
      classes_(classes),
      w1_({input_dim, input_dim}),
      w2_({input_dim, hidden_dim}),
      u1_({hidden_dim, hidden_dim}),
      u2_({hidden_dim, hidden_dim}),
      m_w_(Tensor::full({input_dim}, 1.0)),
      m_u_(Tensor::full({hidden_dim}, 1.0)),
      p_w_(StrParam::make(Granularity::kPerWeight, m_w_, s_init,
                          {ThresholdKind::kExponential, 1.0})),
      p_u_(StrParam::make(Granularity::kPerWeight, m_u_, s_init,
                          {ThresholdKind::kExponential, 1.0})),
      b_z_({1, hidden_dim}),
      b_h_({1, hidden_dim}),
      zeta_raw_(Tensor::scalar(2.0)),   // zeta starts near 0.88
      nu_raw_(Tensor::scalar(-4.0)),    // nu starts near 0.018
      classifier_({classes, hidden_dim}),
      g_w1_(w1_.shape()),
      g_w2_(w2_.shape()),
      g_u1_(u1_.shape()),
      g_u2_(u2_.shape()),
      g_m_w_(m_w_.shape()),
      g_m_u_(m_u_.shape()),
      g_s_w_(p_w_.s.shape()),
      g_s_u_(p_u_.s.shape()),
      g_b_z_(b_z_.shape()),
      g_b_h_(b_h_.shape()),
      g_zeta_({1}),
      g_nu_({1}),
      g_classifier_(classifier_.shape()) {
    gaussian_init(w1_, 0.1, rng);
    gaussian_init(w2_, 0.1, rng);
    gaussian_init(u1_, 0.1, rng);
    gaussian_init(u2_, 0.1, rng);
    gaussian_init(classifier_, 0.1, rng);
    for (double& v : b_z_.vec()) v = 1.0;  // bias the update gate toward carry-over
}

void LowRankFastGRNN::freeze_masks_dense() {
    for (double& v : p_w_.s.vec()) v = -1e9;
    for (double& v : p_u_.s.vec()) v = -1e9;
}

Tensor LowRankFastGRNN::effective_w() const {
    return matmul(scale_columns(w1_, str_forward(m_w_, p_w_)), w2_);
}

Tensor LowRankFastGRNN::effective_u() const {
    return matmul(scale_columns(u1_, str_forward(m_u_, p_u_)), u2_);
}

Tensor LowRankFastGRNN::step(const Tensor& x_t, const Tensor& h_prev) const {
    if (x_t.rank() != 2 || x_t.dim(1) != input_dim_ || h_prev.rank() != 2 ||
        h_prev.dim(1) != hidden_dim_)
        throw ShapeError("fastgrnn step: got x " + x_t.shape_str() + ", h " +
                         h_prev.shape_str() + ", expected [1," + std::to_string(input_dim_) +
                         "] and [1," + std::to_string(hidden_dim_) + "]");
    const Tensor a = add(matmul(x_t, effective_w()), matmul(h_prev, effective_u()));
    const Tensor z = sigmoid(add(a, b_z_));
    const Tensor c = tanh_t(add(a, b_h_));
    const double zeta = sigmoid_scalar(zeta_raw_[0]);
    const double nu = sigmoid_scalar(nu_raw_[0]);
    Tensor h({1, hidden_dim_});
    for (std::int64_t j = 0; j < hidden_dim_; ++j)
        h[j] = (zeta * (1.0 - z[j]) + nu) * c[j] + z[j] * h_prev[j];
    return h;
}

Tensor LowRankFastGRNN::forward(const Tensor& seq) {
    if (seq.rank() != 2 || seq.dim(1) != input_dim_)
        throw ShapeError("fastgrnn: expected sequence [T," + std::to_string(input_dim_) +
                         "], got " + seq.shape_str());
    cached_seq_ = seq;
    cached_mw_t_ = str_forward(m_w_, p_w_);
    cached_mu_t_ = str_forward(m_u_, p_u_);
    cached_w_ = matmul(scale_columns(w1_, cached_mw_t_), w2_);
    cached_u_ = matmul(scale_columns(u1_, cached_mu_t_), u2_);

    const std::int64_t steps = seq.dim(0);
    const double zeta = sigmoid_scalar(zeta_raw_[0]);
    const double nu = sigmoid_scalar(nu_raw_[0]);
    hs_.assign(1, Tensor({1, hidden_dim_}));
    zs_.clear();
    cs_.clear();
    as_.clear();
    for (std::int64_t t = 0; t < steps; ++t) {
        Tensor xt({1, input_dim_});
        std::copy(seq.data() + t * input_dim_, seq.data() + (t + 1) * input_dim_, xt.data());
        const Tensor a = add(matmul(xt, cached_w_), matmul(hs_.back(), cached_u_));
        const Tensor z = sigmoid(add(a, b_z_));
        const Tensor c = tanh_t(add(a, b_h_));
        Tensor h({1, hidden_dim_});
        for (std::int64_t j = 0; j < hidden_dim_; ++j)
            h[j] = (zeta * (1.0 - z[j]) + nu) * c[j] + z[j] * hs_.back()[j];
        as_.push_back(a);
        zs_.push_back(z);
        cs_.push_back(c);
        hs_.push_back(h);
    }
    return matmul(hs_.back(), transpose(classifier_));
}

void LowRankFastGRNN::backward(const Tensor& grad_logits) {
    const std::int64_t steps = cached_seq_.dim(0);
    const double zeta = sigmoid_scalar(zeta_raw_[0]);
    const double nu = sigmoid_scalar(nu_raw_[0]);

    // classifier
    {
        const Tensor gc = matmul(transpose(grad_logits), hs_.back());
        kern::ops().add(g_classifier_.data(), g_classifier_.data(), gc.data(),
                        static_cast<std::size_t>(gc.numel()));
    }
    Tensor dh = matmul(grad_logits, classifier_);  // [1,Dh]

    Tensor dW({input_dim_, hidden_dim_});
    Tensor dU({hidden_dim_, hidden_dim_});
    double dzeta = 0, dnu = 0;
    const Tensor uT = transpose(cached_u_);

    for (std::int64_t t = steps - 1; t >= 0; --t) {
        const Tensor& z = zs_[static_cast<std::size_t>(t)];
        const Tensor& c = cs_[static_cast<std::size_t>(t)];
        const Tensor& hprev = hs_[static_cast<std::size_t>(t)];
        Tensor da({1, hidden_dim_});
        Tensor dhprev({1, hidden_dim_});
        for (std::int64_t j = 0; j < hidden_dim_; ++j) {
            const double g = dh[j];
            const double dc = g * (zeta * (1.0 - z[j]) + nu);
            const double dz = g * (hprev[j] - zeta * c[j]);
            dzeta += g * (1.0 - z[j]) * c[j];
            dnu += g * c[j];
            const double da_z = dz * z[j] * (1.0 - z[j]);
            const double da_c = dc * (1.0 - c[j] * c[j]);
            g_b_z_[j] += da_z;
            g_b_h_[j] += da_c;
            da[j] = da_z + da_c;
            dhprev[j] = g * z[j];
        }
        Tensor xt({1, input_dim_});
        std::copy(cached_seq_.data() + t * input_dim_,
                  cached_seq_.data() + (t + 1) * input_dim_, xt.data());
        // dW += x_t^T da ; dU += h_prev^T da
        for (std::int64_t i = 0; i < input_dim_; ++i)
            kern::ops().axpy(dW.data() + i * hidden_dim_, xt[i], da.data(),
                             static_cast<std::size_t>(hidden_dim_));
        for (std::int64_t i = 0; i < hidden_dim_; ++i)
            kern::ops().axpy(dU.data() + i * hidden_dim_, hprev[i], da.data(),
                             static_cast<std::size_t>(hidden_dim_));
        dh = add(dhprev, matmul(da, uT));
    }

    g_zeta_[0] += dzeta * zeta * (1.0 - zeta);
    g_nu_[0] += dnu * nu * (1.0 - nu);

    // through the low-rank factorizations
    // W = A W2 with A = W1 ⊙ 1 m~^T
    {
        const Tensor aMat = scale_columns(w1_, cached_mw_t_);
        const Tensor dA = matmul(dW, transpose(w2_));
        const Tensor dW2 = matmul(transpose(aMat), dW);
        kern::ops().add(g_w2_.data(), g_w2_.data(), dW2.data(),
                        static_cast<std::size_t>(dW2.numel()));
        Tensor dmt({input_dim_});
        for (std::int64_t i = 0; i < input_dim_; ++i)
            for (std::int64_t j = 0; j < input_dim_; ++j) {
                g_w1_.at2(i, j) += dA.at2(i, j) * cached_mw_t_[j];
                dmt[j] += dA.at2(i, j) * w1_.at2(i, j);
            }
        const Tensor gm = grad_w(dmt, cached_mw_t_);
        kern::ops().add(g_m_w_.data(), g_m_w_.data(), gm.data(),
                        static_cast<std::size_t>(gm.numel()));
        const Tensor gs = grad_s(dmt, m_w_, p_w_);
        kern::ops().add(g_s_w_.data(), g_s_w_.data(), gs.data(),
                        static_cast<std::size_t>(gs.numel()));
    }
    {
        const Tensor aMat = scale_columns(u1_, cached_mu_t_);
        const Tensor dA = matmul(dU, transpose(u2_));
        const Tensor dU2 = matmul(transpose(aMat), dU);
        kern::ops().add(g_u2_.data(), g_u2_.data(), dU2.data(),
                        static_cast<std::size_t>(dU2.numel()));
        Tensor dmt({hidden_dim_});
        for (std::int64_t i = 0; i < hidden_dim_; ++i)
            for (std::int64_t j = 0; j < hidden_dim_; ++j) {
                g_u1_.at2(i, j) += dA.at2(i, j) * cached_mu_t_[j];
                dmt[j] += dA.at2(i, j) * u1_.at2(i, j);
            }
        const Tensor gm = grad_w(dmt, cached_mu_t_);
        kern::ops().add(g_m_u_.data(), g_m_u_.data(), gm.data(),
                        static_cast<std::size_t>(gm.numel()));
        const Tensor gs = grad_s(dmt, m_u_, p_u_);
        kern::ops().add(g_s_u_.data(), g_s_u_.data(), gs.data(),
                        static_cast<std::size_t>(gs.numel()));
    }
}

void LowRankFastGRNN::collect_params(std::vector<ParamRef>& out) {
    out.push_back({"rnn.W1", &w1_, &g_w1_, false});
    out.push_back({"rnn.W2", &w2_, &g_w2_, false});
    out.push_back({"rnn.U1", &u1_, &g_u1_, false});
    out.push_back({"rnn.U2", &u2_, &g_u2_, false});
    out.push_back({"rnn.mW", &m_w_, &g_m_w_, false});
    out.push_back({"rnn.mU", &m_u_, &g_m_u_, false});
    out.push_back({"rnn.mW_s", &p_w_.s, &g_s_w_, true});
    out.push_back({"rnn.mU_s", &p_u_.s, &g_s_u_, true});
    out.push_back({"rnn.bz", &b_z_, &g_b_z_, false});
    out.push_back({"rnn.bh", &b_h_, &g_b_h_, false});
    out.push_back({"rnn.zeta", &zeta_raw_, &g_zeta_, false});
    out.push_back({"rnn.nu", &nu_raw_, &g_nu_, false});
    out.push_back({"rnn.classifier", &classifier_, &g_classifier_, false});
}

void LowRankFastGRNN::zero_grads() {
    for (Tensor* g : {&g_w1_, &g_w2_, &g_u1_, &g_u2_, &g_m_w_, &g_m_u_, &g_s_w_, &g_s_u_,
                      &g_b_z_, &g_b_h_, &g_zeta_, &g_nu_, &g_classifier_})
        for (double& v : g->vec()) v = 0.0;
}

std::pair<std::int64_t, std::int64_t> LowRankFastGRNN::effective_rank() const {
    return {nonzero_count(str_forward(m_w_, p_w_)), nonzero_count(str_forward(m_u_, p_u_))};
}

}  // namespace strs
