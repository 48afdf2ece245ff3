#include "strsparse/layers.hpp"

#include <cmath>

#include "strsparse/kernels.hpp"

namespace strs {

namespace {

Tensor masked_weight(const Tensor& w, const Tensor& mask) {
    require_same_shape(w, mask, "external mask");
    return hadamard(w, mask);
}

void kaiming_uniform(Tensor& w, std::int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
}

}  // namespace

// ----- StrLinear ----------------------------------------------------------------

StrLinear::StrLinear(std::string name, std::int64_t in_features, std::int64_t out_features,
                     StrParam p)
    : name_(std::move(name)),
      in_(in_features),
      out_(out_features),
      weight_({out_features, in_features}),
      grad_weight_({out_features, in_features}),
      p_(std::move(p)),
      grad_s_(p_.s.shape()) {
    p_.check_compatible(weight_);
}

void StrLinear::init_weights(Rng& rng) { kaiming_uniform(weight_, in_, rng); }

Tensor StrLinear::effective_weight() const {
    return mask_ ? masked_weight(weight_, *mask_) : str_forward(weight_, p_);
}

void StrLinear::set_external_mask(std::optional<Tensor> mask) { mask_ = std::move(mask); }

Tensor StrLinear::forward(const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != in_)
        throw ShapeError(name_ + ": expected input [B," + std::to_string(in_) + "], got " +
                         x.shape_str());
    cached_input_ = x;
    cached_effective_ = effective_weight();
    return matmul(x, transpose(cached_effective_));
}

Tensor StrLinear::backward(const Tensor& grad_out) {
    if (grad_out.rank() != 2 || grad_out.dim(1) != out_ ||
        grad_out.dim(0) != cached_input_.dim(0))
        throw ShapeError(name_ + ": bad upstream gradient " + grad_out.shape_str());
    // G = dL/dW~ accumulated over the batch
    const Tensor g_eff = matmul(transpose(grad_out), cached_input_);
    if (mask_) {
        const Tensor gw = hadamard(g_eff, *mask_);
        kern::ops().add(grad_weight_.data(), grad_weight_.data(), gw.data(),
                        static_cast<std::size_t>(gw.numel()));
    } else {
        const Tensor gw = grad_w(g_eff, cached_effective_);
        kern::ops().add(grad_weight_.data(), grad_weight_.data(), gw.data(),
                        static_cast<std::size_t>(gw.numel()));
        const Tensor gs = grad_s(g_eff, weight_, p_);
        kern::ops().add(grad_s_.data(), grad_s_.data(), gs.data(),
                        static_cast<std::size_t>(gs.numel()));
    }
    return matmul(grad_out, cached_effective_);
}

void StrLinear::collect_params(std::vector<ParamRef>& out) {
    out.push_back({name_ + ".weight", &weight_, &grad_weight_, false});
    if (!mask_) out.push_back({name_ + ".s", &p_.s, &grad_s_, true});
}

void StrLinear::zero_grads() {
    for (double& v : grad_weight_.vec()) v = 0.0;
    for (double& v : grad_s_.vec()) v = 0.0;
}

// ----- StrConv ------------------------------------------------------------------

StrConv::StrConv(std::string name, std::int64_t in_ch, std::int64_t out_ch, std::int64_t ksize,
                 std::int64_t stride, std::int64_t padding, std::int64_t groups, StrParam p)
    : name_(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      ksize_(ksize),
      stride_(stride),
      padding_(padding),
      groups_(groups),
      weight_({out_ch, in_ch / groups, ksize, ksize}),
      grad_weight_(weight_.shape()),
      p_(std::move(p)),
      grad_s_(p_.s.shape()) {
    if (in_ch % groups != 0 || out_ch % groups != 0)
        throw ShapeError(name_ + ": channels not divisible by groups");
    p_.check_compatible(weight_);
}

void StrConv::init_weights(Rng& rng) {
    kaiming_uniform(weight_, (in_ch_ / groups_) * ksize_ * ksize_, rng);
}

Tensor StrConv::effective_weight() const {
    return mask_ ? masked_weight(weight_, *mask_) : str_forward(weight_, p_);
}

void StrConv::set_external_mask(std::optional<Tensor> mask) { mask_ = std::move(mask); }

Tensor StrConv::forward(const Tensor& x) {
    if (x.rank() != 4 || x.dim(1) != in_ch_)
        throw ShapeError(name_ + ": expected input [B," + std::to_string(in_ch_) +
                         ",H,W], got " + x.shape_str());
    cached_input_ = x;
    cached_effective_ = effective_weight();

    const std::int64_t batch = x.dim(0);
    Tensor sample({in_ch_, x.dim(2), x.dim(3)});
    const Conv2dGeom geom =
        conv2d_geometry(sample, cached_effective_, stride_, padding_, groups_);
    Tensor out({batch, out_ch_, geom.out_h, geom.out_w});
    const std::int64_t in_sz = sample.numel();
    const std::int64_t out_sz = out_ch_ * geom.out_h * geom.out_w;
    for (std::int64_t b = 0; b < batch; ++b) {
        std::copy(x.data() + b * in_sz, x.data() + (b + 1) * in_sz, sample.data());
        const Tensor y = conv2d(sample, cached_effective_, stride_, padding_, groups_);
        std::copy(y.data(), y.data() + out_sz, out.data() + b * out_sz);
    }
    return out;
}

Tensor StrConv::backward(const Tensor& grad_out) {
    const Tensor& x = cached_input_;
    const std::int64_t batch = x.dim(0);
    Tensor sample({in_ch_, x.dim(2), x.dim(3)});
    const Conv2dGeom geom =
        conv2d_geometry(sample, cached_effective_, stride_, padding_, groups_);
    if (grad_out.rank() != 4 || grad_out.dim(0) != batch || grad_out.dim(1) != out_ch_ ||
        grad_out.dim(2) != geom.out_h || grad_out.dim(3) != geom.out_w)
        throw ShapeError(name_ + ": bad upstream gradient " + grad_out.shape_str());

    const std::int64_t cpg_in = in_ch_ / groups_;
    const std::int64_t cpg_out = out_ch_ / groups_;
    const std::int64_t krows = cpg_in * ksize_ * ksize_;
    const std::int64_t cols = geom.out_h * geom.out_w;
    const std::int64_t in_sz = sample.numel();
    const std::int64_t out_sz = out_ch_ * cols;

    Tensor g_eff(weight_.shape());  // dL/dW~
    Tensor grad_in(x.shape());
    std::vector<double> col(static_cast<std::size_t>(krows * cols));
    std::vector<double> colT(static_cast<std::size_t>(krows * cols));
    std::vector<double> gcol(static_cast<std::size_t>(krows * cols));
    // per-group transposed kernel [krows x cpg_out], reused across the batch
    std::vector<Tensor> kT(static_cast<std::size_t>(groups_));
    for (std::int64_t gi = 0; gi < groups_; ++gi) {
        Tensor km({cpg_out, krows});
        std::copy(cached_effective_.data() + gi * cpg_out * krows,
                  cached_effective_.data() + (gi + 1) * cpg_out * krows, km.data());
        kT[static_cast<std::size_t>(gi)] = transpose(km);
    }

    for (std::int64_t b = 0; b < batch; ++b) {
        std::copy(x.data() + b * in_sz, x.data() + (b + 1) * in_sz, sample.data());
        Tensor grad_sample({in_ch_, x.dim(2), x.dim(3)});
        for (std::int64_t gi = 0; gi < groups_; ++gi) {
            im2col_group(sample, geom, gi * cpg_in, col.data());
            // colT = col transposed to [cols x krows]
            for (std::int64_t r = 0; r < krows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) colT[c * krows + r] = col[r * cols + c];
            const double* gmat = grad_out.data() + b * out_sz + gi * cpg_out * cols;
            // dK += G x col^T
            Tensor gk({cpg_out, krows});
            kern::ops().matmul(gk.data(), gmat, colT.data(), static_cast<std::size_t>(cpg_out),
                               static_cast<std::size_t>(cols), static_cast<std::size_t>(krows));
            kern::ops().add(g_eff.data() + gi * cpg_out * krows,
                            g_eff.data() + gi * cpg_out * krows, gk.data(),
                            static_cast<std::size_t>(gk.numel()));
            // dcol = K^T x G, scattered back through col2im
            kern::ops().matmul(gcol.data(), kT[static_cast<std::size_t>(gi)].data(), gmat,
                               static_cast<std::size_t>(krows),
                               static_cast<std::size_t>(cpg_out), static_cast<std::size_t>(cols));
            col2im_group(gcol.data(), geom, gi * cpg_in, grad_sample);
        }
        kern::ops().add(grad_in.data() + b * in_sz, grad_in.data() + b * in_sz,
                        grad_sample.data(), static_cast<std::size_t>(in_sz));
    }

    if (mask_) {
        const Tensor gw = hadamard(g_eff, *mask_);
        kern::ops().add(grad_weight_.data(), grad_weight_.data(), gw.data(),
                        static_cast<std::size_t>(gw.numel()));
    } else {
        const Tensor gw = grad_w(g_eff, cached_effective_);
        kern::ops().add(grad_weight_.data(), grad_weight_.data(), gw.data(),
                        static_cast<std::size_t>(gw.numel()));
        const Tensor gs = grad_s(g_eff, weight_, p_);
        kern::ops().add(grad_s_.data(), grad_s_.data(), gs.data(),
                        static_cast<std::size_t>(gs.numel()));
    }
    return grad_in;
}

void StrConv::collect_params(std::vector<ParamRef>& out) {
    out.push_back({name_ + ".weight", &weight_, &grad_weight_, false});
    if (!mask_) out.push_back({name_ + ".s", &p_.s, &grad_s_, true});
}

void StrConv::zero_grads() {
    for (double& v : grad_weight_.vec()) v = 0.0;
    for (double& v : grad_s_.vec()) v = 0.0;
}

// ----- ChannelPrunedConv --------------------------------------------------------

ChannelPrunedConv::ChannelPrunedConv(std::string name, std::unique_ptr<StrConv> conv,
                                     double m_init, double s_init, ThresholdFn fn)
    : name_(std::move(name)),
      conv_(std::move(conv)),
      m_(Tensor::full({conv_->out_channels()}, m_init)),
      grad_m_({conv_->out_channels()}),
      pm_(StrParam::make(Granularity::kPerWeight, m_, s_init, fn)),
      grad_s_(pm_.s.shape()) {}

Tensor ChannelPrunedConv::forward(const Tensor& x) {
    cached_raw_ = conv_->forward(x);
    cached_mtilde_ = str_forward(m_, pm_);
    Tensor out(cached_raw_.shape());
    const std::int64_t batch = out.dim(0);
    const std::int64_t ch = out.dim(1);
    const std::int64_t plane = out.dim(2) * out.dim(3);
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < ch; ++c)
            kern::ops().scale(out.data() + (b * ch + c) * plane,
                              cached_raw_.data() + (b * ch + c) * plane, cached_mtilde_[c],
                              static_cast<std::size_t>(plane));
    return out;
}

Tensor ChannelPrunedConv::backward(const Tensor& grad_out) {
    require_same_shape(grad_out, cached_raw_, "channel-prune backward");
    const std::int64_t batch = grad_out.dim(0);
    const std::int64_t ch = grad_out.dim(1);
    const std::int64_t plane = grad_out.dim(2) * grad_out.dim(3);

    // dL/dm~_c = <G_c, raw_c> over the batch
    Tensor g_mtilde({ch});
    Tensor grad_conv(grad_out.shape());
    for (std::int64_t c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::int64_t b = 0; b < batch; ++b)
            acc += kern::ops().dot(grad_out.data() + (b * ch + c) * plane,
                                   cached_raw_.data() + (b * ch + c) * plane,
                                   static_cast<std::size_t>(plane));
        g_mtilde[c] = acc;
        for (std::int64_t b = 0; b < batch; ++b)
            kern::ops().scale(grad_conv.data() + (b * ch + c) * plane,
                              grad_out.data() + (b * ch + c) * plane, cached_mtilde_[c],
                              static_cast<std::size_t>(plane));
    }
    const Tensor gm = grad_w(g_mtilde, cached_mtilde_);
    kern::ops().add(grad_m_.data(), grad_m_.data(), gm.data(),
                    static_cast<std::size_t>(gm.numel()));
    const Tensor gs = grad_s(g_mtilde, m_, pm_);
    kern::ops().add(grad_s_.data(), grad_s_.data(), gs.data(),
                    static_cast<std::size_t>(gs.numel()));
    return conv_->backward(grad_conv);
}

void ChannelPrunedConv::collect_params(std::vector<ParamRef>& out) {
    conv_->collect_params(out);
    out.push_back({name_ + ".m", &m_, &grad_m_, false});
    out.push_back({name_ + ".m_s", &pm_.s, &grad_s_, true});
}

void ChannelPrunedConv::zero_grads() {
    conv_->zero_grads();
    for (double& v : grad_m_.vec()) v = 0.0;
    for (double& v : grad_s_.vec()) v = 0.0;
}

// ----- ReLU / Flatten -----------------------------------------------------------

Tensor ReluLayer::forward(const Tensor& x) {
    cached_input_ = x;
    return relu(x);
}

Tensor ReluLayer::backward(const Tensor& grad_out) {
    require_same_shape(grad_out, cached_input_, "relu backward");
    Tensor out(grad_out.shape());
    kern::ops().mask_positive(out.data(), grad_out.data(), cached_input_.data(),
                              static_cast<std::size_t>(grad_out.numel()));
    return out;
}

Tensor FlattenLayer::forward(const Tensor& x) {
    cached_shape_ = x.shape();
    const std::int64_t batch = x.dim(0);
    return Tensor({batch, x.numel() / batch}, x.vec());
}

Tensor FlattenLayer::backward(const Tensor& grad_out) {
    return Tensor(cached_shape_, grad_out.vec());
}

// ----- Sequential ---------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x) {
    Tensor cur = x;
    for (auto& l : layers_) cur = l->forward(cur);
    return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

std::vector<ParamRef> Sequential::params() {
    std::vector<ParamRef> out;
    for (auto& l : layers_) l->collect_params(out);
    return out;
}

void Sequential::zero_grads() {
    for (auto& l : layers_) l->zero_grads();
}

std::vector<StrWeightLayer*> Sequential::str_layers() {
    std::vector<StrWeightLayer*> out;
    for (auto& l : layers_)
        if (auto* s = dynamic_cast<StrWeightLayer*>(l.get())) out.push_back(s);
    return out;
}

std::vector<const StrWeightLayer*> Sequential::str_layers() const {
    std::vector<const StrWeightLayer*> out;
    for (const auto& l : layers_)
        if (const auto* s = dynamic_cast<const StrWeightLayer*>(l.get())) out.push_back(s);
    return out;
}

std::string Sequential::first_nonfinite_layer(const Tensor& x) {
    Tensor cur = x;
    for (auto& l : layers_) {
        cur = l->forward(cur);
        for (std::int64_t i = 0; i < cur.numel(); ++i)
            if (!std::isfinite(cur[i])) return l->name();
    }
    return {};
}

// ----- losses -------------------------------------------------------------------

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                 std::size_t label_offset) {
    if (logits.rank() != 2)
        throw ShapeError("cross entropy expects [B,K] logits, got " + logits.shape_str());
    const std::int64_t batch = logits.dim(0);
    const std::int64_t classes = logits.dim(1);
    if (label_offset + static_cast<std::size_t>(batch) > labels.size())
        throw ShapeError("cross entropy: not enough labels for batch");
    LossResult res;
    res.grad = Tensor(logits.shape());
    double total = 0;
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * classes;
        double mx = row[0];
        for (std::int64_t k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
        double z = 0;
        for (std::int64_t k = 0; k < classes; ++k) z += std::exp(row[k] - mx);
        const int y = labels[label_offset + static_cast<std::size_t>(b)];
        total += -(row[y] - mx - std::log(z));
        for (std::int64_t k = 0; k < classes; ++k) {
            const double p = std::exp(row[k] - mx) / z;
            res.grad.at2(b, k) = (p - (k == y ? 1.0 : 0.0)) / static_cast<double>(batch);
        }
    }
    res.value = total / static_cast<double>(batch);
    return res;
}

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse");
    LossResult res;
    res.grad = Tensor(pred.shape());
    const double n = static_cast<double>(pred.numel());
    double total = 0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        const double d = pred[i] - target[i];
        total += 0.5 * d * d;
        res.grad[i] = d / n;
    }
    res.value = total / n;
    return res;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels,
                std::size_t label_offset) {
    const std::int64_t batch = logits.dim(0);
    const std::int64_t classes = logits.dim(1);
    std::int64_t hits = 0;
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * classes;
        std::int64_t arg = 0;
        for (std::int64_t k = 1; k < classes; ++k)
            if (row[k] > row[arg]) arg = k;
        hits += (arg == labels[label_offset + static_cast<std::size_t>(b)]);
    }
    return static_cast<double>(hits) / static_cast<double>(batch);
}

// ----- model builders -----------------------------------------------------------

Sequential make_mlp(std::int64_t in_features, const std::vector<std::int64_t>& hidden,
                    std::int64_t classes, const StrOptions& opt, Rng& rng) {
    Sequential model;
    std::int64_t cur = in_features;
    int idx = 1;
    for (std::int64_t h : hidden) {
        const std::string nm = "fc" + std::to_string(idx++);
        Tensor like({h, cur});
        auto lin = std::make_unique<StrLinear>(
            nm, cur, h, StrParam::make(opt.granularity, like, opt.s_init, opt.fn));
        lin->init_weights(rng);
        model.add(std::move(lin));
        model.add(std::make_unique<ReluLayer>(nm + ".relu"));
        cur = h;
    }
    Tensor like({classes, cur});
    auto head = std::make_unique<StrLinear>(
        "fc" + std::to_string(idx), cur, classes,
        StrParam::make(opt.granularity, like, opt.s_init, opt.fn));
    head->init_weights(rng);
    model.add(std::move(head));
    return model;
}

Sequential make_cnn(std::int64_t img, std::int64_t classes, const StrOptions& opt, Rng& rng) {
    Sequential model;
    auto mkconv = [&](const std::string& nm, std::int64_t ic, std::int64_t oc) {
        Tensor like({oc, ic, 3, 3});
        auto conv = std::make_unique<StrConv>(
            nm, ic, oc, 3, 2, 1, 1, StrParam::make(opt.granularity, like, opt.s_init, opt.fn));
        conv->init_weights(rng);
        return conv;
    };
    model.add(mkconv("conv1", 1, 8));
    model.add(std::make_unique<ReluLayer>("conv1.relu"));
    model.add(mkconv("conv2", 8, 16));
    model.add(std::make_unique<ReluLayer>("conv2.relu"));
    model.add(std::make_unique<FlattenLayer>("flatten"));
    const std::int64_t feat = 16 * (img / 4) * (img / 4);
    Tensor like({classes, feat});
    auto head = std::make_unique<StrLinear>(
        "fc", feat, classes, StrParam::make(opt.granularity, like, opt.s_init, opt.fn));
    head->init_weights(rng);
    model.add(std::move(head));
    return model;
}

double model_sparsity(Sequential& model) {
    std::int64_t total = 0, nnz = 0;
    for (StrWeightLayer* l : model.str_layers()) {
        const Tensor eff = l->effective_weight();
        total += eff.numel();
        nnz += nonzero_count(eff);
    }
    if (total == 0) return 0.0;
    return 1.0 - static_cast<double>(nnz) / static_cast<double>(total);
}

}  // namespace strs
