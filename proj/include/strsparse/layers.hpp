#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "strsparse/rng.hpp"
#include "strsparse/str_ops.hpp"
#include "strsparse/tensor.hpp"

namespace strs {

/// Handle to one trainable tensor plus its accumulated gradient. Threshold
/// parameters (s) are flagged so the trainer can treat them specially
/// (global sharing, freezing); they otherwise ride the same optimizer.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool is_threshold = false;
};

class Layer {
public:
    virtual ~Layer() = default;
    /// Batch-first input; caches whatever backward needs.
    virtual Tensor forward(const Tensor& x) = 0;
    /// Consumes d(loss)/d(output), accumulates parameter gradients, returns
    /// d(loss)/d(input).
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect_params(std::vector<ParamRef>& out) { (void)out; }
    virtual void zero_grads() {}
    virtual const std::string& name() const = 0;
};

/// Interface of layers that carry an STR-reparameterized weight tensor.
class StrWeightLayer {
public:
    virtual ~StrWeightLayer() = default;
    virtual const std::string& layer_name() const = 0;
    virtual const Tensor& weight() const = 0;
    virtual Tensor& mutable_weight() = 0;
    virtual StrParam& str_param() = 0;
    virtual const StrParam& str_param() const = 0;
    /// The weight tensor the forward pass actually consumes.
    virtual Tensor effective_weight() const = 0;
    /// "fc", "conv" or "depthwise-conv".
    virtual std::string kind() const = 0;
    /// Replaces STR with a fixed external support mask (budget-transfer
    /// training): forward uses W ⊙ mask, masked entries get zero gradient,
    /// and s is ignored while set.
    virtual void set_external_mask(std::optional<Tensor> mask) = 0;
};

/// Fully connected layer without bias; forward always consumes the
/// soft-thresholded weight, never the dense one.
class StrLinear : public Layer, public StrWeightLayer {
public:
    StrLinear(std::string name, std::int64_t in_features, std::int64_t out_features,
              StrParam p);
    /// Kaiming-uniform fan-in init.
    void init_weights(Rng& rng);

    Tensor forward(const Tensor& x) override;        // [B,in] -> [B,out]
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void zero_grads() override;
    const std::string& name() const override { return name_; }

    const std::string& layer_name() const override { return name_; }
    const Tensor& weight() const override { return weight_; }
    Tensor& mutable_weight() override { return weight_; }
    StrParam& str_param() override { return p_; }
    const StrParam& str_param() const override { return p_; }
    Tensor effective_weight() const override;
    std::string kind() const override { return "fc"; }
    void set_external_mask(std::optional<Tensor> mask) override;

    std::int64_t in_features() const { return in_; }
    std::int64_t out_features() const { return out_; }

private:
    std::string name_;
    std::int64_t in_, out_;
    Tensor weight_;       // [out,in]
    Tensor grad_weight_;
    StrParam p_;
    Tensor grad_s_;
    std::optional<Tensor> mask_;
    Tensor cached_input_, cached_effective_;
};

/// STR-wrapped 2-D convolution (no bias). Input [B,C,H,W].
class StrConv : public Layer, public StrWeightLayer {
public:
    StrConv(std::string name, std::int64_t in_ch, std::int64_t out_ch, std::int64_t ksize,
            std::int64_t stride, std::int64_t padding, std::int64_t groups, StrParam p);
    void init_weights(Rng& rng);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void zero_grads() override;
    const std::string& name() const override { return name_; }

    const std::string& layer_name() const override { return name_; }
    const Tensor& weight() const override { return weight_; }
    Tensor& mutable_weight() override { return weight_; }
    StrParam& str_param() override { return p_; }
    const StrParam& str_param() const override { return p_; }
    Tensor effective_weight() const override;
    std::string kind() const override { return groups_ == in_ch_ ? "depthwise-conv" : "conv"; }
    void set_external_mask(std::optional<Tensor> mask) override;

    std::int64_t in_channels() const { return in_ch_; }
    std::int64_t out_channels() const { return out_ch_; }
    std::int64_t kernel_size() const { return ksize_; }
    std::int64_t stride() const { return stride_; }
    std::int64_t padding() const { return padding_; }
    std::int64_t groups() const { return groups_; }

private:
    std::string name_;
    std::int64_t in_ch_, out_ch_, ksize_, stride_, padding_, groups_;
    Tensor weight_;  // [out, in/groups, k, k]
    Tensor grad_weight_;
    StrParam p_;
    Tensor grad_s_;
    std::optional<Tensor> mask_;
    Tensor cached_input_, cached_effective_;
};

/// Filter-importance wrapper: output channel c of the wrapped convolution is
/// scaled by the soft-thresholded importance m~_c; a pruned importance
/// removes the whole filter. STR is applied to the importance vector, one
/// threshold per entry.
class ChannelPrunedConv : public Layer {
public:
    ChannelPrunedConv(std::string name, std::unique_ptr<StrConv> conv, double m_init,
                      double s_init, ThresholdFn fn);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void zero_grads() override;
    const std::string& name() const override { return name_; }

    StrConv& conv() { return *conv_; }
    const Tensor& importance() const { return m_; }
    Tensor& mutable_importance() { return m_; }
    StrParam& importance_param() { return pm_; }
    Tensor effective_importance() const { return str_forward(m_, pm_); }
    const Tensor& importance_grad() const { return grad_m_; }
    const Tensor& importance_s_grad() const { return grad_s_; }

private:
    std::string name_;
    std::unique_ptr<StrConv> conv_;
    Tensor m_;        // [out_channels]
    Tensor grad_m_;
    StrParam pm_;     // per-weight over m
    Tensor grad_s_;
    Tensor cached_raw_, cached_mtilde_;
};

class ReluLayer : public Layer {
public:
    explicit ReluLayer(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    const std::string& name() const override { return name_; }

private:
    std::string name_;
    Tensor cached_input_;
};

/// [B, d1, d2, ...] -> [B, d1*d2*...]; row-major, so a pure reshape.
class FlattenLayer : public Layer {
public:
    explicit FlattenLayer(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    const std::string& name() const override { return name_; }

private:
    std::string name_;
    std::vector<std::int64_t> cached_shape_;
};

class Sequential {
public:
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);
    std::vector<ParamRef> params();
    void zero_grads();

    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    std::vector<StrWeightLayer*> str_layers();
    std::vector<const StrWeightLayer*> str_layers() const;

    /// Name of the first layer whose cached forward output (recomputed on x)
    /// contains a non-finite value; empty if none.
    std::string first_nonfinite_layer(const Tensor& x);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// ----- losses ------------------------------------------------------------------

struct LossResult {
    double value = 0;
    Tensor grad;  // w.r.t. the network output
};

/// Mean softmax cross-entropy over the batch; logits [B,K].
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                 std::size_t label_offset = 0);

/// 0.5 * mean squared error over all entries.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

double accuracy(const Tensor& logits, const std::vector<int>& labels,
                std::size_t label_offset = 0);

// ----- model builders -----------------------------------------------------------

struct StrOptions {
    Granularity granularity = Granularity::kPerLayer;
    ThresholdFn fn;
    double s_init = -8.0;
};

/// MLP over flat features: StrLinear+ReLU hidden stack, StrLinear head.
Sequential make_mlp(std::int64_t in_features, const std::vector<std::int64_t>& hidden,
                    std::int64_t classes, const StrOptions& opt, Rng& rng);

/// Small CNN for [1,img,img] inputs: two stride-2 StrConv blocks + fc head.
Sequential make_cnn(std::int64_t img, std::int64_t classes, const StrOptions& opt, Rng& rng);

/// Overall sparsity of every STR weight tensor in the model.
double model_sparsity(Sequential& model);

}  // namespace strs
