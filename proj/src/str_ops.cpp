#include "strsparse/str_ops.hpp"

#include <cmath>

#include "strsparse/kernels.hpp"

namespace strs {

namespace {
// exp(745) is the last finite double exponent region; below -745 the sigmoid
// underflows anyway, we just make the cutoff explicit.
constexpr double kSigmoidCutoff = -745.0;
}  // namespace

double g_eval(const ThresholdFn& fn, double s) {
    switch (fn.kind) {
        case ThresholdKind::kSigmoid:
            if (s < kSigmoidCutoff) return 0.0;
            return fn.k / (1.0 + std::exp(-s));
        case ThresholdKind::kExponential:
            return fn.k * std::exp(s);
    }
    return 0.0;
}

double g_prime(const ThresholdFn& fn, double s) {
    switch (fn.kind) {
        case ThresholdKind::kSigmoid: {
            if (s < kSigmoidCutoff) return 0.0;
            const double g = g_eval(fn, s);
            return g * (fn.k - g) / fn.k;
        }
        case ThresholdKind::kExponential:
            return fn.k * std::exp(s);
    }
    return 0.0;
}

double soft_threshold(double w, double alpha) {
    const double t = std::fabs(w) - alpha;
    const double r = t > 0.0 ? t : 0.0;
    return std::copysign(r, w);
}

ThresholdKind threshold_kind_from_string(const std::string& name) {
    if (name == "sigmoid") return ThresholdKind::kSigmoid;
    if (name == "exponential") return ThresholdKind::kExponential;
    throw std::invalid_argument("unknown threshold function: " + name);
}

std::string to_string(ThresholdKind kind) {
    return kind == ThresholdKind::kSigmoid ? "sigmoid" : "exponential";
}

Granularity granularity_from_string(const std::string& name) {
    if (name == "global") return Granularity::kGlobal;
    if (name == "per-layer") return Granularity::kPerLayer;
    if (name == "per-channel") return Granularity::kPerChannel;
    if (name == "per-weight") return Granularity::kPerWeight;
    throw std::invalid_argument("unknown granularity: " + name);
}

std::string to_string(Granularity g) {
    switch (g) {
        case Granularity::kGlobal: return "global";
        case Granularity::kPerLayer: return "per-layer";
        case Granularity::kPerChannel: return "per-channel";
        case Granularity::kPerWeight: return "per-weight";
    }
    return "?";
}

StrParam StrParam::make(Granularity g, const Tensor& weight_like, double s_init,
                        ThresholdFn fn) {
    StrParam p;
    p.granularity = g;
    p.fn = fn;
    switch (g) {
        case Granularity::kGlobal:
        case Granularity::kPerLayer:
            p.s = Tensor::scalar(s_init);
            break;
        case Granularity::kPerChannel:
            p.s = Tensor::full({weight_like.dim(0)}, s_init);
            break;
        case Granularity::kPerWeight:
            p.s = Tensor::full(weight_like.shape(), s_init);
            break;
    }
    return p;
}

Tensor StrParam::thresholds() const {
    Tensor a(s.shape());
    for (std::int64_t i = 0; i < s.numel(); ++i) a[i] = g_eval(fn, s[i]);
    return a;
}

void StrParam::check_compatible(const Tensor& weight) const {
    switch (granularity) {
        case Granularity::kGlobal:
        case Granularity::kPerLayer:
            if (s.numel() != 1)
                throw ShapeError("StrParam: " + to_string(granularity) +
                                 " threshold must be a single scalar, got s " + s.shape_str());
            break;
        case Granularity::kPerChannel:
            if (s.rank() != 1 || s.dim(0) != weight.dim(0))
                throw ShapeError("StrParam: per-channel s " + s.shape_str() +
                                 " must have one entry per output channel of " +
                                 weight.shape_str());
            break;
        case Granularity::kPerWeight:
            if (!s.same_shape(weight))
                throw ShapeError("StrParam: per-weight s " + s.shape_str() +
                                 " must match weight " + weight.shape_str());
            break;
    }
}

Tensor str_forward(const Tensor& weight, const StrParam& p) {
    p.check_compatible(weight);
    Tensor out(weight.shape());
    const auto n = static_cast<std::size_t>(weight.numel());
    switch (p.granularity) {
        case Granularity::kGlobal:
        case Granularity::kPerLayer:
            kern::ops().soft_threshold(out.data(), weight.data(), n, g_eval(p.fn, p.s[0]));
            break;
        case Granularity::kPerChannel: {
            const std::int64_t channels = weight.dim(0);
            const std::int64_t per = weight.numel() / channels;
            for (std::int64_t c = 0; c < channels; ++c)
                kern::ops().soft_threshold(out.data() + c * per, weight.data() + c * per,
                                           static_cast<std::size_t>(per), g_eval(p.fn, p.s[c]));
            break;
        }
        case Granularity::kPerWeight: {
            const Tensor alpha = p.thresholds();
            kern::ops().soft_threshold_pw(out.data(), weight.data(), alpha.data(), n);
            break;
        }
    }
    return out;
}

Tensor grad_w(const Tensor& upstream, const Tensor& sparse_weight) {
    require_same_shape(upstream, sparse_weight, "grad_w");
    Tensor out(upstream.shape());
    kern::ops().mask_nonzero(out.data(), upstream.data(), sparse_weight.data(),
                             static_cast<std::size_t>(upstream.numel()));
    return out;
}

Tensor grad_s(const Tensor& upstream, const Tensor& weight, const StrParam& p) {
    require_same_shape(upstream, weight, "grad_s");
    p.check_compatible(weight);
    Tensor out(p.s.shape());
    switch (p.granularity) {
        case Granularity::kGlobal:
        case Granularity::kPerLayer: {
            const Tensor wt = str_forward(weight, p);
            const double inner = kern::ops().support_inner(
                upstream.data(), weight.data(), wt.data(),
                static_cast<std::size_t>(weight.numel()));
            out[0] = -g_prime(p.fn, p.s[0]) * inner;
            break;
        }
        case Granularity::kPerChannel: {
            const Tensor wt = str_forward(weight, p);
            const std::int64_t channels = weight.dim(0);
            const std::int64_t per = weight.numel() / channels;
            for (std::int64_t c = 0; c < channels; ++c) {
                const double inner = kern::ops().support_inner(
                    upstream.data() + c * per, weight.data() + c * per, wt.data() + c * per,
                    static_cast<std::size_t>(per));
                out[c] = -g_prime(p.fn, p.s[c]) * inner;
            }
            break;
        }
        case Granularity::kPerWeight: {
            for (std::int64_t i = 0; i < weight.numel(); ++i) {
                const double alpha = g_eval(p.fn, p.s[i]);
                if (std::fabs(weight[i]) > alpha) {
                    const double sgn = weight[i] > 0.0 ? 1.0 : (weight[i] < 0.0 ? -1.0 : 0.0);
                    out[i] = -g_prime(p.fn, p.s[i]) * upstream[i] * sgn;
                } else {
                    out[i] = 0.0;
                }
            }
            break;
        }
    }
    return out;
}

double sparsity(const Tensor& t) {
    const std::int64_t z =
        kern::ops().count_zeros(t.data(), static_cast<std::size_t>(t.numel()));
    return static_cast<double>(z) / static_cast<double>(t.numel());
}

std::int64_t nonzero_count(const Tensor& t) {
    return t.numel() - kern::ops().count_zeros(t.data(), static_cast<std::size_t>(t.numel()));
}

}  // namespace strs
