#include "strsparse/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "strsparse/kernels.hpp"

namespace strs {

std::string Tensor::shape_to_string(const std::vector<std::int64_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

std::int64_t Tensor::checked_numel(const std::vector<std::int64_t>& s) {
    if (s.empty()) throw ShapeError("tensor shape must have at least one dimension");
    std::int64_t n = 1;
    for (std::int64_t d : s) {
        if (d < 1) throw ShapeError("tensor dimensions must be >= 1, got " + shape_to_string(s));
        n *= d;
    }
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: expected rank-2 tensors, got " + a.shape_str() + " and " +
                         b.shape_str());
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " x " +
                         b.shape_str());
    Tensor c({a.dim(0), b.dim(1)});
    kern::ops().matmul(c.data(), a.data(), b.data(), static_cast<std::size_t>(a.dim(0)),
                       static_cast<std::size_t>(a.dim(1)), static_cast<std::size_t>(b.dim(1)));
    return c;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected rank-2 tensor, got " + a.shape_str());
    Tensor t({a.dim(1), a.dim(0)});
    for (std::int64_t i = 0; i < a.dim(0); ++i)
        for (std::int64_t j = 0; j < a.dim(1); ++j) t.at2(j, i) = a.at2(i, j);
    return t;
}

Conv2dGeom conv2d_geometry(const Tensor& input, const Tensor& kernel,
                           std::int64_t stride, std::int64_t padding, std::int64_t groups) {
    if (input.rank() != 3 || kernel.rank() != 4)
        throw ShapeError("conv2d: expected input [C,H,W] and kernel [Cout,Cin/g,kh,kw], got " +
                         input.shape_str() + " and " + kernel.shape_str());
    if (stride < 1 || padding < 0 || groups < 1)
        throw ShapeError("conv2d: invalid stride/padding/groups");
    Conv2dGeom g;
    g.in_ch = input.dim(0);
    g.in_h = input.dim(1);
    g.in_w = input.dim(2);
    g.out_ch = kernel.dim(0);
    g.kh = kernel.dim(2);
    g.kw = kernel.dim(3);
    g.stride = stride;
    g.padding = padding;
    g.groups = groups;
    if (g.in_ch % groups != 0 || g.out_ch % groups != 0)
        throw ShapeError("conv2d: channels not divisible by groups, input " + input.shape_str() +
                         " kernel " + kernel.shape_str());
    if (kernel.dim(1) * groups != g.in_ch)
        throw ShapeError("conv2d: kernel " + kernel.shape_str() + " does not match input " +
                         input.shape_str() + " with groups=" + std::to_string(groups));
    g.out_h = (g.in_h + 2 * padding - g.kh) / stride + 1;
    g.out_w = (g.in_w + 2 * padding - g.kw) / stride + 1;
    if (g.in_h + 2 * padding < g.kh || g.in_w + 2 * padding < g.kw || g.out_h < 1 || g.out_w < 1)
        throw ShapeError("conv2d: kernel " + kernel.shape_str() +
                         " does not fit padded input " + input.shape_str());
    return g;
}

void im2col_group(const Tensor& input, const Conv2dGeom& g, std::int64_t group_in_base,
                  double* col) {
    const std::int64_t cpg = g.in_ch / g.groups;
    const std::int64_t cols = g.out_h * g.out_w;
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < cpg; ++c) {
        const std::int64_t ic = group_in_base + c;
        for (std::int64_t dy = 0; dy < g.kh; ++dy) {
            for (std::int64_t dx = 0; dx < g.kw; ++dx, ++row) {
                double* dst = col + row * cols;
                for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
                    const std::int64_t iy = oy * g.stride - g.padding + dy;
                    for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
                        const std::int64_t ix = ox * g.stride - g.padding + dx;
                        const bool in = iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w;
                        dst[oy * g.out_w + ox] = in ? input.at3(ic, iy, ix) : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_group(const double* col, const Conv2dGeom& g, std::int64_t group_in_base,
                  Tensor& grad_input) {
    const std::int64_t cpg = g.in_ch / g.groups;
    const std::int64_t cols = g.out_h * g.out_w;
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < cpg; ++c) {
        const std::int64_t ic = group_in_base + c;
        for (std::int64_t dy = 0; dy < g.kh; ++dy) {
            for (std::int64_t dx = 0; dx < g.kw; ++dx, ++row) {
                const double* src = col + row * cols;
                for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
                    const std::int64_t iy = oy * g.stride - g.padding + dy;
                    if (iy < 0 || iy >= g.in_h) continue;
                    for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
                        const std::int64_t ix = ox * g.stride - g.padding + dx;
                        if (ix < 0 || ix >= g.in_w) continue;
                        grad_input.at3(ic, iy, ix) += src[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}

Tensor conv2d(const Tensor& input, const Tensor& kernel,
              std::int64_t stride, std::int64_t padding, std::int64_t groups) {
    const Conv2dGeom g = conv2d_geometry(input, kernel, stride, padding, groups);
    const std::int64_t cpg_in = g.in_ch / groups;
    const std::int64_t cpg_out = g.out_ch / groups;
    const std::int64_t krows = cpg_in * g.kh * g.kw;
    const std::int64_t cols = g.out_h * g.out_w;

    Tensor out({g.out_ch, g.out_h, g.out_w});
    std::vector<double> col(static_cast<std::size_t>(krows * cols));
    for (std::int64_t gi = 0; gi < groups; ++gi) {
        im2col_group(input, g, gi * cpg_in, col.data());
        // kernel rows for this group form a [cpg_out x krows] matrix
        const double* kmat = kernel.data() + gi * cpg_out * krows;
        double* omat = out.data() + gi * cpg_out * cols;
        kern::ops().matmul(omat, kmat, col.data(), static_cast<std::size_t>(cpg_out),
                           static_cast<std::size_t>(krows), static_cast<std::size_t>(cols));
    }
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor out(a.shape());
    kern::ops().hadamard(out.data(), a.data(), b.data(), static_cast<std::size_t>(a.numel()));
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    kern::ops().add(out.data(), a.data(), b.data(), static_cast<std::size_t>(a.numel()));
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    kern::ops().scale(out.data(), a.data(), c, static_cast<std::size_t>(a.numel()));
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out(a.shape());
    kern::ops().relu(out.data(), a.data(), static_cast<std::size_t>(a.numel()));
    return out;
}

Tensor abs(const Tensor& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::fabs(a[i]);
    return out;
}

Tensor sign(const Tensor& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i)
        out[i] = a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0);
    return out;
}

Tensor sigmoid(const Tensor& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
    return out;
}

Tensor tanh_t(const Tensor& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::tanh(a[i]);
    return out;
}

Tensor exp_t(const Tensor& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::exp(a[i]);
    return out;
}

double sum(const Tensor& a) {
    return kern::ops().sum(a.data(), static_cast<std::size_t>(a.numel()));
}

Tensor sum_axes(const Tensor& a, std::span<const int> axes) {
    std::vector<bool> reduce(static_cast<std::size_t>(a.rank()), false);
    for (int ax : axes) {
        if (ax < 0 || ax >= a.rank())
            throw ShapeError("sum_axes: axis " + std::to_string(ax) + " out of range for " +
                             a.shape_str());
        reduce[static_cast<std::size_t>(ax)] = true;
    }
    std::vector<std::int64_t> out_shape;
    for (int d = 0; d < a.rank(); ++d)
        if (!reduce[static_cast<std::size_t>(d)]) out_shape.push_back(a.dim(d));
    if (out_shape.empty()) out_shape.push_back(1);
    Tensor out(out_shape);

    // strides of the input and of the kept axes within the output
    std::vector<std::int64_t> in_stride(static_cast<std::size_t>(a.rank()), 1);
    for (int d = a.rank() - 2; d >= 0; --d)
        in_stride[static_cast<std::size_t>(d)] =
            in_stride[static_cast<std::size_t>(d + 1)] * a.dim(d + 1);
    std::vector<std::int64_t> out_stride(static_cast<std::size_t>(a.rank()), 0);
    std::int64_t run = 1;
    for (int d = a.rank() - 1; d >= 0; --d) {
        if (!reduce[static_cast<std::size_t>(d)]) {
            out_stride[static_cast<std::size_t>(d)] = run;
            run *= a.dim(d);
        }
    }
    for (std::int64_t flat = 0; flat < a.numel(); ++flat) {
        std::int64_t oi = 0;
        std::int64_t rem = flat;
        for (int d = 0; d < a.rank(); ++d) {
            std::int64_t coord = rem / in_stride[static_cast<std::size_t>(d)];
            rem %= in_stride[static_cast<std::size_t>(d)];
            oi += coord * out_stride[static_cast<std::size_t>(d)];
        }
        out[oi] += a[flat];
    }
    return out;
}

}  // namespace strs
