#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace strs {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major n-dimensional array of doubles. All arithmetic below is
/// pure (inputs untouched, fresh output); values are safe to share read-only
/// across threads.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(checked_numel(shape_)), 0.0);
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_numel(shape_) != static_cast<std::int64_t>(data_.size()))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_to_string(shape_));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor full(std::vector<std::int64_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    const std::vector<std::int64_t>& shape() const { return shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at2(std::int64_t i, std::int64_t j) { return data_[idx2(i, j)]; }
    double at2(std::int64_t i, std::int64_t j) const { return data_[idx2(i, j)]; }
    double& at3(std::int64_t i, std::int64_t j, std::int64_t k) { return data_[idx3(i, j, k)]; }
    double at3(std::int64_t i, std::int64_t j, std::int64_t k) const { return data_[idx3(i, j, k)]; }
    double& at4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
        return data_[idx4(a, b, c, d)];
    }
    double at4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
        return data_[idx4(a, b, c, d)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    std::string shape_str() const { return shape_to_string(shape_); }

    static std::string shape_to_string(const std::vector<std::int64_t>& s);
    static std::int64_t checked_numel(const std::vector<std::int64_t>& s);

private:
    std::size_t idx2(std::int64_t i, std::int64_t j) const {
        return static_cast<std::size_t>(i * shape_[1] + j);
    }
    std::size_t idx3(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k);
    }
    std::size_t idx4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
        return static_cast<std::size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d);
    }

    std::vector<std::int64_t> shape_;
    std::vector<double> data_;
};

// ----- shape algebra ---------------------------------------------------------

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

// ----- linear algebra --------------------------------------------------------

/// Standard matrix product of rank-2 tensors; shapes [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Rank-2 transpose.
Tensor transpose(const Tensor& a);

struct Conv2dGeom {
    std::int64_t in_ch = 0, in_h = 0, in_w = 0;
    std::int64_t out_ch = 0, kh = 0, kw = 0;
    std::int64_t stride = 1, padding = 0, groups = 1;
    std::int64_t out_h = 0, out_w = 0;
};

/// Validates input [C_in,H,W] against kernel [C_out,C_in/groups,kh,kw] and
/// resolves the output geometry. Throws ShapeError naming both shapes.
Conv2dGeom conv2d_geometry(const Tensor& input, const Tensor& kernel,
                           std::int64_t stride, std::int64_t padding, std::int64_t groups);

/// Direct cross-correlation via grouped im2col. groups == C_in is depthwise.
Tensor conv2d(const Tensor& input, const Tensor& kernel,
              std::int64_t stride = 1, std::int64_t padding = 0, std::int64_t groups = 1);

/// im2col patch matrix for one group: [ (C_in/g)*kh*kw , out_h*out_w ].
/// `group_in_base` is the first input channel of the group.
void im2col_group(const Tensor& input, const Conv2dGeom& g, std::int64_t group_in_base,
                  double* col);

/// Scatter-add transpose of im2col_group (for input gradients).
void col2im_group(const double* col, const Conv2dGeom& g, std::int64_t group_in_base,
                  Tensor& grad_input);

// ----- elementwise suite -----------------------------------------------------

Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
/// sign(0) = 0.
Tensor sign(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);

double sum(const Tensor& a);
/// Sum-reduce over the given axes (deduplicated, each in [0,rank)). The
/// reduced axes are removed from the shape; reducing all axes yields shape [1].
Tensor sum_axes(const Tensor& a, std::span<const int> axes);

}  // namespace strs
