#pragma once

#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "driveperc/error.hpp"

namespace dp {

// N-dimensional double-precision array, flat row-major storage.
// Convention for feature maps everywhere in this library: channels-first
// (C,H,W), batches as a leading axis (N,C,H,W).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at(int c, int h, int w) {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    double at(int c, int h, int w) const {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    double& at(int n, int c, int h, int w) {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double at(int n, int c, int h, int w) const {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double& at2(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    double at2(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

    Tensor reshape(std::vector<int> new_shape) const;

    void fill(double value);

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

size_t shape_product(const std::vector<int>& shape);

enum class Padding { Valid, Same };

// Cross-correlation (no kernel flip), the deep-learning convention.
// input: C_in x H x W, kernels: C_out x C_in x Kh x Kw.
// "same" pads with zeros, split symmetrically with the extra row/column on
// the bottom/right; output H' = floor((H + pad_h - Kh)/s_h) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels,
              std::pair<int, int> stride = {1, 1}, Padding padding = Padding::Valid);

struct PoolResult {
    Tensor output;
    // Flat input index of each output cell's maximum; ties break to the
    // lowest index. Used by the pooling backward pass.
    std::vector<size_t> argmax;
};

// Trailing rows/columns that do not fill a window are dropped.
PoolResult maxpool2d(const Tensor& input, std::pair<int, int> window, std::pair<int, int> stride);

// Bilinear upsample by an integer factor, align-corners=false:
// source coordinate = (dst + 0.5)/factor - 0.5, clamped to the valid range.
Tensor bilinear_upsample(const Tensor& input, int factor);

// Bilinear resample to an arbitrary target size, same coordinate convention.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

Tensor concat_channels(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);

// Low-level product used by conv2d and the dense layers. C(MxN) = op(A)·op(B)
// (or += with accumulate); transposed operands stay in their natural layout,
// only the view changes.
void gemm(const double* a, const double* b, double* c, int m, int k, int n,
          bool transpose_a = false, bool transpose_b = false, bool accumulate = false);

template <typename Fn>
Tensor map(const Tensor& t, Fn fn) {
    Tensor out = t;
    for (size_t i = 0; i < out.size(); ++i) out[i] = fn(out[i]);
    return out;
}

enum class Reduce { Sum, Mean, Max };
Tensor reduce(const Tensor& t, Reduce op, int axis);

double sum(const Tensor& t);
double mean(const Tensor& t);
double max_value(const Tensor& t);
double min_value(const Tensor& t);

// Flat argmax; ties resolve to the lowest index.
size_t argmax(const Tensor& t);
// Row-wise argmax of a 2-D tensor (one winner per row, lowest-index ties).
std::vector<int> argmax_rows(const Tensor& t);

// Zero padding, one (before, after) pair per axis.
Tensor pad(const Tensor& t, const std::vector<std::pair<int, int>>& amounts);

}  // namespace dp
