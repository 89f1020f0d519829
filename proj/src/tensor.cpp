#include "driveperc/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "driveperc/conv_detail.hpp"

namespace dp {

namespace {

std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

void require_3d(const Tensor& t, const char* what) {
    if (t.ndim() != 3) throw_dimension(std::string(what) + ": expected a CxHxW tensor, got " + shape_string(t.shape()));
}

}  // namespace

size_t shape_product(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw_dimension("tensor dimensions must be positive, got " + shape_string(shape));
        n *= static_cast<size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_product(shape_))
        throw_dimension("data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::reshape(std::vector<int> new_shape) const {
    if (shape_product(new_shape) != size())
        throw_dimension("reshape from " + shape_string(shape_) + " to " + shape_string(new_shape) + " changes element count");
    return Tensor(std::move(new_shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorOut = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void gemm(const double* a, const double* b, double* c, int m, int k, int n,
          bool transpose_a, bool transpose_b, bool accumulate) {
    RowMajorOut mc(c, m, n);
    RowMajorMap ma(a, transpose_a ? k : m, transpose_a ? m : k);
    RowMajorMap mb(b, transpose_b ? n : k, transpose_b ? k : n);
    auto apply = [&](const auto& product) {
        if (accumulate)
            mc.noalias() += product;
        else
            mc.noalias() = product;
    };
    if (!transpose_a && !transpose_b)
        apply(ma * mb);
    else if (!transpose_a && transpose_b)
        apply(ma * mb.transpose());
    else if (transpose_a && !transpose_b)
        apply(ma.transpose() * mb);
    else
        apply(ma.transpose() * mb.transpose());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw_dimension("matmul expects 2-D tensors, got " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
    if (a.dim(1) != b.dim(0))
        throw_dimension("matmul inner dimensions differ: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor out({a.dim(0), b.dim(1)});
    gemm(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1));
    return out;
}

namespace detail {

ConvGeometry conv_geometry(int h, int w, int kh, int kw, int sh, int sw, Padding padding) {
    int pad_h = 0, pad_w = 0;
    if (padding == Padding::Same) {
        int out_h = (h + sh - 1) / sh;
        int out_w = (w + sw - 1) / sw;
        pad_h = std::max((out_h - 1) * sh + kh - h, 0);
        pad_w = std::max((out_w - 1) * sw + kw - w, 0);
    }
    if (kh > h + pad_h || kw > w + pad_w)
        throw_dimension("kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " exceeds padded input " +
                        std::to_string(h + pad_h) + "x" + std::to_string(w + pad_w));
    ConvGeometry g;
    g.out_h = (h + pad_h - kh) / sh + 1;
    g.out_w = (w + pad_w - kw) / sw + 1;
    g.pad_top = pad_h / 2;   // extra pixel goes to the bottom/right
    g.pad_left = pad_w / 2;
    return g;
}

void im2col(const double* src, int c_in, int h, int w, int kh, int kw, int sh, int sw,
            int pad_top, int pad_left, int out_h, int out_w, double* col) {
    const size_t plane = static_cast<size_t>(out_h) * out_w;
    size_t row = 0;
    for (int c = 0; c < c_in; ++c) {
        const double* chan = src + static_cast<size_t>(c) * h * w;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj, ++row) {
                double* dst = col + row * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * sh - pad_top + ki;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + out_w, 0.0);
                        dst += out_w;
                        continue;
                    }
                    const double* line = chan + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * sw - pad_left + kj;
                        *dst++ = (ix < 0 || ix >= w) ? 0.0 : line[ix];
                    }
                }
            }
        }
    }
}

void col2im(const double* col, int c_in, int h, int w, int kh, int kw, int sh, int sw,
            int pad_top, int pad_left, int out_h, int out_w, double* dst) {
    const size_t plane = static_cast<size_t>(out_h) * out_w;
    size_t row = 0;
    for (int c = 0; c < c_in; ++c) {
        double* chan = dst + static_cast<size_t>(c) * h * w;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj, ++row) {
                const double* src_row = col + row * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * sh - pad_top + ki;
                    if (iy < 0 || iy >= h) {
                        src_row += out_w;
                        continue;
                    }
                    double* line = chan + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * sw - pad_left + kj;
                        if (ix >= 0 && ix < w) line[ix] += src_row[ox];
                    }
                    src_row += out_w;
                }
            }
        }
    }
}

}  // namespace detail

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::pair<int, int> stride, Padding padding) {
    require_3d(input, "conv2d input");
    if (kernels.ndim() != 4)
        throw_dimension("conv2d kernels: expected C_out x C_in x Kh x Kw, got " + shape_string(kernels.shape()));
    if (kernels.dim(1) != input.dim(0))
        throw_dimension("conv2d channel mismatch: input has " + std::to_string(input.dim(0)) +
                        " channels, kernels expect " + std::to_string(kernels.dim(1)));
    if (stride.first <= 0 || stride.second <= 0) throw_parameter("conv2d stride must be positive");

    const int c_out = kernels.dim(0), c_in = kernels.dim(1);
    const int kh = kernels.dim(2), kw = kernels.dim(3);
    const auto g = detail::conv_geometry(input.dim(1), input.dim(2), kh, kw, stride.first, stride.second, padding);

    const int k = c_in * kh * kw;
    const size_t plane = static_cast<size_t>(g.out_h) * g.out_w;
    std::vector<double> col(static_cast<size_t>(k) * plane);
    detail::im2col(input.data(), c_in, input.dim(1), input.dim(2), kh, kw,
                   stride.first, stride.second, g.pad_top, g.pad_left, g.out_h, g.out_w, col.data());

    Tensor out({c_out, g.out_h, g.out_w});
    gemm(kernels.data(), col.data(), out.data(), c_out, k, static_cast<int>(plane));
    return out;
}

PoolResult maxpool2d(const Tensor& input, std::pair<int, int> window, std::pair<int, int> stride) {
    require_3d(input, "maxpool2d input");
    const int wh = window.first, ww = window.second;
    if (wh <= 0 || ww <= 0) throw_dimension("maxpool2d window must be positive");
    if (stride.first <= 0 || stride.second <= 0) throw_parameter("maxpool2d stride must be positive");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (wh > h || ww > w)
        throw_dimension("maxpool2d window " + std::to_string(wh) + "x" + std::to_string(ww) +
                        " exceeds input " + std::to_string(h) + "x" + std::to_string(w));

    const int out_h = (h - wh) / stride.first + 1;
    const int out_w = (w - ww) / stride.second + 1;
    PoolResult res{Tensor({c, out_h, out_w}), {}};
    res.argmax.resize(res.output.size());
    size_t o = 0;
    for (int ch = 0; ch < c; ++ch) {
        const size_t base = static_cast<size_t>(ch) * h * w;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox, ++o) {
                const int y0 = oy * stride.first, x0 = ox * stride.second;
                size_t best_idx = base + static_cast<size_t>(y0) * w + x0;
                double best = input[best_idx];
                for (int dy = 0; dy < wh; ++dy) {
                    for (int dx = 0; dx < ww; ++dx) {
                        const size_t idx = base + static_cast<size_t>(y0 + dy) * w + (x0 + dx);
                        if (input[idx] > best) {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                res.output[o] = best;
                res.argmax[o] = best_idx;
            }
        }
    }
    return res;
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
    require_3d(input, "bilinear_resize input");
    if (out_h <= 0 || out_w <= 0) throw_parameter("bilinear_resize target size must be positive");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out({c, out_h, out_w});
    const double sy_scale = static_cast<double>(h) / out_h;
    const double sx_scale = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double sy = (y + 0.5) * sy_scale - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int x = 0; x < out_w; ++x) {
            double sx = (x + 0.5) * sx_scale - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double top = input.at(ch, y0, x0) * (1.0 - fx) + input.at(ch, y0, x1) * fx;
                const double bot = input.at(ch, y1, x0) * (1.0 - fx) + input.at(ch, y1, x1) * fx;
                out.at(ch, y, x) = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    return out;
}

Tensor bilinear_upsample(const Tensor& input, int factor) {
    require_3d(input, "bilinear_upsample input");
    if (factor < 1) throw_parameter("bilinear_upsample factor must be >= 1");
    if (factor == 1) return input;
    return bilinear_resize(input, input.dim(1) * factor, input.dim(2) * factor);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_3d(a, "concat_channels");
    require_3d(b, "concat_channels");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw_dimension("concat_channels spatial mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

Tensor reduce(const Tensor& t, Reduce op, int axis) {
    if (axis < 0 || axis >= t.ndim()) throw_parameter("reduce axis out of range");
    const auto& shape = t.shape();
    size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<size_t>(shape[i]);
    for (int i = axis + 1; i < t.ndim(); ++i) inner *= static_cast<size_t>(shape[i]);
    const size_t n = static_cast<size_t>(shape[axis]);

    std::vector<int> out_shape;
    for (int i = 0; i < t.ndim(); ++i)
        if (i != axis) out_shape.push_back(shape[i]);
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor out(out_shape);
    for (size_t o = 0; o < outer; ++o) {
        for (size_t in = 0; in < inner; ++in) {
            const double* p = t.data() + (o * n) * inner + in;
            double acc = (op == Reduce::Max) ? *p : 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double v = p[i * inner];
                if (op == Reduce::Max)
                    acc = std::max(acc, v);
                else
                    acc += v;
            }
            if (op == Reduce::Mean) acc /= static_cast<double>(n);
            out[o * inner + in] = acc;
        }
    }
    return out;
}

double sum(const Tensor& t) {
    double s = 0.0;
    for (size_t i = 0; i < t.size(); ++i) s += t[i];
    return s;
}

double mean(const Tensor& t) {
    if (t.empty()) throw_parameter("mean of an empty tensor");
    return sum(t) / static_cast<double>(t.size());
}

double max_value(const Tensor& t) {
    if (t.empty()) throw_parameter("max of an empty tensor");
    return *std::max_element(t.vec().begin(), t.vec().end());
}

double min_value(const Tensor& t) {
    if (t.empty()) throw_parameter("min of an empty tensor");
    return *std::min_element(t.vec().begin(), t.vec().end());
}

size_t argmax(const Tensor& t) {
    if (t.empty()) throw_parameter("argmax of an empty tensor");
    size_t best = 0;
    for (size_t i = 1; i < t.size(); ++i)
        if (t[i] > t[best]) best = i;
    return best;
}

std::vector<int> argmax_rows(const Tensor& t) {
    if (t.ndim() != 2) throw_dimension("argmax_rows expects a 2-D tensor");
    std::vector<int> out(static_cast<size_t>(t.dim(0)));
    for (int r = 0; r < t.dim(0); ++r) {
        int best = 0;
        for (int c = 1; c < t.dim(1); ++c)
            if (t.at2(r, c) > t.at2(r, best)) best = c;
        out[static_cast<size_t>(r)] = best;
    }
    return out;
}

Tensor pad(const Tensor& t, const std::vector<std::pair<int, int>>& amounts) {
    if (static_cast<int>(amounts.size()) != t.ndim())
        throw_dimension("pad needs one (before,after) pair per axis");
    std::vector<int> out_shape(t.shape());
    for (int i = 0; i < t.ndim(); ++i) {
        if (amounts[static_cast<size_t>(i)].first < 0 || amounts[static_cast<size_t>(i)].second < 0)
            throw_parameter("pad amounts must be nonnegative");
        out_shape[static_cast<size_t>(i)] += amounts[static_cast<size_t>(i)].first + amounts[static_cast<size_t>(i)].second;
    }
    Tensor out(out_shape);

    std::vector<int> idx(static_cast<size_t>(t.ndim()), 0);
    const auto& in_shape = t.shape();
    for (size_t flat = 0; flat < t.size(); ++flat) {
        size_t out_flat = 0;
        for (int a = 0; a < t.ndim(); ++a)
            out_flat = out_flat * static_cast<size_t>(out_shape[static_cast<size_t>(a)]) +
                       static_cast<size_t>(idx[static_cast<size_t>(a)] + amounts[static_cast<size_t>(a)].first);
        out[out_flat] = t[flat];
        for (int a = t.ndim() - 1; a >= 0; --a) {
            if (++idx[static_cast<size_t>(a)] < in_shape[static_cast<size_t>(a)]) break;
            idx[static_cast<size_t>(a)] = 0;
        }
    }
    return out;
}

}  // namespace dp
