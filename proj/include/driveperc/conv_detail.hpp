#pragma once

#include "driveperc/tensor.hpp"

// Shared convolution building blocks used by tensor_core's conv2d and the
// Conv2D layer's batched forward/backward.
namespace dp::detail {

struct ConvGeometry {
    int out_h = 0, out_w = 0;
    int pad_top = 0, pad_left = 0;
};

ConvGeometry conv_geometry(int h, int w, int kh, int kw, int sh, int sw, Padding padding);

// col is (c_in*kh*kw) x (out_h*out_w); rows ordered (c, ki, kj), columns
// ordered (oy, ox). Out-of-image taps are zero.
void im2col(const double* src, int c_in, int h, int w, int kh, int kw, int sh, int sw,
            int pad_top, int pad_left, int out_h, int out_w, double* col);

// Scatter-add transpose of im2col; dst must be zeroed by the caller.
void col2im(const double* col, int c_in, int h, int w, int kh, int kw, int sh, int sw,
            int pad_top, int pad_left, int out_h, int out_w, double* dst);

}  // namespace dp::detail
