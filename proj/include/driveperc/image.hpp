#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "driveperc/tensor.hpp"

namespace dp {

enum class PixelFormat { Gray8, Rgb8 };

// 8-bit raster, row-major, RGB interleaved for Rgb8.
struct Image {
    int width = 0;
    int height = 0;
    PixelFormat format = PixelFormat::Gray8;
    std::vector<uint8_t> pixels;

    Image() = default;
    Image(int w, int h, PixelFormat fmt);

    int channels() const { return format == PixelFormat::Rgb8 ? 3 : 1; }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    uint8_t& px(int x, int y, int c = 0) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels() + c];
    }
    uint8_t px(int x, int y, int c = 0) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels() + c];
    }

    bool operator==(const Image& other) const = default;
};

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
};

struct GaussianKernelSpec {
    int size = 5;       // odd
    double sigma = 1.0; // > 0
};

// Binary PGM (P5) for Gray8 and binary PPM (P6) for Rgb8, maxval 255 only,
// single whitespace-delimited header (no comment lines). Round trips are
// byte-exact.
Image read_image(const std::string& path);
void write_image(const Image& image, const std::string& path);

// BT.601 luma: y = round(0.299 R + 0.587 G + 0.114 B), clamped to [0,255].
Image to_grayscale(const Image& image);

// Full-range BT.601 RGB->YUV on pixels scaled to [0,1]:
//   Y = 0.299 R + 0.587 G + 0.114 B            in [0, 1]
//   U = (B - Y) / 1.772                        in [-0.5, 0.5]
//   V = (R - Y) / 1.402                        in [-0.5, 0.5]
// Returns a 3xHxW tensor (Y, U, V planes).
Tensor rgb_to_yuv(const Image& image);

// Centered samples of G(x,y) = exp(-(x^2+y^2)/(2 sigma^2)) / (2 pi sigma^2)
// at integer offsets, normalized to sum exactly 1.
Tensor gaussian_kernel(const GaussianKernelSpec& spec);

// 2-D convolution with the Gaussian kernel; borders use clamp-to-edge
// replication. The tensor overload accepts HxW or CxHxW (per channel).
Image gaussian_blur(const Image& gray, const GaussianKernelSpec& spec);
Tensor gaussian_blur(const Tensor& plane, const GaussianKernelSpec& spec);

Image resize_bilinear(const Image& image, int out_w, int out_h);
Image crop(const Image& image, const Rect& rect);
Image flip_horizontal(const Image& image);

// CxHxW tensor of pixels / 255 (1 channel for Gray8, 3 for Rgb8).
Tensor normalize(const Image& image);

// Inverse-mapping warp with bilinear sampling. `matrix` is the forward
// transform [a b tx; c d ty] taking source to destination coordinates;
// samples falling outside the source are black. Bytes are produced with
// round-half-up.
Image affine_warp(const Image& image, const std::array<double, 6>& matrix);

// HxW doubles in [0,255]; converts Rgb8 through to_grayscale first.
Tensor gray_plane(const Image& image);

// Clamp to [0,255] and round-half-up into a Gray8 image.
Image gray8_from_plane(const Tensor& plane);

}  // namespace dp
