#include <algorithm>
#include <cmath>

#include "driveperc/error.hpp"
#include "driveperc/image.hpp"

namespace dp {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

uint8_t to_byte(double v) {  // round-half-up, clamped
    const double r = std::floor(v + 0.5);
    return static_cast<uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace

Image to_grayscale(const Image& image) {
    if (image.format != PixelFormat::Rgb8) throw_parameter("to_grayscale expects an Rgb8 image");
    Image out(image.width, image.height, PixelFormat::Gray8);
    for (size_t i = 0; i < image.pixel_count(); ++i) {
        const double r = image.pixels[i * 3], g = image.pixels[i * 3 + 1], b = image.pixels[i * 3 + 2];
        out.pixels[i] = to_byte(0.299 * r + 0.587 * g + 0.114 * b);
    }
    return out;
}

Tensor rgb_to_yuv(const Image& image) {
    if (image.format != PixelFormat::Rgb8) throw_parameter("rgb_to_yuv expects an Rgb8 image");
    Tensor out({3, image.height, image.width});
    const size_t plane = image.pixel_count();
    for (size_t i = 0; i < plane; ++i) {
        const double r = image.pixels[i * 3] / 255.0;
        const double g = image.pixels[i * 3 + 1] / 255.0;
        const double b = image.pixels[i * 3 + 2] / 255.0;
        const double y = 0.299 * r + 0.587 * g + 0.114 * b;
        out[i] = y;
        out[plane + i] = (b - y) / 1.772;
        out[2 * plane + i] = (r - y) / 1.402;
    }
    return out;
}

Tensor gaussian_kernel(const GaussianKernelSpec& spec) {
    if (spec.size <= 0 || spec.size % 2 == 0) throw_parameter("gaussian kernel size must be odd and positive");
    if (spec.sigma <= 0.0) throw_parameter("gaussian sigma must be positive");
    const int r = spec.size / 2;
    Tensor k({spec.size, spec.size});
    const double norm = 1.0 / (2.0 * kPi * spec.sigma * spec.sigma);
    double total = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            const double v = norm * std::exp(-(static_cast<double>(x) * x + static_cast<double>(y) * y) /
                                             (2.0 * spec.sigma * spec.sigma));
            k.at2(y + r, x + r) = v;
            total += v;
        }
    }
    for (size_t i = 0; i < k.size(); ++i) k[i] /= total;
    return k;
}

namespace {

// Clamp-to-edge 2-D convolution of one HxW plane with a (2r+1)^2 kernel.
void convolve_plane(const double* src, double* dst, int h, int w, const Tensor& kernel) {
    const int r = kernel.dim(0) / 2;
    if (kernel.dim(0) > h || kernel.dim(1) > w)
        throw_dimension("blur kernel exceeds image size");
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = -r; ky <= r; ++ky) {
                const int sy = std::clamp(y + ky, 0, h - 1);
                for (int kx = -r; kx <= r; ++kx) {
                    const int sx = std::clamp(x + kx, 0, w - 1);
                    acc += kernel.at2(ky + r, kx + r) * src[static_cast<size_t>(sy) * w + sx];
                }
            }
            dst[static_cast<size_t>(y) * w + x] = acc;
        }
    }
}

}  // namespace

Tensor gaussian_blur(const Tensor& plane, const GaussianKernelSpec& spec) {
    const Tensor k = gaussian_kernel(spec);
    if (plane.ndim() == 2) {
        Tensor out(plane.shape());
        convolve_plane(plane.data(), out.data(), plane.dim(0), plane.dim(1), k);
        return out;
    }
    if (plane.ndim() == 3) {
        Tensor out(plane.shape());
        const size_t stride = static_cast<size_t>(plane.dim(1)) * plane.dim(2);
        for (int c = 0; c < plane.dim(0); ++c)
            convolve_plane(plane.data() + c * stride, out.data() + c * stride, plane.dim(1), plane.dim(2), k);
        return out;
    }
    throw_dimension("gaussian_blur expects a HxW or CxHxW tensor");
}

Image gaussian_blur(const Image& gray, const GaussianKernelSpec& spec) {
    if (gray.format != PixelFormat::Gray8) throw_parameter("gaussian_blur image overload expects Gray8");
    Tensor plane = gray_plane(gray);
    return gray8_from_plane(gaussian_blur(plane, spec));
}

Image resize_bilinear(const Image& image, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw_parameter("resize target dimensions must be positive");
    const int ch = image.channels();
    Image out(out_w, out_h, image.format);
    const double sy_scale = static_cast<double>(image.height) / out_h;
    const double sx_scale = static_cast<double>(image.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double sy = (y + 0.5) * sy_scale - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(image.height - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < out_w; ++x) {
            double sx = (x + 0.5) * sx_scale - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(image.width - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < ch; ++c) {
                const double top = image.px(x0, y0, c) * (1.0 - fx) + image.px(x1, y0, c) * fx;
                const double bot = image.px(x0, y1, c) * (1.0 - fx) + image.px(x1, y1, c) * fx;
                out.px(x, y, c) = to_byte(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    return out;
}

Image crop(const Image& image, const Rect& rect) {
    if (rect.w <= 0 || rect.h <= 0 || rect.x < 0 || rect.y < 0 ||
        rect.x + rect.w > image.width || rect.y + rect.h > image.height)
        throw_parameter("crop rect out of image bounds");
    const int ch = image.channels();
    Image out(rect.w, rect.h, image.format);
    for (int y = 0; y < rect.h; ++y)
        for (int x = 0; x < rect.w; ++x)
            for (int c = 0; c < ch; ++c) out.px(x, y, c) = image.px(rect.x + x, rect.y + y, c);
    return out;
}

Image flip_horizontal(const Image& image) {
    const int ch = image.channels();
    Image out(image.width, image.height, image.format);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < ch; ++c) out.px(x, y, c) = image.px(image.width - 1 - x, y, c);
    return out;
}

Tensor normalize(const Image& image) {
    const int ch = image.channels();
    Tensor out({ch, image.height, image.width});
    const size_t plane = image.pixel_count();
    for (size_t i = 0; i < plane; ++i)
        for (int c = 0; c < ch; ++c) out[static_cast<size_t>(c) * plane + i] = image.pixels[i * ch + c] / 255.0;
    return out;
}

Image affine_warp(const Image& image, const std::array<double, 6>& matrix) {
    const double a = matrix[0], b = matrix[1], tx = matrix[2];
    const double c = matrix[3], d = matrix[4], ty = matrix[5];
    const double det = a * d - b * c;
    if (std::abs(det) < 1e-12) throw_parameter("affine matrix is singular");
    // Inverse of [a b; c d] and the translation, mapping destination back to
    // source coordinates.
    const double ia = d / det, ib = -b / det;
    const double ic = -c / det, id = a / det;

    const int ch = image.channels();
    Image out(image.width, image.height, image.format);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double dx = x - tx, dy = y - ty;
            const double sx = ia * dx + ib * dy;
            const double sy = ic * dx + id * dy;
            if (sx < 0.0 || sy < 0.0 || sx > image.width - 1 || sy > image.height - 1)
                continue;  // outside the source: stays black
            const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const int y1 = std::min(y0 + 1, image.height - 1);
            const double fx = sx - x0, fy = sy - y0;
            for (int cc = 0; cc < ch; ++cc) {
                const double top = image.px(x0, y0, cc) * (1.0 - fx) + image.px(x1, y0, cc) * fx;
                const double bot = image.px(x0, y1, cc) * (1.0 - fx) + image.px(x1, y1, cc) * fx;
                out.px(x, y, cc) = to_byte(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    return out;
}

Tensor gray_plane(const Image& image) {
    const Image* gray = &image;
    Image tmp;
    if (image.format == PixelFormat::Rgb8) {
        tmp = to_grayscale(image);
        gray = &tmp;
    }
    Tensor out({gray->height, gray->width});
    for (size_t i = 0; i < gray->pixels.size(); ++i) out[i] = gray->pixels[i];
    return out;
}

Image gray8_from_plane(const Tensor& plane) {
    if (plane.ndim() != 2) throw_dimension("gray8_from_plane expects a HxW tensor");
    Image out(plane.dim(1), plane.dim(0), PixelFormat::Gray8);
    for (size_t i = 0; i < plane.size(); ++i) out.pixels[i] = to_byte(plane[i]);
    return out;
}

}  // namespace dp
