#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "driveperc/error.hpp"
#include "driveperc/lane.hpp"

namespace dp {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

size_t EdgeMap::count() const {
    size_t n = 0;
    for (uint8_t v : mask) n += v != 0;
    return n;
}

void PipelineConfig::validate() const {
    if (blur.size <= 0 || blur.size % 2 == 0) throw_parameter("pipeline.blur_size must be odd and positive");
    if (blur.sigma <= 0) throw_parameter("pipeline.blur_sigma must be positive");
    if (!(canny_low > 0 && canny_low < canny_high && canny_high <= 255.0 * 4.0))
        throw_parameter("pipeline thresholds must satisfy 0 < low < high <= 1020");
    if (roi.size() < 3) throw_parameter("pipeline.roi needs at least 3 vertices");
    for (auto [x, y] : roi)
        if (x < 0 || x > 1 || y < 0 || y > 1) throw_parameter("pipeline.roi coordinates must be fractional [0,1]");
    if (hough_r_res <= 0 || hough_theta_res <= 0) throw_parameter("hough resolutions must be positive");
    if (hough_threshold < 1) throw_parameter("pipeline.hough_threshold must be >= 1");
    if (slope_min < 0) throw_parameter("pipeline.slope_min must be nonnegative");
    if (extent_fraction <= 0 || extent_fraction >= 1) throw_parameter("pipeline.extent_fraction must be in (0,1)");
    if (overlay_thickness < 1) throw_parameter("pipeline.overlay_thickness must be >= 1");
}

Image color_select(const Image& image, uint8_t r_min, uint8_t g_min, uint8_t b_min) {
    if (image.format != PixelFormat::Rgb8) throw_parameter("color_select expects an Rgb8 image");
    Image out = image;
    for (size_t i = 0; i < image.pixel_count(); ++i) {
        uint8_t* p = &out.pixels[i * 3];
        if (p[0] < r_min || p[1] < g_min || p[2] < b_min) p[0] = p[1] = p[2] = 0;
    }
    return out;
}

SobelResult sobel_gradients(const Tensor& gray) {
    if (gray.ndim() != 2) throw_dimension("sobel_gradients expects a HxW tensor");
    const int h = gray.dim(0), w = gray.dim(1);
    SobelResult res{Tensor({h, w}), Tensor({h, w})};
    auto px = [&](int y, int x) {
        return gray.at2(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = -px(y - 1, x - 1) + px(y - 1, x + 1)
                              - 2 * px(y, x - 1) + 2 * px(y, x + 1)
                              - px(y + 1, x - 1) + px(y + 1, x + 1);
            const double gy = -px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1)
                              + px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1);
            res.magnitude.at2(y, x) = std::sqrt(gx * gx + gy * gy);
            res.direction.at2(y, x) = std::atan2(gy, gx);
        }
    }
    return res;
}

EdgeMap canny_on_blurred(const Tensor& blurred, double low, double high) {
    if (!(low > 0 && low < high)) throw_parameter("canny requires 0 < low < high");
    const SobelResult grad = sobel_gradients(blurred);
    const int h = blurred.dim(0), w = blurred.dim(1);

    auto mag = [&](int x, int y) {
        return (x < 0 || x >= w || y < 0 || y >= h) ? 0.0 : grad.magnitude.at2(y, x);
    };

    // Non-maximum suppression: quantize the gradient direction to 4 bins and
    // keep a pixel only if it is >= the neighbor on one side and strictly >
    // on the other, so plateau pairs keep exactly one pixel.
    EdgeMap strong_or_weak(w, h);
    std::vector<uint8_t> is_strong(static_cast<size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double m = grad.magnitude.at2(y, x);
            if (m < low) continue;
            double ang = grad.direction.at2(y, x) * 180.0 / kPi;
            if (ang < 0) ang += 180.0;  // direction is modulo 180 for NMS
            int dx = 1, dy = 0;         // bin 0: horizontal gradient
            if (ang >= 22.5 && ang < 67.5) {
                dx = 1; dy = 1;          // bin 45
            } else if (ang >= 67.5 && ang < 112.5) {
                dx = 0; dy = 1;          // bin 90
            } else if (ang >= 112.5 && ang < 157.5) {
                dx = -1; dy = 1;         // bin 135
            }
            if (m >= mag(x - dx, y - dy) && m > mag(x + dx, y + dy)) {
                strong_or_weak.at(x, y) = 1;
                if (m >= high) is_strong[static_cast<size_t>(y) * w + x] = 1;
            }
        }
    }

    // Hysteresis: flood from strong pixels over 8-connected weak ones.
    EdgeMap out(w, h);
    std::deque<std::pair<int, int>> frontier;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (is_strong[static_cast<size_t>(y) * w + x]) {
                out.at(x, y) = 1;
                frontier.emplace_back(x, y);
            }
    while (!frontier.empty()) {
        auto [cx, cy] = frontier.front();
        frontier.pop_front();
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = cx + dx, ny = cy + dy;
                if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                if (strong_or_weak.at(nx, ny) && !out.at(nx, ny)) {
                    out.at(nx, ny) = 1;
                    frontier.emplace_back(nx, ny);
                }
            }
        }
    }
    return out;
}

EdgeMap canny(const Tensor& gray, double low, double high, const GaussianKernelSpec& blur) {
    return canny_on_blurred(gaussian_blur(gray, blur), low, high);
}

namespace {

struct PolygonTester {
    std::vector<std::pair<double, double>> v;

    explicit PolygonTester(const RoiPolygon& polygon, int width, int height) {
        for (auto [x, y] : polygon.vertices) {
            if (x < 0 || y < 0 || x > width - 1 || y > height - 1)
                throw_parameter("roi polygon vertex outside image bounds");
            if (v.empty() || v.back() != std::make_pair(x, y)) v.emplace_back(x, y);
        }
        if (v.size() > 1 && v.front() == v.back()) v.pop_back();
        if (v.size() < 3) throw_parameter("roi polygon needs at least 3 distinct vertices");
        double area2 = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            const auto& [x1, y1] = v[i];
            const auto& [x2, y2] = v[(i + 1) % v.size()];
            area2 += x1 * y2 - x2 * y1;
        }
        if (std::abs(area2) < 1e-9) throw_parameter("roi polygon has zero area");
    }

    static bool on_segment(double px, double py, double x1, double y1, double x2, double y2) {
        const double cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
        if (std::abs(cross) > 1e-9 * (std::abs(x2 - x1) + std::abs(y2 - y1) + 1)) return false;
        const double dot = (px - x1) * (x2 - x1) + (py - y1) * (y2 - y1);
        const double len2 = (x2 - x1) * (x2 - x1) + (y2 - y1) * (y2 - y1);
        return dot >= -1e-9 && dot <= len2 + 1e-9;
    }

    bool contains(double px, double py) const {
        bool inside = false;
        for (size_t i = 0; i < v.size(); ++i) {
            const auto& [x1, y1] = v[i];
            const auto& [x2, y2] = v[(i + 1) % v.size()];
            if (on_segment(px, py, x1, y1, x2, y2)) return true;  // boundary is inside
            if ((y1 > py) != (y2 > py)) {
                const double xi = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
                if (px < xi) inside = !inside;
            }
        }
        return inside;
    }
};

}  // namespace

EdgeMap roi_mask(const EdgeMap& map, const RoiPolygon& polygon) {
    PolygonTester tester(polygon, map.width, map.height);
    EdgeMap out = map;
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            if (!tester.contains(x, y)) out.at(x, y) = 0;
    return out;
}

Image roi_mask(const Image& image, const RoiPolygon& polygon) {
    PolygonTester tester(polygon, image.width, image.height);
    const int ch = image.channels();
    Image out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (!tester.contains(x, y))
                for (int c = 0; c < ch; ++c) out.px(x, y, c) = 0;
    return out;
}

HoughAccumulator hough_accumulate(const EdgeMap& edges, double r_res, double theta_res) {
    if (r_res <= 0 || theta_res <= 0) throw_parameter("hough resolutions must be positive");
    const double diag = std::ceil(std::hypot(edges.width, edges.height));
    const int n_theta = static_cast<int>(std::ceil(kPi / theta_res - 1e-12));
    const int n_r = static_cast<int>(std::floor(2.0 * diag / r_res)) + 1;

    HoughAccumulator acc;
    acc.r_min = -diag;
    acc.r_res = r_res;
    acc.theta_res = theta_res;
    acc.votes = Tensor({n_r, n_theta});

    std::vector<double> cos_t(static_cast<size_t>(n_theta)), sin_t(static_cast<size_t>(n_theta));
    for (int j = 0; j < n_theta; ++j) {
        cos_t[static_cast<size_t>(j)] = std::cos(j * theta_res);
        sin_t[static_cast<size_t>(j)] = std::sin(j * theta_res);
    }

    for (int y = 0; y < edges.height; ++y) {
        for (int x = 0; x < edges.width; ++x) {
            if (!edges.at(x, y)) continue;
            for (int j = 0; j < n_theta; ++j) {
                const double r = x * cos_t[static_cast<size_t>(j)] + y * sin_t[static_cast<size_t>(j)];
                int bin = static_cast<int>(std::lround((r - acc.r_min) / r_res));
                bin = std::clamp(bin, 0, n_r - 1);
                acc.votes.at2(bin, j) += 1.0;
            }
        }
    }
    return acc;
}

std::vector<HoughPeak> hough_transform(const EdgeMap& edges, double r_res, double theta_res, int threshold) {
    const HoughAccumulator acc = hough_accumulate(edges, r_res, theta_res);
    const int n_r = acc.votes.dim(0), n_theta = acc.votes.dim(1);

    // Cells meeting the threshold that no 8-neighbor exceeds.
    std::vector<uint8_t> maximal(static_cast<size_t>(n_r) * n_theta, 0);
    for (int i = 0; i < n_r; ++i) {
        for (int j = 0; j < n_theta; ++j) {
            const double v = acc.votes.at2(i, j);
            if (v < threshold) continue;
            bool is_peak = true;
            for (int di = -1; di <= 1 && is_peak; ++di) {
                for (int dj = -1; dj <= 1 && is_peak; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const int ni = i + di, nj = j + dj;
                    if (ni < 0 || ni >= n_r || nj < 0 || nj >= n_theta) continue;
                    if (acc.votes.at2(ni, nj) > v) is_peak = false;
                }
            }
            if (is_peak) maximal[static_cast<size_t>(i) * n_theta + j] = 1;
        }
    }

    // Equal-valued maximal cells that touch form one plateau; it yields one
    // peak at the member cell nearest the plateau centroid, so ties do not
    // drift systematically toward low bins.
    std::vector<HoughPeak> peaks;
    std::vector<uint8_t> seen(maximal.size(), 0);
    std::vector<std::pair<int, int>> component, frontier;
    for (int i = 0; i < n_r; ++i) {
        for (int j = 0; j < n_theta; ++j) {
            const size_t idx = static_cast<size_t>(i) * n_theta + j;
            if (!maximal[idx] || seen[idx]) continue;
            const double v = acc.votes.at2(i, j);
            component.clear();
            frontier.assign(1, {i, j});
            seen[idx] = 1;
            while (!frontier.empty()) {
                auto [ci, cj] = frontier.back();
                frontier.pop_back();
                component.emplace_back(ci, cj);
                for (int di = -1; di <= 1; ++di) {
                    for (int dj = -1; dj <= 1; ++dj) {
                        const int ni = ci + di, nj = cj + dj;
                        if (ni < 0 || ni >= n_r || nj < 0 || nj >= n_theta) continue;
                        const size_t nidx = static_cast<size_t>(ni) * n_theta + nj;
                        if (!maximal[nidx] || seen[nidx] || acc.votes.at2(ni, nj) != v) continue;
                        seen[nidx] = 1;
                        frontier.emplace_back(ni, nj);
                    }
                }
            }
            double mean_i = 0, mean_j = 0;
            for (auto [ci, cj] : component) {
                mean_i += ci;
                mean_j += cj;
            }
            mean_i /= static_cast<double>(component.size());
            mean_j /= static_cast<double>(component.size());
            std::pair<int, int> best = component.front();
            double best_d = 1e300;
            for (auto [ci, cj] : component) {
                const double d = (ci - mean_i) * (ci - mean_i) + (cj - mean_j) * (cj - mean_j);
                if (d < best_d) {
                    best_d = d;
                    best = {ci, cj};
                }
            }
            peaks.push_back({acc.r_at(best.first), acc.theta_at(best.second), static_cast<int>(v)});
        }
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const HoughPeak& a, const HoughPeak& b) { return a.votes > b.votes; });
    return peaks;
}

LaneLines peaks_to_lanes(const std::vector<HoughPeak>& peaks, const PipelineConfig& config,
                         int width, int height) {
    // Keep peaks in both parametrizations: y = s x + b and the axis-swapped
    // x = m y + c. Near-vertical peaks (theta within 5 degrees of 0 or pi)
    // have no finite (s, b); a side containing one averages in swapped space.
    struct Entry {
        double s, b;    // valid iff !vertical
        double m, c;    // always valid once near-horizontal peaks are dropped
        bool vertical;
        double weight;
        bool left;
    };
    constexpr double kVerticalBand = 5.0 * kPi / 180.0;

    std::vector<Entry> entries;
    for (const HoughPeak& p : peaks) {
        const double sin_t = std::sin(p.theta), cos_t = std::cos(p.theta);
        Entry e{};
        e.vertical = p.theta < kVerticalBand || p.theta > kPi - kVerticalBand;
        e.weight = p.votes;
        if (e.vertical) {
            e.m = -sin_t / cos_t;
            e.c = p.r / cos_t;
            // Slope sign is uninformative at +/- infinity; side by the x
            // position at the image bottom relative to the center.
            e.left = e.m * (height - 1) + e.c < width / 2.0;
        } else {
            e.s = -cos_t / sin_t;
            e.b = p.r / sin_t;
            if (std::abs(e.s) < config.slope_min) continue;  // near-horizontal noise
            e.m = 1.0 / e.s;
            e.c = -e.b / e.s;
            e.left = e.s < 0;
        }
        entries.push_back(e);
    }

    const double y_bottom = height - 1;
    const double y_top = std::lround(config.extent_fraction * (height - 1));

    LaneLines lanes;
    for (int side = 0; side < 2; ++side) {
        const bool want_left = side == 0;
        double w_sum = 0, s_sum = 0, b_sum = 0, m_sum = 0, c_sum = 0;
        bool any = false, any_vertical = false;
        for (const Entry& e : entries) {
            if (e.left != want_left) continue;
            any = true;
            any_vertical = any_vertical || e.vertical;
            w_sum += e.weight;
            if (!e.vertical) {
                s_sum += e.weight * e.s;
                b_sum += e.weight * e.b;
            }
            m_sum += e.weight * e.m;
            c_sum += e.weight * e.c;
        }
        if (!any || w_sum <= 0) continue;

        double x_bottom, x_top;
        if (any_vertical) {
            const double m = m_sum / w_sum, c = c_sum / w_sum;
            x_bottom = m * y_bottom + c;
            x_top = m * y_top + c;
        } else {
            const double s = s_sum / w_sum, b = b_sum / w_sum;
            x_bottom = (y_bottom - b) / s;
            x_top = (y_top - b) / s;
        }
        LineSegment seg{x_bottom, y_bottom, x_top, y_top};
        (want_left ? lanes.left : lanes.right) = seg;
    }
    return lanes;
}

namespace {

void draw_thick_point(Image& img, int x, int y, int thickness) {
    const int lo = -(thickness - 1) / 2, hi = thickness / 2;
    for (int dy = lo; dy <= hi; ++dy) {
        for (int dx = lo; dx <= hi; ++dx) {
            const int px = x + dx, py = y + dy;
            if (px < 0 || px >= img.width || py < 0 || py >= img.height) continue;
            img.px(px, py, 0) = 255;
            img.px(px, py, 1) = 0;
            img.px(px, py, 2) = 0;
        }
    }
}

void draw_segment(Image& img, const LineSegment& seg, int thickness) {
    int x0 = static_cast<int>(std::lround(seg.x1)), y0 = static_cast<int>(std::lround(seg.y1));
    const int x1 = static_cast<int>(std::lround(seg.x2)), y1 = static_cast<int>(std::lround(seg.y2));
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        draw_thick_point(img, x0, y0, thickness);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

Image overlay_lanes(const Image& image, const LaneLines& lanes, int thickness) {
    if (image.format != PixelFormat::Rgb8) throw_parameter("overlay_lanes expects an Rgb8 image");
    if (thickness < 1) throw_parameter("overlay thickness must be >= 1");
    Image out = image;
    if (lanes.left) draw_segment(out, *lanes.left, thickness);
    if (lanes.right) draw_segment(out, *lanes.right, thickness);
    return out;
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
    }
}

Image edge_to_gray(const EdgeMap& edges) {
    Image img(edges.width, edges.height, PixelFormat::Gray8);
    for (size_t i = 0; i < edges.mask.size(); ++i) img.pixels[i] = edges.mask[i] ? 255 : 0;
    return img;
}

}  // namespace

PipelineResult run_pipeline(const Image& image, const PipelineConfig& config, StageDumps* dumps) {
    config.validate();
    if (image.format != PixelFormat::Rgb8) throw_parameter("run_pipeline expects an Rgb8 image");

    const Image gray = stage("gray", [&] { return to_grayscale(image); });
    const Tensor blurred = stage("blur", [&] { return gaussian_blur(gray_plane(gray), config.blur); });
    const EdgeMap edges = stage("canny", [&] { return canny_on_blurred(blurred, config.canny_low, config.canny_high); });

    RoiPolygon polygon;
    for (auto [fx, fy] : config.roi)
        polygon.vertices.emplace_back(fx * (image.width - 1), fy * (image.height - 1));
    const EdgeMap masked = stage("roi", [&] { return roi_mask(edges, polygon); });

    const auto peaks = stage("hough", [&] {
        return hough_transform(masked, config.hough_r_res, config.hough_theta_res, config.hough_threshold);
    });
    const LaneLines lanes = peaks_to_lanes(peaks, config, image.width, image.height);
    Image annotated = stage("overlay", [&] { return overlay_lanes(image, lanes, config.overlay_thickness); });

    if (dumps) {
        dumps->gray = gray;
        dumps->blur = gray8_from_plane(blurred);
        dumps->canny = edge_to_gray(edges);
        dumps->roi = edge_to_gray(masked);
        const HoughAccumulator acc = hough_accumulate(masked, config.hough_r_res, config.hough_theta_res);
        const double peak = std::max(1.0, max_value(acc.votes));
        Tensor scaled = acc.votes;
        for (size_t i = 0; i < scaled.size(); ++i) scaled[i] = scaled[i] / peak * 255.0;
        dumps->hough = gray8_from_plane(scaled);
    }
    return {lanes, std::move(annotated)};
}

}  // namespace dp
