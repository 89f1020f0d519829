#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "driveperc/datasets.hpp"
#include "driveperc/error.hpp"

namespace fs = std::filesystem;

namespace dp {

namespace {

struct Rgb {
    uint8_t r, g, b;
};

void put(Image& img, int x, int y, Rgb c) {
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
    img.px(x, y, 0) = c.r;
    img.px(x, y, 1) = c.g;
    img.px(x, y, 2) = c.b;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) put(img, x, y, c);
}

void fill_circle(Image& img, double cx, double cy, double radius, Rgb c) {
    const int x0 = static_cast<int>(std::floor(cx - radius)), x1 = static_cast<int>(std::ceil(cx + radius));
    const int y0 = static_cast<int>(std::floor(cy - radius)), y1 = static_cast<int>(std::ceil(cy + radius));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) put(img, x, y, c);
}

void fill_ring(Image& img, double cx, double cy, double outer, double inner, Rgb c) {
    const int x0 = static_cast<int>(std::floor(cx - outer)), x1 = static_cast<int>(std::ceil(cx + outer));
    const int y0 = static_cast<int>(std::floor(cy - outer)), y1 = static_cast<int>(std::ceil(cy + outer));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if (d2 <= outer * outer && d2 >= inner * inner) put(img, x, y, c);
        }
}

bool point_in_polygon(double px, double py, const std::vector<std::pair<double, double>>& v) {
    bool inside = false;
    for (size_t i = 0; i < v.size(); ++i) {
        const auto& [x1, y1] = v[i];
        const auto& [x2, y2] = v[(i + 1) % v.size()];
        if ((y1 > py) != (y2 > py)) {
            const double xi = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
            if (px < xi) inside = !inside;
        }
    }
    return inside;
}

// Enumerates polygon-interior pixels once so image and mask stay exactly
// in sync.
template <typename Fn>
void for_polygon_pixels(const Image& img, const std::vector<std::pair<double, double>>& poly, Fn&& fn) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (point_in_polygon(x, y, poly)) fn(x, y);
}

void draw_thick_line(Image& img, double x1, double y1, double x2, double y2, int thickness, Rgb c) {
    int ax = static_cast<int>(std::lround(x1)), ay = static_cast<int>(std::lround(y1));
    const int bx = static_cast<int>(std::lround(x2)), by = static_cast<int>(std::lround(y2));
    const int dx = std::abs(bx - ax), dy = -std::abs(by - ay);
    const int sx = ax < bx ? 1 : -1, sy = ay < by ? 1 : -1;
    int err = dx + dy;
    const int lo = -(thickness - 1) / 2, hi = thickness / 2;
    while (true) {
        for (int oy = lo; oy <= hi; ++oy)
            for (int ox = lo; ox <= hi; ++ox) put(img, ax + ox, ay + oy, c);
        if (ax == bx && ay == by) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            ax += sx;
        }
        if (e2 <= dx) {
            err += dx;
            ay += sy;
        }
    }
}

void add_noise(Image& img, int amplitude, Prng& prng) {
    for (auto& p : img.pixels) {
        const int v = static_cast<int>(p) + static_cast<int>(prng.below(static_cast<uint64_t>(2 * amplitude + 1))) - amplitude;
        p = static_cast<uint8_t>(std::clamp(v, 0, 255));
    }
}

std::string index_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%04d", i);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw_io("cannot create output directory: " + dir.string());
}

// --- signs: ten glyph classes, one directory per class ---

constexpr int kSignClasses = 10;

void draw_glyph(Image& img, int cls, double cx, double cy, double s, Prng&) {
    switch (cls) {
        case 0: fill_circle(img, cx, cy, s, {220, 30, 30}); break;
        case 1: fill_rect(img, static_cast<int>(cx - s), static_cast<int>(cy - s),
                          static_cast<int>(cx + s), static_cast<int>(cy + s), {30, 60, 220}); break;
        case 2: {  // upward triangle
            std::vector<std::pair<double, double>> tri{{cx, cy - s}, {cx - s, cy + s}, {cx + s, cy + s}};
            for_polygon_pixels(img, tri, [&](int x, int y) { put(img, x, y, {30, 200, 60}); });
            break;
        }
        case 3: {  // diamond
            std::vector<std::pair<double, double>> d{{cx, cy - s}, {cx + s, cy}, {cx, cy + s}, {cx - s, cy}};
            for_polygon_pixels(img, d, [&](int x, int y) { put(img, x, y, {230, 220, 40}); });
            break;
        }
        case 4: fill_ring(img, cx, cy, s, s - 3.0, {220, 40, 220}); break;
        case 5:  // plus
            fill_rect(img, static_cast<int>(cx - s), static_cast<int>(cy - 2), static_cast<int>(cx + s),
                      static_cast<int>(cy + 2), {40, 220, 220});
            fill_rect(img, static_cast<int>(cx - 2), static_cast<int>(cy - s), static_cast<int>(cx + 2),
                      static_cast<int>(cy + s), {40, 220, 220});
            break;
        case 6:  // X
            draw_thick_line(img, cx - s, cy - s, cx + s, cy + s, 3, {240, 240, 240});
            draw_thick_line(img, cx - s, cy + s, cx + s, cy - s, 3, {240, 240, 240});
            break;
        case 7: fill_rect(img, static_cast<int>(cx - s), static_cast<int>(cy - 3), static_cast<int>(cx + s),
                          static_cast<int>(cy + 3), {240, 140, 30}); break;
        case 8: fill_rect(img, static_cast<int>(cx - 3), static_cast<int>(cy - s), static_cast<int>(cx + 3),
                          static_cast<int>(cy + s), {150, 40, 220}); break;
        case 9: {  // downward triangle
            std::vector<std::pair<double, double>> tri{{cx, cy + s}, {cx - s, cy - s}, {cx + s, cy - s}};
            for_polygon_pixels(img, tri, [&](int x, int y) { put(img, x, y, {80, 160, 240}); });
            break;
        }
        default: break;
    }
}

void generate_signs(int n, Prng& prng, const fs::path& out) {
    for (int cls = 0; cls < kSignClasses; ++cls) {
        const fs::path dir = out / std::to_string(cls);
        ensure_dir(dir);
        for (int i = 0; i < n; ++i) {
            Image img(32, 32, PixelFormat::Rgb8);
            const uint8_t base = static_cast<uint8_t>(40 + prng.below(50));
            fill_rect(img, 0, 0, 31, 31, {base, base, base});
            const double cx = 15.5 + prng.uniform(-3.0, 3.0);
            const double cy = 15.5 + prng.uniform(-3.0, 3.0);
            const double s = prng.uniform(8.0, 12.0);
            draw_glyph(img, cls, cx, cy, s, prng);
            add_noise(img, 12, prng);
            write_image(img, (dir / (index_name(i) + ".ppm")).string());
        }
    }
}

// --- vehicles: rectangle-with-wheels vs clutter ---

void generate_vehicles(int n, Prng& prng, const fs::path& out) {
    for (int cls = 0; cls < 2; ++cls) {
        const fs::path dir = out / std::to_string(cls);
        ensure_dir(dir);
        for (int i = 0; i < n; ++i) {
            Image img(32, 32, PixelFormat::Rgb8);
            const uint8_t base = static_cast<uint8_t>(90 + prng.below(40));
            fill_rect(img, 0, 0, 31, 31, {base, base, base});
            if (cls == 1) {
                const Rgb body{static_cast<uint8_t>(120 + prng.below(120)),
                               static_cast<uint8_t>(40 + prng.below(160)),
                               static_cast<uint8_t>(40 + prng.below(160))};
                const int x0 = 3 + static_cast<int>(prng.below(6));
                const int x1 = 25 + static_cast<int>(prng.below(4));
                const int ybot = 22 + static_cast<int>(prng.below(4));
                const int ytop = ybot - 7 - static_cast<int>(prng.below(3));
                fill_rect(img, x0, ytop, x1, ybot, body);
                fill_rect(img, x0 + 5, ytop - 5, x1 - 7, ytop, body);          // cabin
                fill_rect(img, x0 + 7, ytop - 4, x1 - 9, ytop - 1, {200, 220, 235});  // window
                fill_circle(img, x0 + 4.5, ybot + 1.5, 3.0, {15, 15, 15});
                fill_circle(img, x1 - 4.5, ybot + 1.5, 3.0, {15, 15, 15});
            } else {
                const int blobs = 2 + static_cast<int>(prng.below(3));
                for (int b = 0; b < blobs; ++b) {
                    const Rgb c{static_cast<uint8_t>(prng.below(256)), static_cast<uint8_t>(prng.below(256)),
                                static_cast<uint8_t>(prng.below(256))};
                    const double x = prng.uniform(4.0, 28.0), y = prng.uniform(4.0, 28.0);
                    if (prng.uniform() < 0.5)
                        fill_circle(img, x, y, prng.uniform(2.0, 6.0), c);
                    else
                        draw_thick_line(img, x, y, x + prng.uniform(-12.0, 12.0), y + prng.uniform(-12.0, 12.0),
                                        2, c);
                }
            }
            add_noise(img, 10, prng);
            write_image(img, (dir / (index_name(i) + ".ppm")).string());
        }
    }
}

// --- segmentation: road polygon + exact mask ---

void generate_segmentation(int n, Prng& prng, const fs::path& out) {
    const fs::path images = out / "images";
    const fs::path masks = out / "masks";
    ensure_dir(images);
    ensure_dir(masks);
    const int w = 128, h = 128;
    for (int i = 0; i < n; ++i) {
        Image img(w, h, PixelFormat::Rgb8);
        Image mask(w, h, PixelFormat::Gray8);

        const int horizon = 40 + static_cast<int>(prng.below(20));
        fill_rect(img, 0, 0, w - 1, horizon - 1, {140, 170, 210});             // sky
        fill_rect(img, 0, horizon, w - 1, h - 1, {60, 118, 70});               // grass

        const double bl = prng.uniform(4.0, 24.0), br = prng.uniform(102.0, 124.0);
        const double cx = prng.uniform(54.0, 74.0), tw = prng.uniform(4.0, 10.0);
        std::vector<std::pair<double, double>> road{
            {bl, h - 1.0}, {cx - tw, static_cast<double>(horizon)}, {cx + tw, static_cast<double>(horizon)},
            {br, h - 1.0}};
        // Make the quad vertex order consistent (bottom-left, top-left,
        // top-right, bottom-right traces a simple polygon).
        const uint8_t asphalt = static_cast<uint8_t>(85 + prng.below(20));
        for_polygon_pixels(img, road, [&](int x, int y) {
            put(img, x, y, {asphalt, asphalt, asphalt});
            mask.px(x, y) = 255;
        });
        // Dashes painted after the mask capture sit inside the road polygon.
        const double mx_bottom = (bl + br) / 2.0;
        for (int dash = 0; dash < 5; ++dash) {
            const double t0 = 0.12 + 0.18 * dash, t1 = t0 + 0.08;
            const double x0 = mx_bottom + (cx - mx_bottom) * t0, y0 = (h - 1) + (horizon - (h - 1)) * t0;
            const double x1 = mx_bottom + (cx - mx_bottom) * t1, y1 = (h - 1) + (horizon - (h - 1)) * t1;
            draw_thick_line(img, x0, y0, x1, y1, 2, {235, 235, 235});
        }
        add_noise(img, 8, prng);
        write_image(img, (images / (index_name(i) + ".ppm")).string());
        write_image(mask, (masks / (index_name(i) + ".pgm")).string());
    }
}

// --- lanes: two-lane road frames + ground-truth sidecar ---

void generate_lanes(int n, Prng& prng, const fs::path& out) {
    ensure_dir(out);
    const int w = 320, h = 200;
    std::ofstream sidecar(out / "lanes_ground_truth.txt");
    if (!sidecar) throw_io("cannot write lane ground truth file");
    char line[256];

    for (int i = 0; i < n; ++i) {
        Image img(w, h, PixelFormat::Rgb8);
        const int horizon = static_cast<int>(0.35 * h) + static_cast<int>(prng.below(8));
        fill_rect(img, 0, 0, w - 1, horizon - 1, {150, 170, 195});
        const uint8_t asphalt = static_cast<uint8_t>(98 + prng.below(16));
        fill_rect(img, 0, horizon, w - 1, h - 1, {asphalt, asphalt, asphalt});

        const double vy = 0.22 * h;
        const double vx = prng.uniform(0.47, 0.53) * w;
        const double xbl = prng.uniform(0.20, 0.32) * w;
        const double xbr = prng.uniform(0.68, 0.80) * w;
        const Rgb color = (i % 2 == 0) ? Rgb{245, 245, 245} : Rgb{230, 200, 40};

        auto x_at = [&](double xb, double y) {
            return xb + (vx - xb) * ((h - 1) - y) / ((h - 1) - vy);
        };
        const double y_draw_top = 0.45 * h;
        draw_thick_line(img, xbl, h - 1.0, x_at(xbl, y_draw_top), y_draw_top, 3, color);
        draw_thick_line(img, xbr, h - 1.0, x_at(xbr, y_draw_top), y_draw_top, 3, color);
        add_noise(img, 5, prng);

        const std::string stem = index_name(i);
        write_image(img, (out / (stem + ".ppm")).string());

        // Ground truth follows the line actually rasterized (the rounded
        // endpoints draw_thick_line received), evaluated at the same y levels
        // peaks_to_lanes extrapolates to.
        const double yb = h - 1.0;
        const double yt = std::lround(0.6 * (h - 1));
        auto drawn_x_at = [&](double xb, double y) {
            const double ax = std::lround(xb), bx = std::lround(x_at(xb, y_draw_top));
            const double by = std::lround(y_draw_top);
            return ax + (bx - ax) * (yb - y) / (yb - by);
        };
        std::snprintf(line, sizeof(line), "%s %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f\n", stem.c_str(),
                      drawn_x_at(xbl, yb), yb, drawn_x_at(xbl, yt), yt,
                      drawn_x_at(xbr, yb), yb, drawn_x_at(xbr, yt), yt);
        sidecar << line;
    }
}

}  // namespace

void synth_generate(SynthTask task, int n, uint64_t seed, const std::string& out_dir) {
    if (n <= 0) throw_parameter("synth_generate needs n > 0");
    ensure_dir(out_dir);
    Prng prng(seed);
    switch (task) {
        case SynthTask::Signs: generate_signs(n, prng, out_dir); break;
        case SynthTask::Vehicles: generate_vehicles(n, prng, out_dir); break;
        case SynthTask::Segmentation: generate_segmentation(n, prng, out_dir); break;
        case SynthTask::Lanes: generate_lanes(n, prng, out_dir); break;
    }
}

}  // namespace dp
