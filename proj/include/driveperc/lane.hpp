#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "driveperc/image.hpp"
#include "driveperc/tensor.hpp"

namespace dp {

struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> mask;  // 1 = edge pixel

    EdgeMap() = default;
    EdgeMap(int w, int h) : width(w), height(h), mask(static_cast<size_t>(w) * h, 0) {}

    uint8_t& at(int x, int y) { return mask[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return mask[static_cast<size_t>(y) * width + x]; }
    size_t count() const;
};

// Vertices in pixel coordinates, >= 3 distinct, simple polygon.
struct RoiPolygon {
    std::vector<std::pair<double, double>> vertices;
};

struct HoughPeak {
    double r = 0.0;      // signed pixels
    double theta = 0.0;  // radians in [0, pi)
    int votes = 0;
};

struct LineSegment {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

struct LaneLines {
    std::optional<LineSegment> left;   // slope < 0 in image coordinates (y down)
    std::optional<LineSegment> right;  // slope > 0
};

struct PipelineConfig {
    GaussianKernelSpec blur{5, 1.0};
    double canny_low = 50.0;
    double canny_high = 150.0;
    // Fractional (x,y) coordinates, scaled by (dim-1) at run time.
    std::vector<std::pair<double, double>> roi = {{0.1, 1.0}, {0.45, 0.6}, {0.55, 0.6}, {0.9, 1.0}};
    double hough_r_res = 1.0;                          // pixels
    double hough_theta_res = 0.017453292519943295;     // 1 degree in radians
    int hough_threshold = 20;                          // votes
    double slope_min = 0.3;
    double extent_fraction = 0.6;
    int overlay_thickness = 5;

    void validate() const;
};

// Pixels with any channel below its threshold are blacked out.
Image color_select(const Image& image, uint8_t r_min, uint8_t g_min, uint8_t b_min);

struct SobelResult {
    Tensor magnitude;  // HxW
    Tensor direction;  // HxW, atan2(gy, gx), radians
};

// 3x3 Sobel pair on a HxW gray plane (clamp-to-edge borders).
SobelResult sobel_gradients(const Tensor& gray);

// Full Canny chain: Gaussian blur, Sobel, non-maximum suppression with the
// gradient direction quantized to 4 bins, double threshold, and 8-connected
// hysteresis (weak pixels survive iff transitively linked to a strong one).
EdgeMap canny(const Tensor& gray, double low, double high, const GaussianKernelSpec& blur = {5, 1.0});
// Same chain minus the blur, for callers that smoothed already.
EdgeMap canny_on_blurred(const Tensor& blurred, double low, double high);

// Even-odd interior test; boundary pixels count as inside.
EdgeMap roi_mask(const EdgeMap& map, const RoiPolygon& polygon);
Image roi_mask(const Image& image, const RoiPolygon& polygon);

struct HoughAccumulator {
    Tensor votes;       // n_r x n_theta (row = r bin, column = theta bin)
    double r_min = 0;   // center of r bin 0 (= -D)
    double r_res = 1;
    double theta_res = 0;
    double r_at(int bin) const { return r_min + bin * r_res; }
    double theta_at(int bin) const { return bin * theta_res; }
};

// r = x cos(theta) + y sin(theta), theta in [0, pi) stepped by theta_res,
// r in [-D, D] (D = image diagonal) stepped by r_res; every edge pixel casts
// one vote per theta bin into the nearest r bin.
HoughAccumulator hough_accumulate(const EdgeMap& edges, double r_res, double theta_res);

// Peaks are accumulator cells meeting the vote threshold that are maximal in
// their 8-neighborhood (plateau ties resolve to the first cell in scan
// order), sorted by votes descending.
std::vector<HoughPeak> hough_transform(const EdgeMap& edges, double r_res, double theta_res, int threshold);

// Peaks become slope/intercept lines; near-horizontal ones (|slope| below
// slope_min) are dropped, the rest partition by slope sign and average with
// vote weights, then extrapolate from the image bottom up to
// extent_fraction of the height. Lane x positions are evaluated at
// y = height-1 and y = lround(extent_fraction * (height-1)).
LaneLines peaks_to_lanes(const std::vector<HoughPeak>& peaks, const PipelineConfig& config,
                         int width, int height);

// Draws present segments in pure red over a copy; Bresenham rasterization
// dilated to `thickness` (Chebyshev offsets [-(t-1)/2, t/2]).
Image overlay_lanes(const Image& image, const LaneLines& lanes, int thickness);

struct StageDumps {
    Image gray, blur, canny, roi, hough;  // Gray8 renderings of intermediates
};

struct PipelineResult {
    LaneLines lanes;
    Image annotated;
};

// grayscale -> blur -> canny -> roi_mask -> hough -> peaks_to_lanes -> overlay.
// Stage failures are rethrown with the stage name attached.
PipelineResult run_pipeline(const Image& image, const PipelineConfig& config, StageDumps* dumps = nullptr);

}  // namespace dp
