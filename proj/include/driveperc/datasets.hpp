#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "driveperc/image.hpp"
#include "driveperc/prng.hpp"
#include "driveperc/tensor.hpp"

namespace dp {

// One row of the merged driving log: three camera image paths plus
// steering/throttle/reverse/speed (7 fields).
struct DrivingRecord {
    std::string center, left, right;
    double steering = 0;
    double throttle = 0;
    int reverse = 0;
    double speed = 0;
};

struct ClassifiedImageSet {
    std::vector<std::pair<std::string, int>> samples;  // (image path, class index)
    int class_count = 0;
    std::vector<std::string> warnings;
};

struct SegmentationPairSet {
    std::vector<std::pair<std::string, std::string>> pairs;  // (image path, mask path)
};

struct AugmentConfig {
    double flip_prob = 0.0;
    double shear_range = 0.0;  // radians; shear angle drawn from [-range, range]
    double zoom_range = 0.0;   // zoom factor drawn from [1-range, 1+range]

    void validate() const;
};

// Root with numeric class subdirectories 0..K-1. Classes are ordered
// numerically and files lexicographically, so the sample list is identical
// across runs. Non-numeric subdirectories are skipped with a warning, empty
// class directories warn, and a gap in the class indices is an error.
ClassifiedImageSet load_class_dirs(const std::string& root);

// Pairs images and masks by filename stem; every unmatched stem on either
// side is collected into one aggregate error.
SegmentationPairSet load_seg_pairs(const std::string& images_dir, const std::string& masks_dir);

// Gray mask binarized at threshold 128 into a HxW tensor of {0,1}.
Tensor load_binary_mask(const std::string& path);

// Comma-separated, 7 columns (center,left,right,steering,throttle,reverse,
// speed); an optional header row is detected by a non-numeric steering field.
// Image paths are kept verbatim.
std::vector<DrivingRecord> parse_driving_log(const std::string& csv_path);

// Seeded Fisher-Yates shuffle, then the first floor(ratio*n) samples form the
// train split; disjoint and exhaustive.
std::pair<std::vector<size_t>, std::vector<size_t>> split_indices(size_t n, double ratio, uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& samples,
                                                           double ratio, uint64_t seed) {
    auto [ti, vi] = split_indices(samples.size(), ratio, seed);
    std::pair<std::vector<T>, std::vector<T>> out;
    for (size_t i : ti) out.first.push_back(samples[i]);
    for (size_t i : vi) out.second.push_back(samples[i]);
    return out;
}

// Seeded flip / shear / zoom (composed into one warp); draws exactly three
// uniforms per call so the stream position is input-independent. Output size
// is preserved.
Image augment_classification(const Image& image, const AugmentConfig& config, Prng& prng);

enum class Camera { Center, Left, Right };

struct DrivePreprocessOptions {
    double crop_top = 0.375;     // fraction of rows removed from the top (sky)
    double crop_bottom = 0.156;  // fraction removed from the bottom (hood)
    GaussianKernelSpec blur{3, 0.8};
    int out_w = 200;
    int out_h = 66;
    double steering_correction = 0.2;  // left camera +, right camera -
    double flip_prob = 0.5;            // augment mode only

    void validate() const;
};

// crop -> RGB->YUV -> per-channel Gaussian blur -> (optional seeded flip,
// negating steering) -> bilinear resize to out_h x out_w. Returns the
// 3x66x200 YUV tensor and the adjusted steering value. With augment=false the
// result is deterministic and prng-independent.
std::pair<Tensor, double> preprocess_driving(const DrivingRecord& record, Camera camera,
                                             const std::string& images_dir, Prng& prng,
                                             bool augment,
                                             const DrivePreprocessOptions& options = {});

enum class SynthTask { Signs, Vehicles, Segmentation, Lanes };

SynthTask synth_task_from_name(const std::string& name);

// Self-contained synthetic corpora with ground truth known by construction:
//   signs         n images per class in numeric class dirs (10 glyph classes)
//   vehicles      n per class in dirs 0 (clutter) / 1 (vehicle)
//   segmentation  n image/mask pairs under images/ and masks/
//   lanes         n road frames + lanes_ground_truth.txt, one line per image
//                 "stem x1 y1 x2 y2 x1 y1 x2 y2" (left then right, evaluated
//                 at y = H-1 and y = lround(0.6*(H-1)))
// Identical seeds produce byte-identical trees.
void synth_generate(SynthTask task, int n, uint64_t seed, const std::string& out_dir);

// Raw little-endian tensor file ("TSR1" magic) used by the preprocess command.
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

}  // namespace dp
