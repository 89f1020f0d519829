#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "driveperc/datasets.hpp"
#include "driveperc/error.hpp"

namespace fs = std::filesystem;

namespace dp {

void AugmentConfig::validate() const {
    if (flip_prob < 0 || flip_prob > 1) throw_parameter("augment.flip_prob must be in [0,1]");
    if (shear_range < 0) throw_parameter("augment.shear_range must be nonnegative");
    if (zoom_range < 0 || zoom_range >= 1) throw_parameter("augment.zoom_range must be in [0,1)");
}

void DrivePreprocessOptions::validate() const {
    if (crop_top < 0 || crop_bottom < 0 || crop_top + crop_bottom >= 1)
        throw_parameter("preprocess crop fractions must be nonnegative and sum below 1");
    if (out_w <= 0 || out_h <= 0) throw_parameter("preprocess target size must be positive");
    if (flip_prob < 0 || flip_prob > 1) throw_parameter("preprocess flip_prob must be in [0,1]");
}

namespace {

bool parse_class_index(const std::string& name, int& out) {
    if (name.empty()) return false;
    for (char c : name)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    out = std::stoi(name);
    return true;
}

std::vector<std::string> sorted_files(const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

ClassifiedImageSet load_class_dirs(const std::string& root) {
    if (!fs::is_directory(root)) throw_io("class root is not a directory: " + root);
    ClassifiedImageSet set;
    std::map<int, fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        int index;
        if (!parse_class_index(name, index)) {
            set.warnings.push_back("skipping non-numeric subdirectory: " + name);
            continue;
        }
        class_dirs[index] = entry.path();
    }
    if (class_dirs.empty()) throw_data("no numeric class directories under " + root);

    int expected = 0;
    for (const auto& [index, dir] : class_dirs) {
        if (index != expected)
            throw_data("non-contiguous class indices under " + root + ": expected " +
                       std::to_string(expected) + ", found " + std::to_string(index));
        ++expected;
        const auto files = sorted_files(dir);
        if (files.empty()) set.warnings.push_back("empty class directory: " + dir.string());
        for (const auto& f : files) set.samples.emplace_back((dir / f).string(), index);
    }
    set.class_count = expected;
    return set;
}

SegmentationPairSet load_seg_pairs(const std::string& images_dir, const std::string& masks_dir) {
    if (!fs::is_directory(images_dir)) throw_io("images dir missing: " + images_dir);
    if (!fs::is_directory(masks_dir)) throw_io("masks dir missing: " + masks_dir);

    std::map<std::string, std::string> images, masks;
    for (const auto& f : sorted_files(images_dir))
        images[fs::path(f).stem().string()] = (fs::path(images_dir) / f).string();
    for (const auto& f : sorted_files(masks_dir))
        masks[fs::path(f).stem().string()] = (fs::path(masks_dir) / f).string();

    std::vector<std::string> problems;
    SegmentationPairSet set;
    for (const auto& [stem, path] : images) {
        auto it = masks.find(stem);
        if (it == masks.end())
            problems.push_back("image without mask: " + stem);
        else
            set.pairs.emplace_back(path, it->second);
    }
    for (const auto& [stem, path] : masks)
        if (!images.count(stem)) problems.push_back("mask without image: " + stem);

    if (!problems.empty()) {
        std::string msg = "unmatched segmentation files:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw_data(msg);
    }
    return set;
}

Tensor load_binary_mask(const std::string& path) {
    Image img = read_image(path);
    if (img.format != PixelFormat::Gray8) img = to_grayscale(img);
    Tensor mask({img.height, img.width});
    for (size_t i = 0; i < img.pixels.size(); ++i) mask[i] = img.pixels[i] >= 128 ? 1.0 : 0.0;
    return mask;
}

namespace {

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

std::vector<DrivingRecord> parse_driving_log(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw_io("cannot open driving log: " + csv_path);

    std::vector<DrivingRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(trim(field));
        if (!line.empty() && line.back() == ',') fields.push_back("");

        if (fields.size() != 7)
            throw_data(csv_path + " line " + std::to_string(line_no) + ": expected 7 fields, got " +
                       std::to_string(fields.size()));

        DrivingRecord rec;
        rec.center = fields[0];
        rec.left = fields[1];
        rec.right = fields[2];
        double steering;
        if (!parse_double(fields[3], steering)) {
            if (line_no == 1) continue;  // header row: non-numeric steering
            throw_data(csv_path + " line " + std::to_string(line_no) + ": bad number '" + fields[3] + "'");
        }
        rec.steering = steering;
        double value;
        if (!parse_double(fields[4], value))
            throw_data(csv_path + " line " + std::to_string(line_no) + ": bad number '" + fields[4] + "'");
        rec.throttle = value;
        if (!parse_double(fields[5], value))
            throw_data(csv_path + " line " + std::to_string(line_no) + ": bad number '" + fields[5] + "'");
        rec.reverse = static_cast<int>(value);
        if (!parse_double(fields[6], value))
            throw_data(csv_path + " line " + std::to_string(line_no) + ": bad number '" + fields[6] + "'");
        rec.speed = value;
        records.push_back(std::move(rec));
    }
    return records;
}

std::pair<std::vector<size_t>, std::vector<size_t>> split_indices(size_t n, double ratio, uint64_t seed) {
    if (n == 0) throw_parameter("split of an empty sample set");
    if (ratio <= 0 || ratio >= 1) throw_parameter("split ratio must be in (0,1)");
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Prng prng(seed);
    for (size_t i = n - 1; i > 0; --i) {
        const size_t j = prng.below(i + 1);
        std::swap(order[i], order[j]);
    }
    const size_t train_n = static_cast<size_t>(std::floor(ratio * static_cast<double>(n)));
    std::vector<size_t> train(order.begin(), order.begin() + static_cast<long>(train_n));
    std::vector<size_t> test(order.begin() + static_cast<long>(train_n), order.end());
    return {std::move(train), std::move(test)};
}

Image augment_classification(const Image& image, const AugmentConfig& config, Prng& prng) {
    config.validate();
    // Three draws regardless of which branches fire, so the consumed stream
    // is a pure function of the call count.
    const double u_flip = prng.uniform();
    const double shear = prng.uniform(-config.shear_range, config.shear_range);
    const double zoom = 1.0 + prng.uniform(-config.zoom_range, config.zoom_range);

    Image out = image;
    if (u_flip < config.flip_prob) out = flip_horizontal(out);
    if (shear != 0.0 || zoom != 1.0) {
        const double cx = (image.width - 1) / 2.0, cy = (image.height - 1) / 2.0;
        const double t = std::tan(shear);
        // zoom about the center composed with a horizontal shear about the center
        const std::array<double, 6> m = {zoom, zoom * t, cx - zoom * cx - zoom * t * cy,
                                         0.0, zoom, cy - zoom * cy};
        out = affine_warp(out, m);
    }
    return out;
}

std::pair<Tensor, double> preprocess_driving(const DrivingRecord& record, Camera camera,
                                             const std::string& images_dir, Prng& prng,
                                             bool augment, const DrivePreprocessOptions& options) {
    options.validate();
    std::string rel;
    double steering = record.steering;
    switch (camera) {
        case Camera::Center: rel = record.center; break;
        case Camera::Left:
            rel = record.left;
            steering += options.steering_correction;
            break;
        case Camera::Right:
            rel = record.right;
            steering -= options.steering_correction;
            break;
    }
    fs::path path(rel);
    if (path.is_relative() && !images_dir.empty()) path = fs::path(images_dir) / path;

    Image img;
    try {
        img = read_image(path.string());
    } catch (const Error& e) {
        throw_data("sample '" + rel + "': " + e.what());
    }
    if (img.format != PixelFormat::Rgb8) throw_data("sample '" + rel + "': expected an RGB image");

    const int top = static_cast<int>(std::lround(options.crop_top * img.height));
    const int bottom = static_cast<int>(std::lround(options.crop_bottom * img.height));
    img = crop(img, {0, top, img.width, img.height - top - bottom});

    Tensor yuv = rgb_to_yuv(img);
    yuv = gaussian_blur(yuv, options.blur);

    if (augment && prng.uniform() < options.flip_prob) {
        const int h = yuv.dim(1), w = yuv.dim(2);
        Tensor flipped(yuv.shape());
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) flipped.at(c, y, x) = yuv.at(c, y, w - 1 - x);
        // Mirroring the frame mirrors the required steering.
        yuv = std::move(flipped);
        steering = -steering;
    }

    return {bilinear_resize(yuv, options.out_h, options.out_w), steering};
}

SynthTask synth_task_from_name(const std::string& name) {
    if (name == "signs") return SynthTask::Signs;
    if (name == "vehicles") return SynthTask::Vehicles;
    if (name == "segmentation") return SynthTask::Segmentation;
    if (name == "lanes") return SynthTask::Lanes;
    throw_parameter("unknown synth task: " + name + " (expected signs|vehicles|segmentation|lanes)");
}

void save_tensor(const Tensor& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io("cannot open tensor file for writing: " + path);
    out.write("TSR1", 4);
    auto u32 = [&](uint32_t v) {
        uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    u32(static_cast<uint32_t>(t.ndim()));
    for (int d : t.shape()) u32(static_cast<uint32_t>(d));
    for (size_t i = 0; i < t.size(); ++i) {
        const double v = t[i];
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        uint8_t b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<uint8_t>(bits >> (8 * k));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
    if (!out) throw_io("failed writing tensor: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open tensor file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "TSR1", 4) != 0)
        throw_format(path + ": bad tensor magic at byte offset 0");
    auto u32 = [&]() {
        uint8_t b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (in.gcount() != 4) throw_format(path + ": truncated tensor header");
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    };
    const uint32_t nd = u32();
    if (nd > 8) throw_format(path + ": implausible tensor rank");
    std::vector<int> shape(nd);
    for (uint32_t i = 0; i < nd; ++i) shape[i] = static_cast<int>(u32());
    Tensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) {
        uint8_t b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (in.gcount() != 8) throw_format(path + ": truncated tensor data");
        uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(b[k]) << (8 * k);
        std::memcpy(&t[i], &bits, 8);
    }
    return t;
}

}  // namespace dp
