#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "driveperc/config.hpp"
#include "driveperc/error.hpp"

namespace dp {

namespace {

enum class KeyType { Int, Double, String };

struct SchemaEntry {
    const char* key;  // dotted
    KeyType type;
    const char* default_value;
};

// The published schema; dump() emits exactly these keys in this order.
constexpr std::array kSchema = {
    SchemaEntry{"pipeline.blur_size", KeyType::Int, "5"},
    SchemaEntry{"pipeline.blur_sigma", KeyType::Double, "1.0"},
    SchemaEntry{"pipeline.canny_low", KeyType::Double, "50"},
    SchemaEntry{"pipeline.canny_high", KeyType::Double, "150"},
    SchemaEntry{"pipeline.roi", KeyType::String, "0.1,1.0;0.45,0.6;0.55,0.6;0.9,1.0"},
    SchemaEntry{"pipeline.hough_r_res", KeyType::Double, "1.0"},
    SchemaEntry{"pipeline.hough_theta_res_deg", KeyType::Double, "1.0"},
    SchemaEntry{"pipeline.hough_threshold", KeyType::Int, "20"},
    SchemaEntry{"pipeline.slope_min", KeyType::Double, "0.3"},
    SchemaEntry{"pipeline.extent_fraction", KeyType::Double, "0.6"},
    SchemaEntry{"pipeline.overlay_thickness", KeyType::Int, "5"},
    SchemaEntry{"train.epochs", KeyType::Int, "20"},
    SchemaEntry{"train.batch_size", KeyType::Int, "64"},
    SchemaEntry{"train.learning_rate", KeyType::Double, "0.001"},
    SchemaEntry{"train.optimizer", KeyType::String, "adam"},
    SchemaEntry{"train.beta", KeyType::Double, "0.9"},
    SchemaEntry{"train.beta1", KeyType::Double, "0.9"},
    SchemaEntry{"train.beta2", KeyType::Double, "0.999"},
    SchemaEntry{"train.epsilon", KeyType::Double, "1e-08"},
    SchemaEntry{"train.augment", KeyType::Int, "0"},
    SchemaEntry{"augment.flip_prob", KeyType::Double, "0.5"},
    SchemaEntry{"augment.shear_range", KeyType::Double, "0.1"},
    SchemaEntry{"augment.zoom_range", KeyType::Double, "0.1"},
    SchemaEntry{"data.split_ratio", KeyType::Double, "0.8"},
    SchemaEntry{"data.crop_top", KeyType::Double, "0.375"},
    SchemaEntry{"data.crop_bottom", KeyType::Double, "0.156"},
    SchemaEntry{"data.steering_correction", KeyType::Double, "0.2"},
    SchemaEntry{"data.preprocess_blur_size", KeyType::Int, "3"},
    SchemaEntry{"data.preprocess_blur_sigma", KeyType::Double, "0.8"},
    SchemaEntry{"data.preprocess_flip_prob", KeyType::Double, "0.5"},
};

const SchemaEntry* find_entry(const std::string& key) {
    for (const auto& e : kSchema)
        if (key == e.key) return &e;
    return nullptr;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double_or_throw(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw_parameter("config key '" + key + "': bad numeric value '" + value + "'");
    }
}

int parse_int_or_throw(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw_parameter("config key '" + key + "': bad integer value '" + value + "'");
    }
}

}  // namespace

Config::Config() {
    for (const auto& e : kSchema) values_[e.key] = e.default_value;
}

void Config::apply_task_defaults(const std::string& task) {
    if (task == "signs") {
        values_["train.epochs"] = "20";
        values_["train.batch_size"] = "64";
        values_["train.learning_rate"] = "0.001";
        values_["train.optimizer"] = "adam";
    } else if (task == "clone") {
        values_["train.epochs"] = "50";
        values_["train.batch_size"] = "64";
        values_["train.learning_rate"] = "0.001";
        values_["train.optimizer"] = "adam";
    } else if (task == "segment") {
        values_["train.epochs"] = "20";
        values_["train.batch_size"] = "32";
        values_["train.learning_rate"] = "0.01";
        values_["train.optimizer"] = "adam";
    } else if (task == "vehicles") {
        values_["train.epochs"] = "20";
        values_["train.batch_size"] = "64";
        values_["train.learning_rate"] = "0.001";
        values_["train.optimizer"] = "adam";
    } else {
        throw_parameter("unknown task: " + task + " (expected signs|clone|segment|vehicles)");
    }
}

void Config::set(const std::string& key, const std::string& value) {
    const SchemaEntry* e = find_entry(key);
    if (!e) throw_parameter("unknown config key: " + key);
    if (e->type == KeyType::Int)
        parse_int_or_throw(key, value);
    else if (e->type == KeyType::Double)
        parse_double_or_throw(key, value);
    values_[key] = value;
}

std::string Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw_parameter("unknown config key: " + key);
    return it->second;
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open config file: " + path);
    std::string line, section;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw_parameter(path + " line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty())
            throw_parameter(path + " line " + std::to_string(line_no) + ": key outside a [section]");
        try {
            set(section + "." + key, value);
        } catch (const Error& e) {
            throw Error(e.kind(), path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string Config::dump() const {
    std::ostringstream out;
    std::string section;
    for (const auto& e : kSchema) {
        const std::string key = e.key;
        const std::string sec = key.substr(0, key.find('.'));
        if (sec != section) {
            if (!section.empty()) out << "\n";
            out << "[" << sec << "]\n";
            section = sec;
        }
        out << key.substr(key.find('.') + 1) << " = " << values_.at(key) << "\n";
    }
    return out.str();
}

PipelineConfig Config::pipeline() const {
    PipelineConfig p;
    p.blur.size = parse_int_or_throw("pipeline.blur_size", get("pipeline.blur_size"));
    p.blur.sigma = parse_double_or_throw("pipeline.blur_sigma", get("pipeline.blur_sigma"));
    p.canny_low = parse_double_or_throw("pipeline.canny_low", get("pipeline.canny_low"));
    p.canny_high = parse_double_or_throw("pipeline.canny_high", get("pipeline.canny_high"));
    p.hough_r_res = parse_double_or_throw("pipeline.hough_r_res", get("pipeline.hough_r_res"));
    p.hough_theta_res = parse_double_or_throw("pipeline.hough_theta_res_deg", get("pipeline.hough_theta_res_deg")) *
                        3.14159265358979323846 / 180.0;
    p.hough_threshold = parse_int_or_throw("pipeline.hough_threshold", get("pipeline.hough_threshold"));
    p.slope_min = parse_double_or_throw("pipeline.slope_min", get("pipeline.slope_min"));
    p.extent_fraction = parse_double_or_throw("pipeline.extent_fraction", get("pipeline.extent_fraction"));
    p.overlay_thickness = parse_int_or_throw("pipeline.overlay_thickness", get("pipeline.overlay_thickness"));

    p.roi.clear();
    const std::string roi = get("pipeline.roi");
    std::stringstream ss(roi);
    std::string pair;
    while (std::getline(ss, pair, ';')) {
        const size_t comma = pair.find(',');
        if (comma == std::string::npos) throw_parameter("pipeline.roi: expected 'x,y' pairs separated by ';'");
        p.roi.emplace_back(parse_double_or_throw("pipeline.roi", trim(pair.substr(0, comma))),
                           parse_double_or_throw("pipeline.roi", trim(pair.substr(comma + 1))));
    }
    p.validate();
    return p;
}

TrainConfig Config::train() const {
    TrainConfig t;
    t.epochs = parse_int_or_throw("train.epochs", get("train.epochs"));
    t.batch_size = parse_int_or_throw("train.batch_size", get("train.batch_size"));
    t.learning_rate = parse_double_or_throw("train.learning_rate", get("train.learning_rate"));
    const std::string opt = get("train.optimizer");
    if (opt == "sgd")
        t.optimizer = OptimizerKind::Sgd;
    else if (opt == "rmsprop")
        t.optimizer = OptimizerKind::RmsProp;
    else if (opt == "adam")
        t.optimizer = OptimizerKind::Adam;
    else
        throw_parameter("train.optimizer must be sgd|rmsprop|adam, got '" + opt + "'");
    t.beta = parse_double_or_throw("train.beta", get("train.beta"));
    t.beta1 = parse_double_or_throw("train.beta1", get("train.beta1"));
    t.beta2 = parse_double_or_throw("train.beta2", get("train.beta2"));
    t.epsilon = parse_double_or_throw("train.epsilon", get("train.epsilon"));
    t.augment = parse_int_or_throw("train.augment", get("train.augment")) != 0;
    if (t.epochs < 1 || t.batch_size < 1) throw_parameter("train.epochs and train.batch_size must be >= 1");
    if (t.learning_rate <= 0) throw_parameter("train.learning_rate must be positive");
    return t;
}

AugmentConfig Config::augment() const {
    AugmentConfig a;
    a.flip_prob = parse_double_or_throw("augment.flip_prob", get("augment.flip_prob"));
    a.shear_range = parse_double_or_throw("augment.shear_range", get("augment.shear_range"));
    a.zoom_range = parse_double_or_throw("augment.zoom_range", get("augment.zoom_range"));
    a.validate();
    return a;
}

DrivePreprocessOptions Config::preprocess() const {
    DrivePreprocessOptions o;
    o.crop_top = parse_double_or_throw("data.crop_top", get("data.crop_top"));
    o.crop_bottom = parse_double_or_throw("data.crop_bottom", get("data.crop_bottom"));
    o.blur.size = parse_int_or_throw("data.preprocess_blur_size", get("data.preprocess_blur_size"));
    o.blur.sigma = parse_double_or_throw("data.preprocess_blur_sigma", get("data.preprocess_blur_sigma"));
    o.steering_correction = parse_double_or_throw("data.steering_correction", get("data.steering_correction"));
    o.flip_prob = parse_double_or_throw("data.preprocess_flip_prob", get("data.preprocess_flip_prob"));
    o.validate();
    return o;
}

double Config::split_ratio() const {
    const double r = parse_double_or_throw("data.split_ratio", get("data.split_ratio"));
    if (r <= 0 || r >= 1) throw_parameter("data.split_ratio must be in (0,1)");
    return r;
}

}  // namespace dp
