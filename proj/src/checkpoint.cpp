#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "driveperc/error.hpp"
#include "driveperc/models.hpp"

namespace dp {

namespace {

constexpr char kMagic[4] = {'N', 'N', 'W', '1'};
constexpr uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw_io("cannot open checkpoint for writing: " + path);
    }

    void u32(uint32_t v) {
        uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
        raw(b, 4);
    }

    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(bits >> (8 * i));
        raw(b, 8);
    }

    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }

    void tensor(const Tensor& t) {
        u32(static_cast<uint32_t>(t.ndim()));
        for (int d : t.shape()) u32(static_cast<uint32_t>(d));
        for (size_t i = 0; i < t.size(); ++i) f64(t[i]);
    }

    void raw(const void* data, size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw_io("failed writing checkpoint: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw_io("cannot open checkpoint: " + path);
    }

    uint32_t u32() {
        uint8_t b[4];
        raw(b, 4);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }

    double f64() {
        uint8_t b[8];
        raw(b, 8);
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string str() {
        const uint32_t n = u32();
        if (n > (1u << 20)) fail("implausible string length");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

    Tensor tensor() {
        const uint32_t nd = u32();
        if (nd > 8) fail("implausible tensor rank");
        std::vector<int> shape(nd);
        for (uint32_t i = 0; i < nd; ++i) shape[i] = static_cast<int>(u32());
        Tensor t(shape);
        for (size_t i = 0; i < t.size(); ++i) t[i] = f64();
        return t;
    }

    void raw(void* data, size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n) fail("truncated file");
        offset_ += n;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw_format(path_ + ": " + msg + " at byte offset " + std::to_string(offset_));
    }

    long offset() const { return offset_; }

private:
    std::ifstream in_;
    std::string path_;
    long offset_ = 0;
};

void write_spec(Writer& w, const LayerSpec& s) {
    w.u32(static_cast<uint32_t>(s.kind));
    w.u32(static_cast<uint32_t>(s.filters));
    w.u32(static_cast<uint32_t>(s.kernel_h));
    w.u32(static_cast<uint32_t>(s.kernel_w));
    w.u32(static_cast<uint32_t>(s.stride_h));
    w.u32(static_cast<uint32_t>(s.stride_w));
    w.u32(static_cast<uint32_t>(s.padding));
    w.u32(static_cast<uint32_t>(s.init));
    w.u32(static_cast<uint32_t>(s.units));
    w.u32(static_cast<uint32_t>(s.pool_h));
    w.u32(static_cast<uint32_t>(s.pool_w));
    w.f64(s.rate);
    w.f64(s.momentum);
    w.f64(s.epsilon);
    w.u32(static_cast<uint32_t>(s.activation));
    w.f64(s.alpha);
    w.u32(static_cast<uint32_t>(s.factor));
    w.str(s.merge_source);
    w.str(s.tap);
}

LayerSpec read_spec(Reader& r) {
    LayerSpec s;
    s.kind = static_cast<LayerKind>(r.u32());
    s.filters = static_cast<int>(r.u32());
    s.kernel_h = static_cast<int>(r.u32());
    s.kernel_w = static_cast<int>(r.u32());
    s.stride_h = static_cast<int>(r.u32());
    s.stride_w = static_cast<int>(r.u32());
    s.padding = static_cast<Padding>(r.u32());
    s.init = static_cast<WeightInit>(r.u32());
    s.units = static_cast<int>(r.u32());
    s.pool_h = static_cast<int>(r.u32());
    s.pool_w = static_cast<int>(r.u32());
    s.rate = r.f64();
    s.momentum = r.f64();
    s.epsilon = r.f64();
    s.activation = static_cast<ActivationKind>(r.u32());
    s.alpha = r.f64();
    s.factor = static_cast<int>(r.u32());
    s.merge_source = r.str();
    s.tap = r.str();
    return s;
}

void copy_tensor_into(Reader& r, Tensor& dst, const char* what) {
    Tensor t = r.tensor();
    if (!t.same_shape(dst)) r.fail(std::string("checkpoint tensor shape mismatch for ") + what);
    dst = std::move(t);
}

}  // namespace

void save_checkpoint(const ModelGraph& model, const std::string& path) {
    Writer w(path);
    w.raw(kMagic, 4);
    w.u32(kVersion);

    w.u32(static_cast<uint32_t>(model.input_shape().size()));
    for (int d : model.input_shape()) w.u32(static_cast<uint32_t>(d));

    w.u32(static_cast<uint32_t>(model.layer_count()));
    for (int i = 0; i < model.layer_count(); ++i) write_spec(w, model.spec(i));

    for (int i = 0; i < model.layer_count(); ++i) {
        const auto& layer = model.layer(i);
        const uint32_t params = layer.weights.empty() ? 0 : 2;
        const uint32_t bn = layer.gamma.empty() ? 0 : 4;  // gamma, beta, running mean/var
        w.u32(params);
        if (params) {
            w.tensor(layer.weights);
            w.tensor(layer.bias);
        }
        w.u32(bn);
        if (bn) {
            w.tensor(layer.gamma);
            w.tensor(layer.beta);
            w.tensor(layer.running.mean);
            w.tensor(layer.running.var);
        }
    }
}

ModelGraph load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw_format(path + ": bad checkpoint magic at byte offset 0");
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw_format(path + ": unsupported checkpoint version " + std::to_string(version) +
                     " (expected " + std::to_string(kVersion) + ")");

    const uint32_t nd = r.u32();
    if (nd > 8) r.fail("implausible input rank");
    std::vector<int> input_shape(nd);
    for (uint32_t i = 0; i < nd; ++i) input_shape[i] = static_cast<int>(r.u32());

    const uint32_t layer_count = r.u32();
    if (layer_count > 4096) r.fail("implausible layer count");
    std::vector<LayerSpec> specs;
    specs.reserve(layer_count);
    for (uint32_t i = 0; i < layer_count; ++i) specs.push_back(read_spec(r));

    ModelGraph model(std::move(input_shape), std::move(specs));
    for (int i = 0; i < model.layer_count(); ++i) {
        auto& layer = model.layer(i);
        const uint32_t params = r.u32();
        if (params != (layer.weights.empty() ? 0u : 2u)) r.fail("parameter count mismatch");
        if (params) {
            copy_tensor_into(r, layer.weights, "weights");
            copy_tensor_into(r, layer.bias, "bias");
        }
        const uint32_t bn = r.u32();
        if (bn != (layer.gamma.empty() ? 0u : 4u)) r.fail("running-stat count mismatch");
        if (bn) {
            copy_tensor_into(r, layer.gamma, "gamma");
            copy_tensor_into(r, layer.beta, "beta");
            copy_tensor_into(r, layer.running.mean, "running mean");
            copy_tensor_into(r, layer.running.var, "running variance");
        }
    }
    return model;
}

}  // namespace dp
