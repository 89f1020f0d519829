#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "driveperc/conv_detail.hpp"
#include "driveperc/error.hpp"
#include "driveperc/nn.hpp"

namespace dp {

namespace {

std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

[[noreturn]] void layer_error(int index, const LayerSpec& spec, const std::string& msg) {
    throw_dimension("layer " + std::to_string(index) + " (" + layer_kind_name(spec.kind) + "): " + msg);
}

std::vector<int> with_batch(int n, const std::vector<int>& tail) {
    std::vector<int> s{n};
    s.insert(s.end(), tail.begin(), tail.end());
    return s;
}

void add_into(Tensor& dst, const Tensor& src) {
    if (dst.empty()) {
        dst = src;
        return;
    }
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

ModelGraph::ModelGraph(std::vector<int> input_shape, std::vector<LayerSpec> specs)
    : input_shape_(std::move(input_shape)) {
    if (input_shape_.empty()) throw_parameter("model input shape must not be empty");
    shape_product(input_shape_);  // validates positivity

    std::vector<int> cur = input_shape_;
    for (size_t idx = 0; idx < specs.size(); ++idx) {
        const int i = static_cast<int>(idx);
        LayerSpec spec = specs[idx];
        spec.validate();
        Layer layer;
        layer.spec = spec;
        switch (spec.kind) {
            case LayerKind::Conv2D: {
                if (cur.size() != 3) layer_error(i, spec, "needs a CxHxW input, got " + shape_string(cur));
                const auto g = detail::conv_geometry(cur[1], cur[2], spec.kernel_h, spec.kernel_w,
                                                     spec.stride_h, spec.stride_w, spec.padding);
                layer.weights = Tensor({spec.filters, cur[0], spec.kernel_h, spec.kernel_w});
                layer.bias = Tensor({spec.filters});
                cur = {spec.filters, g.out_h, g.out_w};
                break;
            }
            case LayerKind::Dense: {
                if (cur.size() != 1) layer_error(i, spec, "needs a flat input, got " + shape_string(cur));
                layer.weights = Tensor({cur[0], spec.units});
                layer.bias = Tensor({spec.units});
                cur = {spec.units};
                break;
            }
            case LayerKind::MaxPool: {
                if (cur.size() != 3) layer_error(i, spec, "needs a CxHxW input, got " + shape_string(cur));
                if (spec.pool_h > cur[1] || spec.pool_w > cur[2])
                    layer_error(i, spec, "window exceeds input " + shape_string(cur));
                cur = {cur[0], (cur[1] - spec.pool_h) / spec.pool_h + 1, (cur[2] - spec.pool_w) / spec.pool_w + 1};
                break;
            }
            case LayerKind::Dropout:
            case LayerKind::Activation:
                break;  // shape preserved
            case LayerKind::BatchNorm: {
                if (cur.size() != 1 && cur.size() != 3)
                    layer_error(i, spec, "needs a flat or CxHxW input, got " + shape_string(cur));
                const int channels = cur[0];
                layer.gamma = Tensor::full({channels}, 1.0);
                layer.beta = Tensor({channels});
                layer.running.mean = Tensor({channels});
                layer.running.var = Tensor::full({channels}, 1.0);
                break;
            }
            case LayerKind::Flatten:
                cur = {static_cast<int>(shape_product(cur))};
                break;
            case LayerKind::GlobalAvgPool:
                if (cur.size() != 3) layer_error(i, spec, "needs a CxHxW input, got " + shape_string(cur));
                cur = {cur[0]};
                break;
            case LayerKind::Upsample:
                if (cur.size() != 3) layer_error(i, spec, "needs a CxHxW input, got " + shape_string(cur));
                cur = {cur[0], cur[1] * spec.factor, cur[2] * spec.factor};
                break;
            case LayerKind::ConcatMerge: {
                if (cur.size() != 3) layer_error(i, spec, "needs a CxHxW input, got " + shape_string(cur));
                int src = -1;
                for (int j = 0; j < i; ++j)
                    if (layers_[static_cast<size_t>(j)].spec.tap == spec.merge_source) src = j;
                if (src < 0) throw_parameter("ConcatMerge source tap '" + spec.merge_source + "' not found among earlier layers");
                const auto& tap_shape = layers_[static_cast<size_t>(src)].out_shape;
                if (tap_shape.size() != 3 || tap_shape[1] != cur[1] || tap_shape[2] != cur[2])
                    layer_error(i, spec, "tap shape " + shape_string(tap_shape) + " does not match " + shape_string(cur));
                layer.merge_index = src;
                cur = {cur[0] + tap_shape[0], cur[1], cur[2]};
                break;
            }
        }
        layer.out_shape = cur;
        if (!layer.weights.empty()) {
            layer.grad_weights = Tensor(layer.weights.shape());
            layer.grad_bias = Tensor(layer.bias.shape());
        }
        if (!layer.gamma.empty()) {
            layer.grad_gamma = Tensor(layer.gamma.shape());
            layer.grad_beta = Tensor(layer.beta.shape());
        }
        layers_.push_back(std::move(layer));
    }
}

void ModelGraph::init_params(Prng& prng) {
    for (Layer& layer : layers_) {
        const LayerSpec& spec = layer.spec;
        if (spec.kind == LayerKind::Conv2D || spec.kind == LayerKind::Dense) {
            double fan_in, fan_out;
            if (spec.kind == LayerKind::Conv2D) {
                fan_in = static_cast<double>(layer.weights.dim(1)) * spec.kernel_h * spec.kernel_w;
                fan_out = static_cast<double>(spec.filters) * spec.kernel_h * spec.kernel_w;
            } else {
                fan_in = layer.weights.dim(0);
                fan_out = spec.units;
            }
            if (spec.init == WeightInit::HeNormal) {
                const double std_dev = std::sqrt(2.0 / fan_in);
                for (size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] = prng.normal() * std_dev;
            } else {
                const double limit = std::sqrt(6.0 / (fan_in + fan_out));
                for (size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] = prng.uniform(-limit, limit);
            }
            layer.bias.fill(0.0);
        } else if (spec.kind == LayerKind::BatchNorm) {
            layer.gamma.fill(1.0);
            layer.beta.fill(0.0);
            layer.running.mean.fill(0.0);
            layer.running.var.fill(1.0);
        }
    }
}

const std::vector<int>& ModelGraph::output_shape() const {
    return layers_.empty() ? input_shape_ : layers_.back().out_shape;
}

size_t ModelGraph::parameter_count() const {
    size_t n = 0;
    for (const Layer& l : layers_)
        n += l.weights.size() + l.bias.size() + l.gamma.size() + l.beta.size();
    return n;
}

std::vector<Tensor*> ModelGraph::parameters() {
    std::vector<Tensor*> out;
    for (Layer& l : layers_) {
        if (!l.weights.empty()) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
        if (!l.gamma.empty()) {
            out.push_back(&l.gamma);
            out.push_back(&l.beta);
        }
    }
    return out;
}

std::vector<Tensor*> ModelGraph::gradients() {
    std::vector<Tensor*> out;
    for (Layer& l : layers_) {
        if (!l.weights.empty()) {
            out.push_back(&l.grad_weights);
            out.push_back(&l.grad_bias);
        }
        if (!l.gamma.empty()) {
            out.push_back(&l.grad_gamma);
            out.push_back(&l.grad_beta);
        }
    }
    return out;
}

Tensor ModelGraph::layer_forward(int i, const Tensor& input, Prng* prng) {
    Layer& layer = layers_[static_cast<size_t>(i)];
    const LayerSpec& spec = layer.spec;
    const int n = input.dim(0);
    switch (spec.kind) {
        case LayerKind::Conv2D: {
            const int c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
            const auto g = detail::conv_geometry(h, w, spec.kernel_h, spec.kernel_w,
                                                 spec.stride_h, spec.stride_w, spec.padding);
            const int k = c_in * spec.kernel_h * spec.kernel_w;
            const size_t plane = static_cast<size_t>(g.out_h) * g.out_w;
            const size_t in_stride = static_cast<size_t>(c_in) * h * w;
            const size_t out_stride = static_cast<size_t>(spec.filters) * plane;
            Tensor out({n, spec.filters, g.out_h, g.out_w});
            std::vector<double> col(static_cast<size_t>(k) * plane);
            for (int s = 0; s < n; ++s) {
                detail::im2col(input.data() + s * in_stride, c_in, h, w, spec.kernel_h, spec.kernel_w,
                               spec.stride_h, spec.stride_w, g.pad_top, g.pad_left, g.out_h, g.out_w, col.data());
                double* o = out.data() + s * out_stride;
                gemm(layer.weights.data(), col.data(), o, spec.filters, k, static_cast<int>(plane));
                for (int f = 0; f < spec.filters; ++f) {
                    const double b = layer.bias[static_cast<size_t>(f)];
                    double* plane_ptr = o + static_cast<size_t>(f) * plane;
                    for (size_t p = 0; p < plane; ++p) plane_ptr[p] += b;
                }
            }
            return out;
        }
        case LayerKind::Dense: {
            const int f_in = layer.weights.dim(0), f_out = layer.weights.dim(1);
            Tensor out({n, f_out});
            gemm(input.data(), layer.weights.data(), out.data(), n, f_in, f_out);
            for (int s = 0; s < n; ++s)
                for (int f = 0; f < f_out; ++f) out.at2(s, f) += layer.bias[static_cast<size_t>(f)];
            return out;
        }
        case LayerKind::MaxPool: {
            const int c = input.dim(1), h = input.dim(2), w = input.dim(3);
            const size_t in_stride = static_cast<size_t>(c) * h * w;
            const auto& os = layer.out_shape;
            Tensor out({n, os[0], os[1], os[2]});
            const size_t out_stride = static_cast<size_t>(os[0]) * os[1] * os[2];
            if (mode_ == Mode::Train) layer.pool_argmax.assign(out.size(), 0);
            for (int s = 0; s < n; ++s) {
                Tensor sample({c, h, w}, std::vector<double>(input.data() + s * in_stride,
                                                             input.data() + (s + 1) * in_stride));
                PoolResult pr = maxpool2d(sample, {spec.pool_h, spec.pool_w}, {spec.pool_h, spec.pool_w});
                std::copy(pr.output.data(), pr.output.data() + out_stride, out.data() + s * out_stride);
                if (mode_ == Mode::Train)
                    for (size_t p = 0; p < out_stride; ++p)
                        layer.pool_argmax[s * out_stride + p] = pr.argmax[p] + s * in_stride;
            }
            return out;
        }
        case LayerKind::Dropout: {
            if (mode_ == Mode::Infer || spec.rate == 0.0) {
                layer.dropout_mask.clear();
                return input;
            }
            if (!prng) throw_parameter("dropout in train mode needs a Prng");
            DropoutResult dr = dropout_forward(input, spec.rate, mode_, *prng);
            layer.dropout_mask = std::move(dr.mask);
            return std::move(dr.output);
        }
        case LayerKind::BatchNorm:
            return batchnorm_forward(input, layer.gamma, layer.beta, layer.running,
                                     spec.momentum, spec.epsilon, mode_,
                                     mode_ == Mode::Train ? &layer.bn_cache : nullptr);
        case LayerKind::Flatten:
            return input.reshape(with_batch(n, layer.out_shape));
        case LayerKind::GlobalAvgPool: {
            const int c = input.dim(1);
            const size_t plane = static_cast<size_t>(input.dim(2)) * input.dim(3);
            Tensor out({n, c});
            for (int s = 0; s < n; ++s)
                for (int ch = 0; ch < c; ++ch) {
                    const double* p = input.data() + (static_cast<size_t>(s) * c + ch) * plane;
                    double acc = 0.0;
                    for (size_t q = 0; q < plane; ++q) acc += p[q];
                    out.at2(s, ch) = acc / static_cast<double>(plane);
                }
            return out;
        }
        case LayerKind::Activation:
            return activation(spec.activation, input, spec.alpha);
        case LayerKind::Upsample: {
            const int c = input.dim(1), h = input.dim(2), w = input.dim(3);
            const size_t in_stride = static_cast<size_t>(c) * h * w;
            Tensor out(with_batch(n, layer.out_shape));
            const size_t out_stride = shape_product(layer.out_shape);
            for (int s = 0; s < n; ++s) {
                Tensor sample({c, h, w}, std::vector<double>(input.data() + s * in_stride,
                                                             input.data() + (s + 1) * in_stride));
                Tensor up = bilinear_upsample(sample, spec.factor);
                std::copy(up.data(), up.data() + out_stride, out.data() + s * out_stride);
            }
            return out;
        }
        case LayerKind::ConcatMerge: {
            const Tensor& tap = cached_outputs_[static_cast<size_t>(layer.merge_index)];
            const int c1 = input.dim(1), c2 = tap.dim(1);
            const size_t plane = static_cast<size_t>(input.dim(2)) * input.dim(3);
            Tensor out({n, c1 + c2, input.dim(2), input.dim(3)});
            for (int s = 0; s < n; ++s) {
                std::copy(input.data() + s * c1 * plane, input.data() + (s + 1) * c1 * plane,
                          out.data() + static_cast<size_t>(s) * (c1 + c2) * plane);
                std::copy(tap.data() + s * c2 * plane, tap.data() + (s + 1) * c2 * plane,
                          out.data() + static_cast<size_t>(s) * (c1 + c2) * plane + static_cast<size_t>(c1) * plane);
            }
            return out;
        }
    }
    throw_parameter("unknown layer kind");
}

Tensor ModelGraph::forward(const Tensor& input, Prng* prng) {
    if (input.ndim() != static_cast<int>(input_shape_.size()) + 1)
        throw_dimension("model input must be (batch, " + shape_string(input_shape_) + "), got " + shape_string(input.shape()));
    for (size_t a = 0; a < input_shape_.size(); ++a)
        if (input.dim(static_cast<int>(a) + 1) != input_shape_[a])
            throw_dimension("model input shape " + shape_string(input.shape()) + " does not match " + shape_string(input_shape_));

    cached_outputs_.assign(layers_.size(), Tensor());
    if (mode_ == Mode::Train) cached_model_input_ = input;

    const Tensor* cur = &input;
    for (size_t i = 0; i < layers_.size(); ++i) {
        Tensor out = layer_forward(static_cast<int>(i), *cur, prng);
        cached_outputs_[i] = std::move(out);
        cur = &cached_outputs_[i];
    }
    return *cur;
}

Tensor ModelGraph::layer_backward(int i, const Tensor& input, const Tensor& grad_out, Tensor* tap_grad) {
    Layer& layer = layers_[static_cast<size_t>(i)];
    const LayerSpec& spec = layer.spec;
    const int n = input.dim(0);
    switch (spec.kind) {
        case LayerKind::Conv2D: {
            const int c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
            const auto g = detail::conv_geometry(h, w, spec.kernel_h, spec.kernel_w,
                                                 spec.stride_h, spec.stride_w, spec.padding);
            const int k = c_in * spec.kernel_h * spec.kernel_w;
            const size_t plane = static_cast<size_t>(g.out_h) * g.out_w;
            const size_t in_stride = static_cast<size_t>(c_in) * h * w;
            const size_t out_stride = static_cast<size_t>(spec.filters) * plane;

            Tensor grad_in(input.shape());
            std::vector<double> col(static_cast<size_t>(k) * plane);
            std::vector<double> dcol(static_cast<size_t>(k) * plane);
            for (int s = 0; s < n; ++s) {
                const double* x = input.data() + s * in_stride;
                const double* go = grad_out.data() + s * out_stride;
                detail::im2col(x, c_in, h, w, spec.kernel_h, spec.kernel_w,
                               spec.stride_h, spec.stride_w, g.pad_top, g.pad_left, g.out_h, g.out_w, col.data());
                // dW += dOut · col^T ; db += row sums ; dX via col2im(W^T · dOut)
                gemm(go, col.data(), layer.grad_weights.data(), spec.filters, static_cast<int>(plane), k,
                     false, true, true);
                for (int f = 0; f < spec.filters; ++f) {
                    const double* p = go + static_cast<size_t>(f) * plane;
                    double acc = 0.0;
                    for (size_t q = 0; q < plane; ++q) acc += p[q];
                    layer.grad_bias[static_cast<size_t>(f)] += acc;
                }
                gemm(layer.weights.data(), go, dcol.data(), k, spec.filters, static_cast<int>(plane), true, false);
                detail::col2im(dcol.data(), c_in, h, w, spec.kernel_h, spec.kernel_w,
                               spec.stride_h, spec.stride_w, g.pad_top, g.pad_left, g.out_h, g.out_w,
                               grad_in.data() + s * in_stride);
            }
            return grad_in;
        }
        case LayerKind::Dense: {
            const int f_in = layer.weights.dim(0), f_out = layer.weights.dim(1);
            gemm(input.data(), grad_out.data(), layer.grad_weights.data(), f_in, n, f_out, true, false, true);
            for (int s = 0; s < n; ++s)
                for (int f = 0; f < f_out; ++f) layer.grad_bias[static_cast<size_t>(f)] += grad_out.at2(s, f);
            Tensor grad_in({n, f_in});
            gemm(grad_out.data(), layer.weights.data(), grad_in.data(), n, f_out, f_in, false, true);
            return grad_in;
        }
        case LayerKind::MaxPool: {
            Tensor grad_in(input.shape());
            for (size_t p = 0; p < grad_out.size(); ++p) grad_in[layer.pool_argmax[p]] += grad_out[p];
            return grad_in;
        }
        case LayerKind::Dropout: {
            if (layer.dropout_mask.empty()) return grad_out;
            Tensor grad_in(grad_out.shape());
            const double scale = 1.0 / (1.0 - spec.rate);
            for (size_t p = 0; p < grad_out.size(); ++p)
                grad_in[p] = layer.dropout_mask[p] ? grad_out[p] * scale : 0.0;
            return grad_in;
        }
        case LayerKind::BatchNorm: {
            BatchNormGrads g = batchnorm_backward(grad_out, layer.gamma, layer.bn_cache);
            add_into(layer.grad_gamma, g.dgamma);
            add_into(layer.grad_beta, g.dbeta);
            return std::move(g.dx);
        }
        case LayerKind::Flatten:
            return grad_out.reshape(input.shape());
        case LayerKind::GlobalAvgPool: {
            const int c = input.dim(1);
            const size_t plane = static_cast<size_t>(input.dim(2)) * input.dim(3);
            Tensor grad_in(input.shape());
            for (int s = 0; s < n; ++s)
                for (int ch = 0; ch < c; ++ch) {
                    const double g = grad_out.at2(s, ch) / static_cast<double>(plane);
                    double* p = grad_in.data() + (static_cast<size_t>(s) * c + ch) * plane;
                    for (size_t q = 0; q < plane; ++q) p[q] = g;
                }
            return grad_in;
        }
        case LayerKind::Activation: {
            if (spec.activation == ActivationKind::Softmax)
                return softmax_vjp(cached_outputs_[static_cast<size_t>(i)], grad_out);
            Tensor deriv = activation_grad(spec.activation, input, spec.alpha);
            Tensor grad_in(grad_out.shape());
            for (size_t p = 0; p < grad_out.size(); ++p) grad_in[p] = grad_out[p] * deriv[p];
            return grad_in;
        }
        case LayerKind::Upsample: {
            const int c = input.dim(1), h = input.dim(2), w = input.dim(3);
            const int oh = layer.out_shape[1], ow = layer.out_shape[2];
            const size_t in_stride = static_cast<size_t>(c) * h * w;
            const size_t out_stride = static_cast<size_t>(c) * oh * ow;
            Tensor grad_in(input.shape());
            const double f = spec.factor;
            for (int s = 0; s < n; ++s) {
                const double* go = grad_out.data() + s * out_stride;
                double* gi = grad_in.data() + s * in_stride;
                for (int y = 0; y < oh; ++y) {
                    double sy = (y + 0.5) / f - 0.5;
                    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
                    const int y0 = static_cast<int>(sy);
                    const int y1 = std::min(y0 + 1, h - 1);
                    const double fy = sy - y0;
                    for (int x = 0; x < ow; ++x) {
                        double sx = (x + 0.5) / f - 0.5;
                        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
                        const int x0 = static_cast<int>(sx);
                        const int x1 = std::min(x0 + 1, w - 1);
                        const double fx = sx - x0;
                        for (int ch = 0; ch < c; ++ch) {
                            const double g = go[(static_cast<size_t>(ch) * oh + y) * ow + x];
                            double* chan = gi + static_cast<size_t>(ch) * h * w;
                            chan[static_cast<size_t>(y0) * w + x0] += g * (1.0 - fy) * (1.0 - fx);
                            chan[static_cast<size_t>(y0) * w + x1] += g * (1.0 - fy) * fx;
                            chan[static_cast<size_t>(y1) * w + x0] += g * fy * (1.0 - fx);
                            chan[static_cast<size_t>(y1) * w + x1] += g * fy * fx;
                        }
                    }
                }
            }
            return grad_in;
        }
        case LayerKind::ConcatMerge: {
            const Tensor& tap = cached_outputs_[static_cast<size_t>(layer.merge_index)];
            const int c1 = input.dim(1), c2 = tap.dim(1);
            const size_t plane = static_cast<size_t>(input.dim(2)) * input.dim(3);
            Tensor grad_in(input.shape());
            Tensor grad_tap(tap.shape());
            for (int s = 0; s < n; ++s) {
                const double* go = grad_out.data() + static_cast<size_t>(s) * (c1 + c2) * plane;
                std::copy(go, go + static_cast<size_t>(c1) * plane, grad_in.data() + static_cast<size_t>(s) * c1 * plane);
                std::copy(go + static_cast<size_t>(c1) * plane, go + static_cast<size_t>(c1 + c2) * plane,
                          grad_tap.data() + static_cast<size_t>(s) * c2 * plane);
            }
            if (tap_grad) *tap_grad = std::move(grad_tap);
            return grad_in;
        }
    }
    throw_parameter("unknown layer kind");
}

void ModelGraph::backward_impl(const Tensor& grad, int start_layer) {
    for (Layer& l : layers_) {
        if (!l.grad_weights.empty()) l.grad_weights.fill(0.0);
        if (!l.grad_bias.empty()) l.grad_bias.fill(0.0);
        if (!l.grad_gamma.empty()) l.grad_gamma.fill(0.0);
        if (!l.grad_beta.empty()) l.grad_beta.fill(0.0);
    }
    input_gradient_ = Tensor();
    if (start_layer < 0) {
        input_gradient_ = grad;
        return;
    }

    std::vector<Tensor> gbuf(layers_.size());
    gbuf[static_cast<size_t>(start_layer)] = grad;
    for (int i = start_layer; i >= 0; --i) {
        const Tensor& gout = gbuf[static_cast<size_t>(i)];
        const Tensor& in = (i == 0) ? cached_model_input_ : cached_outputs_[static_cast<size_t>(i) - 1];
        Tensor tap_grad;
        Tensor gin = layer_backward(i, in, gout, &tap_grad);
        if (!tap_grad.empty())
            add_into(gbuf[static_cast<size_t>(layers_[static_cast<size_t>(i)].merge_index)], tap_grad);
        if (i == 0)
            add_into(input_gradient_, gin);
        else
            add_into(gbuf[static_cast<size_t>(i) - 1], gin);
        gbuf[static_cast<size_t>(i)] = Tensor();  // free as we go
    }
}

void ModelGraph::backward(const Tensor& output_grad) {
    if (mode_ != Mode::Train) throw_parameter("backward requires a train-mode forward pass");
    backward_impl(output_grad, static_cast<int>(layers_.size()) - 1);
}

void ModelGraph::backward_from_logits(const Tensor& logit_grad) {
    if (mode_ != Mode::Train) throw_parameter("backward requires a train-mode forward pass");
    if (layers_.empty() || layers_.back().spec.kind != LayerKind::Activation ||
        layers_.back().spec.activation != ActivationKind::Softmax)
        throw_parameter("backward_from_logits requires a final softmax Activation layer");
    backward_impl(logit_grad, static_cast<int>(layers_.size()) - 2);
}

namespace {

Tensor gather_rows(const Tensor& t, const std::vector<size_t>& indices, size_t start, size_t count) {
    std::vector<int> shape = t.shape();
    shape[0] = static_cast<int>(count);
    Tensor out(shape);
    const size_t stride = t.size() / static_cast<size_t>(t.dim(0));
    for (size_t i = 0; i < count; ++i)
        std::copy(t.data() + indices[start + i] * stride, t.data() + (indices[start + i] + 1) * stride,
                  out.data() + i * stride);
    return out;
}

bool use_fused_softmax(const ModelGraph& model, LossKind kind) {
    if (kind != LossKind::CategoricalCe && kind != LossKind::CrossEntropy) return false;
    const int n = model.layer_count();
    return n > 0 && model.spec(n - 1).kind == LayerKind::Activation &&
           model.spec(n - 1).activation == ActivationKind::Softmax;
}

}  // namespace

double train_epoch(ModelGraph& model, const Tensor& inputs, const Tensor& targets,
                   LossKind loss_kind, Optimizer& optimizer, Prng& prng, int batch_size) {
    if (inputs.ndim() < 2) throw_parameter("train_epoch needs batched inputs");
    const size_t n = static_cast<size_t>(inputs.dim(0));
    if (targets.dim(0) != inputs.dim(0)) throw_parameter("train_epoch: inputs/targets batch mismatch");
    if (batch_size < 1) throw_parameter("train_epoch: batch size must be >= 1");

    model.set_mode(Mode::Train);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = n - 1; i > 0; --i) {
        const size_t j = prng.below(i + 1);
        std::swap(order[i], order[j]);
    }

    const bool fused = use_fused_softmax(model, loss_kind);
    double total = 0.0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
        const size_t count = std::min(static_cast<size_t>(batch_size), n - start);
        Tensor x = gather_rows(inputs, order, start, count);
        Tensor y = gather_rows(targets, order, start, count);
        Tensor out = model.forward(x, &prng);
        total += loss(loss_kind, y, out) * static_cast<double>(count);
        if (fused) {
            // d(loss)/d(logits) = (softmax - y)/batch, and softmax == out.
            Tensor g(out.shape());
            const double batch = static_cast<double>(out.size()) / out.shape().back();
            for (size_t i = 0; i < g.size(); ++i) g[i] = (out[i] - y[i]) / batch;
            model.backward_from_logits(g);
        } else {
            model.backward(loss_grad(loss_kind, y, out));
        }
        optimizer.step(model.parameters(), model.gradients());
    }
    return total / static_cast<double>(n);
}

EvalResult evaluate(ModelGraph& model, const Tensor& inputs, const Tensor& targets,
                    LossKind loss_kind, const std::vector<MetricHook>& hooks, int batch_size) {
    if (inputs.ndim() < 2) throw_parameter("evaluate needs batched inputs");
    const size_t n = static_cast<size_t>(inputs.dim(0));
    if (targets.dim(0) != inputs.dim(0)) throw_parameter("evaluate: inputs/targets batch mismatch");

    model.set_mode(Mode::Infer);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    EvalResult res;
    res.predictions = Tensor(with_batch(static_cast<int>(n), model.output_shape()));
    const size_t out_stride = res.predictions.size() / n;
    double total = 0.0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
        const size_t count = std::min(static_cast<size_t>(batch_size), n - start);
        Tensor x = gather_rows(inputs, order, start, count);
        Tensor y = gather_rows(targets, order, start, count);
        Tensor out = model.forward(x, nullptr);
        total += loss(loss_kind, y, out) * static_cast<double>(count);
        std::copy(out.data(), out.data() + out.size(), res.predictions.data() + start * out_stride);
    }
    res.loss = total / static_cast<double>(n);
    for (const MetricHook& hook : hooks) res.metrics.emplace_back(hook.name, hook.fn(targets, res.predictions));
    return res;
}

}  // namespace dp
