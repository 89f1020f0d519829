#include <algorithm>
#include <cmath>
#include <string>

#include "driveperc/error.hpp"
#include "driveperc/nn.hpp"

namespace dp {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::Dense: return "Dense";
        case LayerKind::MaxPool: return "MaxPool";
        case LayerKind::Dropout: return "Dropout";
        case LayerKind::BatchNorm: return "BatchNorm";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
        case LayerKind::Activation: return "Activation";
        case LayerKind::Upsample: return "Upsample";
        case LayerKind::ConcatMerge: return "ConcatMerge";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(int filters, int kh, int kw, int sh, int sw, Padding padding, WeightInit init) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.filters = filters;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.stride_h = sh;
    s.stride_w = sw;
    s.padding = padding;
    s.init = init;
    return s;
}

LayerSpec LayerSpec::dense(int units, WeightInit init) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    s.init = init;
    return s;
}

LayerSpec LayerSpec::maxpool(int h, int w) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool;
    s.pool_h = h;
    s.pool_w = w;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
}

LayerSpec LayerSpec::batchnorm(double momentum, double epsilon) {
    LayerSpec s;
    s.kind = LayerKind::BatchNorm;
    s.momentum = momentum;
    s.epsilon = epsilon;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

LayerSpec LayerSpec::global_avg_pool() {
    LayerSpec s;
    s.kind = LayerKind::GlobalAvgPool;
    return s;
}

LayerSpec LayerSpec::make_activation(ActivationKind kind, double alpha) {
    LayerSpec s;
    s.kind = LayerKind::Activation;
    s.activation = kind;
    s.alpha = alpha;
    return s;
}

LayerSpec LayerSpec::upsample(int factor) {
    LayerSpec s;
    s.kind = LayerKind::Upsample;
    s.factor = factor;
    return s;
}

LayerSpec LayerSpec::concat_merge(std::string source) {
    LayerSpec s;
    s.kind = LayerKind::ConcatMerge;
    s.merge_source = std::move(source);
    return s;
}

LayerSpec& LayerSpec::with_tap(std::string name) {
    tap = std::move(name);
    return *this;
}

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::Conv2D:
            if (filters <= 0 || kernel_h <= 0 || kernel_w <= 0) throw_parameter("Conv2D needs positive filters and kernel");
            if (stride_h <= 0 || stride_w <= 0) throw_parameter("Conv2D stride must be positive");
            break;
        case LayerKind::Dense:
            if (units <= 0) throw_parameter("Dense needs positive units");
            break;
        case LayerKind::MaxPool:
            if (pool_h <= 0 || pool_w <= 0) throw_parameter("MaxPool window must be positive");
            break;
        case LayerKind::Dropout:
            if (rate < 0.0 || rate >= 1.0) throw_parameter("Dropout rate must be in [0,1)");
            break;
        case LayerKind::BatchNorm:
            if (epsilon <= 0.0) throw_parameter("BatchNorm epsilon must be positive");
            if (momentum < 0.0 || momentum > 1.0) throw_parameter("BatchNorm momentum must be in [0,1]");
            break;
        case LayerKind::Activation:
            if (activation == ActivationKind::Elu && alpha <= 0.0) throw_parameter("ELU alpha must be positive");
            break;
        case LayerKind::Upsample:
            if (factor < 1) throw_parameter("Upsample factor must be >= 1");
            break;
        case LayerKind::ConcatMerge:
            if (merge_source.empty()) throw_parameter("ConcatMerge needs a source tap name");
            break;
        default:
            break;
    }
}

// --- Activations ---

Tensor activation(ActivationKind kind, const Tensor& x, double alpha) {
    switch (kind) {
        case ActivationKind::Sigmoid:
            return map(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case ActivationKind::Relu:
            return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
        case ActivationKind::Elu:
            return map(x, [alpha](double v) { return v >= 0.0 ? v : alpha * (std::exp(v) - 1.0); });
        case ActivationKind::Softmax: {
            if (x.ndim() < 1) throw_dimension("softmax needs at least one axis");
            const int classes = x.shape().back();
            const size_t rows = x.size() / static_cast<size_t>(classes);
            Tensor out = x;
            for (size_t r = 0; r < rows; ++r) {
                double* row = out.data() + r * static_cast<size_t>(classes);
                double m = row[0];
                for (int c = 1; c < classes; ++c) m = std::max(m, row[c]);
                double total = 0.0;
                for (int c = 0; c < classes; ++c) {
                    row[c] = std::exp(row[c] - m);
                    total += row[c];
                }
                for (int c = 0; c < classes; ++c) row[c] /= total;
            }
            return out;
        }
    }
    throw_parameter("unknown activation kind");
}

Tensor activation_grad(ActivationKind kind, const Tensor& x, double alpha) {
    switch (kind) {
        case ActivationKind::Sigmoid:
            return map(x, [](double v) {
                const double s = 1.0 / (1.0 + std::exp(-v));
                return s * (1.0 - s);
            });
        case ActivationKind::Relu:
            return map(x, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case ActivationKind::Elu:
            // Derivative at exactly 0 is defined as 1.
            return map(x, [alpha](double v) { return v >= 0.0 ? 1.0 : alpha * std::exp(v); });
        case ActivationKind::Softmax:
            throw_parameter("softmax has no elementwise derivative; use softmax_vjp or the fused loss gradient");
    }
    throw_parameter("unknown activation kind");
}

Tensor softmax_vjp(const Tensor& y, const Tensor& g) {
    if (!y.same_shape(g)) throw_dimension("softmax_vjp shape mismatch");
    const int classes = y.shape().back();
    const size_t rows = y.size() / static_cast<size_t>(classes);
    Tensor out(y.shape());
    for (size_t r = 0; r < rows; ++r) {
        const double* yr = y.data() + r * static_cast<size_t>(classes);
        const double* gr = g.data() + r * static_cast<size_t>(classes);
        double dot = 0.0;
        for (int c = 0; c < classes; ++c) dot += gr[c] * yr[c];
        double* o = out.data() + r * static_cast<size_t>(classes);
        for (int c = 0; c < classes; ++c) o[c] = yr[c] * (gr[c] - dot);
    }
    return out;
}

// --- Losses ---

namespace {

constexpr double kClampLo = 1e-12;
constexpr double kClampHi = 1.0 - 1e-12;

void require_same_shape(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw_dimension("loss shape mismatch between y_true and y_pred");
}

size_t ce_batch(const Tensor& t) {
    const int classes = t.shape().back();
    return t.size() / static_cast<size_t>(classes);
}

}  // namespace

double loss(LossKind kind, const Tensor& y_true, const Tensor& y_pred) {
    require_same_shape(y_true, y_pred);
    if (y_true.empty()) throw_parameter("loss of empty tensors");
    const size_t n = y_true.size();
    double total = 0.0;
    switch (kind) {
        case LossKind::Mse:
            for (size_t i = 0; i < n; ++i) {
                const double d = y_pred[i] - y_true[i];
                total += d * d;
            }
            return total / static_cast<double>(n);
        case LossKind::CategoricalCe:
        case LossKind::CrossEntropy:
            for (size_t i = 0; i < n; ++i)
                total -= y_true[i] * std::log(std::clamp(y_pred[i], kClampLo, kClampHi));
            return total / static_cast<double>(ce_batch(y_true));
        case LossKind::BinaryCe:
            for (size_t i = 0; i < n; ++i) {
                const double p = std::clamp(y_pred[i], kClampLo, kClampHi);
                total -= y_true[i] * std::log(p) + (1.0 - y_true[i]) * std::log(1.0 - p);
            }
            return total / static_cast<double>(n);
    }
    throw_parameter("unknown loss kind");
}

Tensor loss_grad(LossKind kind, const Tensor& y_true, const Tensor& y_pred) {
    require_same_shape(y_true, y_pred);
    if (y_true.empty()) throw_parameter("loss of empty tensors");
    const size_t n = y_true.size();
    Tensor out(y_pred.shape());
    switch (kind) {
        case LossKind::Mse:
            for (size_t i = 0; i < n; ++i) out[i] = 2.0 * (y_pred[i] - y_true[i]) / static_cast<double>(n);
            return out;
        case LossKind::CategoricalCe:
        case LossKind::CrossEntropy: {
            const double batch = static_cast<double>(ce_batch(y_true));
            for (size_t i = 0; i < n; ++i) {
                const double p = y_pred[i];
                out[i] = (p > kClampLo && p < kClampHi) ? -y_true[i] / p / batch : 0.0;
            }
            return out;
        }
        case LossKind::BinaryCe:
            for (size_t i = 0; i < n; ++i) {
                const double p = y_pred[i];
                out[i] = (p > kClampLo && p < kClampHi)
                             ? (-y_true[i] / p + (1.0 - y_true[i]) / (1.0 - p)) / static_cast<double>(n)
                             : 0.0;
            }
            return out;
    }
    throw_parameter("unknown loss kind");
}

Tensor fused_softmax_cce_grad(const Tensor& y_true, const Tensor& logits) {
    require_same_shape(y_true, logits);
    Tensor probs = activation(ActivationKind::Softmax, logits);
    const double batch = static_cast<double>(ce_batch(y_true));
    for (size_t i = 0; i < probs.size(); ++i) probs[i] = (probs[i] - y_true[i]) / batch;
    return probs;
}

// --- Optimizers (SGD / RMSprop / Adam update rules) ---

void Optimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads) {
    if (params.size() != grads.size()) throw_parameter("optimizer: params/grads size mismatch");
    const bool needs_v = config_.kind != OptimizerKind::Sgd;
    const bool needs_m = config_.kind == OptimizerKind::Adam;
    if (needs_v && v_.empty())
        for (const Tensor* p : params) v_.emplace_back(p->shape());
    if (needs_m && m_.empty())
        for (const Tensor* p : params) m_.emplace_back(p->shape());
    if (needs_v && v_.size() != params.size()) throw_parameter("optimizer: parameter list changed between steps");

    ++t_;
    const double lr = config_.learning_rate;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        const Tensor& g = *grads[pi];
        if (!p.same_shape(g)) throw_parameter("optimizer: gradient shape mismatch");
        switch (config_.kind) {
            case OptimizerKind::Sgd:
                for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
                break;
            case OptimizerKind::RmsProp: {
                Tensor& v = v_[pi];
                const double b = config_.beta;
                for (size_t i = 0; i < p.size(); ++i) {
                    v[i] = b * v[i] + (1.0 - b) * g[i] * g[i];
                    p[i] -= lr * g[i] / std::sqrt(v[i] + config_.epsilon);
                }
                break;
            }
            case OptimizerKind::Adam: {
                Tensor& m = m_[pi];
                Tensor& v = v_[pi];
                const double b1 = config_.beta1, b2 = config_.beta2;
                const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
                const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
                for (size_t i = 0; i < p.size(); ++i) {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    const double m_hat = m[i] / bc1;
                    const double v_hat = v[i] / bc2;
                    p[i] -= lr * m_hat / std::sqrt(v_hat + config_.epsilon);
                }
                break;
            }
        }
    }
}

// --- Dropout ---

DropoutResult dropout_forward(const Tensor& x, double rate, Mode mode, Prng& prng) {
    if (rate < 0.0 || rate >= 1.0) throw_parameter("dropout rate must be in [0,1)");
    if (mode == Mode::Infer || rate == 0.0) return {x, {}};
    DropoutResult res{Tensor(x.shape()), std::vector<uint8_t>(x.size())};
    const double scale = 1.0 / (1.0 - rate);
    for (size_t i = 0; i < x.size(); ++i) {
        const bool keep = prng.uniform() >= rate;
        res.mask[i] = keep;
        res.output[i] = keep ? x[i] * scale : 0.0;
    }
    return res;
}

// --- Batch normalization ---

namespace {

struct BnLayout {
    int channels;
    size_t per_channel;   // elements normalized together per channel
    size_t spatial;       // H*W (1 for 2-D inputs)
};

BnLayout bn_layout(const Tensor& x) {
    if (x.ndim() == 2) return {x.dim(1), static_cast<size_t>(x.dim(0)), 1};
    if (x.ndim() == 4)
        return {x.dim(1), static_cast<size_t>(x.dim(0)) * x.dim(2) * x.dim(3),
                static_cast<size_t>(x.dim(2)) * x.dim(3)};
    throw_dimension("batchnorm expects a (N,F) or (N,C,H,W) tensor");
}

template <typename Fn>
void bn_for_each(const Tensor& x, const BnLayout& l, int channel, Fn&& fn) {
    const int n = x.dim(0);
    for (int b = 0; b < n; ++b) {
        const size_t base = (static_cast<size_t>(b) * l.channels + channel) * l.spatial;
        for (size_t s = 0; s < l.spatial; ++s) fn(base + s);
    }
}

}  // namespace

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         BatchNormStats& running, double momentum, double eps, Mode mode,
                         BatchNormCache* cache) {
    const BnLayout l = bn_layout(x);
    if (static_cast<int>(gamma.size()) != l.channels || static_cast<int>(beta.size()) != l.channels)
        throw_dimension("batchnorm gamma/beta must have one value per channel");
    if (mode == Mode::Train && x.dim(0) < 2)
        throw_parameter("batchnorm requires batch size >= 2 in train mode");

    Tensor out(x.shape());
    Tensor x_hat(x.shape());
    std::vector<double> inv_std(static_cast<size_t>(l.channels));

    for (int c = 0; c < l.channels; ++c) {
        double mu, var;
        if (mode == Mode::Train) {
            double s = 0.0;
            bn_for_each(x, l, c, [&](size_t i) { s += x[i]; });
            mu = s / static_cast<double>(l.per_channel);
            double sq = 0.0;
            bn_for_each(x, l, c, [&](size_t i) {
                const double d = x[i] - mu;
                sq += d * d;
            });
            var = sq / static_cast<double>(l.per_channel);  // biased
            running.mean[static_cast<size_t>(c)] = momentum * running.mean[static_cast<size_t>(c)] + (1.0 - momentum) * mu;
            running.var[static_cast<size_t>(c)] = momentum * running.var[static_cast<size_t>(c)] + (1.0 - momentum) * var;
        } else {
            mu = running.mean[static_cast<size_t>(c)];
            var = running.var[static_cast<size_t>(c)];
        }
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(c)] = is;
        const double g = gamma[static_cast<size_t>(c)], b = beta[static_cast<size_t>(c)];
        bn_for_each(x, l, c, [&](size_t i) {
            const double xh = (x[i] - mu) * is;
            x_hat[i] = xh;
            out[i] = g * xh + b;
        });
    }

    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
        cache->channels = l.channels;
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor& dout, const Tensor& gamma, const BatchNormCache& cache) {
    const BnLayout l = bn_layout(dout);
    if (l.channels != cache.channels) throw_dimension("batchnorm backward: cache/channel mismatch");
    const Tensor& x_hat = cache.x_hat;

    BatchNormGrads grads{Tensor(dout.shape()), Tensor({l.channels}), Tensor({l.channels})};
    const double m = static_cast<double>(l.per_channel);
    for (int c = 0; c < l.channels; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        bn_for_each(dout, l, c, [&](size_t i) {
            sum_g += dout[i];
            sum_gx += dout[i] * x_hat[i];
        });
        grads.dbeta[static_cast<size_t>(c)] = sum_g;
        grads.dgamma[static_cast<size_t>(c)] = sum_gx;
        const double coeff = gamma[static_cast<size_t>(c)] * cache.inv_std[static_cast<size_t>(c)] / m;
        bn_for_each(dout, l, c, [&](size_t i) {
            grads.dx[i] = coeff * (m * dout[i] - sum_g - x_hat[i] * sum_gx);
        });
    }
    return grads;
}

}  // namespace dp
