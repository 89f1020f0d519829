#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "driveperc/prng.hpp"
#include "driveperc/tensor.hpp"

namespace dp {

enum class ActivationKind { Sigmoid, Relu, Elu, Softmax };
enum class LossKind { Mse, CategoricalCe, CrossEntropy, BinaryCe };
enum class Mode { Train, Infer };
enum class WeightInit { HeNormal, GlorotUniform };

enum class LayerKind {
    Conv2D, Dense, MaxPool, Dropout, BatchNorm, Flatten, GlobalAvgPool,
    Activation, Upsample, ConcatMerge,
};

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::Flatten;

    // Conv2D
    int filters = 0;
    int kernel_h = 0, kernel_w = 0;
    int stride_h = 1, stride_w = 1;
    Padding padding = Padding::Valid;
    WeightInit init = WeightInit::HeNormal;
    // Dense
    int units = 0;
    // MaxPool (stride defaults to the window)
    int pool_h = 0, pool_w = 0;
    // Dropout
    double rate = 0.0;
    // BatchNorm
    double momentum = 0.9;
    double epsilon = 1e-5;
    // Activation
    ActivationKind activation = ActivationKind::Relu;
    double alpha = 1.0;  // ELU only
    // Upsample
    int factor = 2;
    // ConcatMerge
    std::string merge_source;

    // Optional name exposing this layer's output as a skip source.
    std::string tap;

    static LayerSpec conv2d(int filters, int kh, int kw, int sh = 1, int sw = 1,
                            Padding padding = Padding::Valid, WeightInit init = WeightInit::HeNormal);
    static LayerSpec dense(int units, WeightInit init = WeightInit::HeNormal);
    static LayerSpec maxpool(int h, int w);
    static LayerSpec dropout(double rate);
    static LayerSpec batchnorm(double momentum = 0.9, double epsilon = 1e-5);
    static LayerSpec flatten();
    static LayerSpec global_avg_pool();
    static LayerSpec make_activation(ActivationKind kind, double alpha = 1.0);
    static LayerSpec upsample(int factor);
    static LayerSpec concat_merge(std::string source);
    LayerSpec& with_tap(std::string name);

    void validate() const;
};

// --- Activations (Eqs. of the sigmoid/ReLU/ELU/softmax family) ---

// Elementwise for sigmoid/relu/elu; softmax acts over the last axis and is
// computed with max-subtraction for stability.
Tensor activation(ActivationKind kind, const Tensor& x, double alpha = 1.0);

// Analytic elementwise derivative. ELU's derivative at exactly 0 is defined
// as 1. Softmax is not elementwise; its backward is handled jointly with the
// loss (see fused_softmax_cce_grad) or via softmax_vjp.
Tensor activation_grad(ActivationKind kind, const Tensor& x, double alpha = 1.0);

// Vector-Jacobian product of softmax: given y = softmax(x) and g = dL/dy,
// returns dL/dx row by row.
Tensor softmax_vjp(const Tensor& y, const Tensor& g);

// --- Losses ---

// Batch-mean scalar. The CE family clamps predictions into
// [1e-12, 1 - 1e-12] before the log. For categorical_ce / cross_entropy the
// class axis is the last one and the batch size is numel / last_dim; for mse
// and binary_ce the mean runs over all elements.
double loss(LossKind kind, const Tensor& y_true, const Tensor& y_pred);

// Gradient with respect to y_pred (zero where the clamp is active).
Tensor loss_grad(LossKind kind, const Tensor& y_true, const Tensor& y_pred);

// Gradient of categorical cross-entropy with respect to pre-softmax logits:
// (softmax(logits) - y_true) / batch.
Tensor fused_softmax_cce_grad(const Tensor& y_true, const Tensor& logits);

// --- Optimizers ---

enum class OptimizerKind { Sgd, RmsProp, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double learning_rate = 0.01;  // alpha (SGD) / eta (RMSprop, Adam)
    double beta = 0.9;            // RMSprop moving-average factor
    double beta1 = 0.9;           // Adam first-moment factor
    double beta2 = 0.999;         // Adam second-moment factor
    double epsilon = 1e-8;        // inside the square root for both
};

// Moment tensors are created lazily on the first step and keyed by position,
// so a given optimizer instance must always see the same parameter list.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config) : config_(config) {}

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads);

    const OptimizerConfig& config() const { return config_; }
    long step_count() const { return t_; }

private:
    OptimizerConfig config_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

// --- Dropout / BatchNorm primitives ---

struct DropoutResult {
    Tensor output;
    std::vector<uint8_t> mask;  // 1 = kept (empty in infer mode / rate 0)
};

// Inverted dropout: kept activations scale by 1/(1-rate) in train mode;
// infer mode is the identity. The mask consumes one uniform per element.
DropoutResult dropout_forward(const Tensor& x, double rate, Mode mode, Prng& prng);

struct BatchNormStats {
    Tensor mean, var;
};

struct BatchNormCache {
    Tensor x_hat;
    std::vector<double> inv_std;
    int channels = 0;
};

// Per-channel for (N,C,H,W), per-feature for (N,F). Train mode normalizes
// with biased batch statistics and folds them into the running stats with
// `momentum`; infer mode uses the running stats. Output = gamma * x_hat + beta.
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         BatchNormStats& running, double momentum, double eps, Mode mode,
                         BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor dx, dgamma, dbeta;
};

BatchNormGrads batchnorm_backward(const Tensor& dout, const Tensor& gamma, const BatchNormCache& cache);

// --- Model graph ---

class ModelGraph {
public:
    ModelGraph() = default;
    // input_shape excludes the batch axis, e.g. {3, 32, 32}.
    ModelGraph(std::vector<int> input_shape, std::vector<LayerSpec> layers);

    void init_params(Prng& prng);

    void set_mode(Mode mode) { mode_ = mode; }
    Mode mode() const { return mode_; }

    // Batched forward; input shape (N, *input_shape). Train mode caches the
    // intermediates backward() needs. Dropout layers draw from `prng`
    // (required in train mode when any dropout rate > 0).
    Tensor forward(const Tensor& input, Prng* prng = nullptr);

    // Backpropagate dL/d(output); parameter gradients land in grads() and
    // dL/d(model input) in input_gradient().
    void backward(const Tensor& output_grad);
    // Start one layer early, feeding dL/d(logits) past a final softmax
    // Activation layer (fused softmax + cross-entropy path).
    void backward_from_logits(const Tensor& logit_grad);

    std::vector<Tensor*> parameters();
    std::vector<Tensor*> gradients();
    const Tensor& input_gradient() const { return input_gradient_; }

    const std::vector<int>& input_shape() const { return input_shape_; }
    const std::vector<int>& output_shape() const;
    int layer_count() const { return static_cast<int>(layers_.size()); }
    const LayerSpec& spec(int i) const { return layers_[static_cast<size_t>(i)].spec; }
    const std::vector<int>& layer_output_shape(int i) const { return layers_[static_cast<size_t>(i)].out_shape; }
    size_t parameter_count() const;

    struct Layer {
        LayerSpec spec;
        std::vector<int> out_shape;
        int merge_index = -1;  // resolved ConcatMerge source
        Tensor weights, bias;                 // Conv2D / Dense
        Tensor gamma, beta;                   // BatchNorm
        BatchNormStats running;               // BatchNorm
        Tensor grad_weights, grad_bias, grad_gamma, grad_beta;

        // train-mode caches
        std::vector<size_t> pool_argmax;
        std::vector<uint8_t> dropout_mask;
        BatchNormCache bn_cache;
    };

    Layer& layer(int i) { return layers_[static_cast<size_t>(i)]; }
    const Layer& layer(int i) const { return layers_[static_cast<size_t>(i)]; }

private:
    void backward_impl(const Tensor& grad, int start_layer);
    Tensor layer_forward(int i, const Tensor& input, Prng* prng);
    Tensor layer_backward(int i, const Tensor& input, const Tensor& grad_out, Tensor* tap_grad);

    std::vector<int> input_shape_;
    std::vector<Layer> layers_;
    Mode mode_ = Mode::Infer;
    Tensor cached_model_input_;
    std::vector<Tensor> cached_outputs_;
    Tensor input_gradient_;
};

// --- Training loop ---

struct MetricHook {
    std::string name;
    // Receives the full target and prediction tensors after the epoch.
    std::function<double(const Tensor& y_true, const Tensor& y_pred)> fn;
};

// One pass over (inputs, targets) in a seeded shuffled order; returns the
// mean loss over samples. Uses the fused softmax + cross-entropy gradient
// when the final layer is a softmax Activation.
double train_epoch(ModelGraph& model, const Tensor& inputs, const Tensor& targets,
                   LossKind loss_kind, Optimizer& optimizer, Prng& prng, int batch_size);

struct EvalResult {
    double loss = 0;
    std::vector<std::pair<std::string, double>> metrics;
    Tensor predictions;  // (N, *output_shape)
};

EvalResult evaluate(ModelGraph& model, const Tensor& inputs, const Tensor& targets,
                    LossKind loss_kind, const std::vector<MetricHook>& hooks = {},
                    int batch_size = 64);

// --- Gradient checking ---

// Max relative error between analytic gradients and central finite
// differences (h = 1e-5) over every parameter and input element,
// rel = |a - n| / max(|a|, |n|, 1).
double gradient_check_model(ModelGraph& model, const Tensor& input, const Tensor& target,
                            LossKind loss_kind, double h = 1e-5);

struct GradCheckCase {
    std::string name;
    double max_rel_error = 0;
};

// One case per layer kind and per loss kind, each run over `rounds` seeds.
std::vector<GradCheckCase> gradient_check_suite(uint64_t seed, int rounds = 20);

}  // namespace dp
