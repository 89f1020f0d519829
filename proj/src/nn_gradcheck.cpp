#include <algorithm>
#include <cmath>

#include "driveperc/error.hpp"
#include "driveperc/nn.hpp"

namespace dp {

namespace {

double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

double loss_at(ModelGraph& model, const Tensor& input, const Tensor& target, LossKind kind) {
    Prng unused(0);
    Tensor out = model.forward(input, &unused);
    return loss(kind, target, out);
}

double fd_sweep(ModelGraph& model, Tensor& subject, const Tensor& input, const Tensor& target,
                LossKind kind, const Tensor& analytic, double h) {
    double worst = 0.0;
    for (size_t i = 0; i < subject.size(); ++i) {
        const double saved = subject[i];
        subject[i] = saved + h;
        const double up = loss_at(model, input, target, kind);
        subject[i] = saved - h;
        const double down = loss_at(model, input, target, kind);
        subject[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_error(analytic[i], numeric));
    }
    return worst;
}

}  // namespace

double gradient_check_model(ModelGraph& model, const Tensor& input, const Tensor& target,
                            LossKind loss_kind, double h) {
    model.set_mode(Mode::Train);
    Prng unused(0);
    Tensor out = model.forward(input, &unused);
    model.backward(loss_grad(loss_kind, target, out));

    // Copy the analytic gradients before finite differences overwrite them.
    std::vector<Tensor> analytic;
    for (Tensor* g : model.gradients()) analytic.push_back(*g);
    const Tensor input_grad = model.input_gradient();

    double worst = 0.0;
    const auto params = model.parameters();
    for (size_t p = 0; p < params.size(); ++p)
        worst = std::max(worst, fd_sweep(model, *params[p], input, target, loss_kind, analytic[p], h));

    Tensor x = input;
    worst = std::max(worst, fd_sweep(model, x, x, target, loss_kind, input_grad, h));
    return worst;
}

namespace {

Tensor random_tensor(std::vector<int> shape, Prng& prng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = prng.normal() * scale;
    return t;
}

// Values bounded away from 0 so ReLU's kink never sits within the FD step.
Tensor relu_safe_tensor(std::vector<int> shape, Prng& prng) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) {
        const double sign = prng.uniform() < 0.5 ? -1.0 : 1.0;
        t[i] = sign * prng.uniform(0.05, 1.0);
    }
    return t;
}

// Values with distinct pooling-window entries (min gap 1e-3) so the argmax
// cannot flip inside the FD step.
Tensor pool_safe_tensor(std::vector<int> shape, Prng& prng) {
    while (true) {
        Tensor t = random_tensor(shape, prng);
        std::vector<double> sorted(t.vec());
        std::sort(sorted.begin(), sorted.end());
        bool ok = true;
        for (size_t i = 1; i < sorted.size() && ok; ++i) ok = sorted[i] - sorted[i - 1] > 1e-3;
        if (ok) return t;
    }
}

Tensor one_hot_rows(int rows, int classes, Prng& prng) {
    Tensor t({rows, classes});
    for (int r = 0; r < rows; ++r) t.at2(r, static_cast<int>(prng.below(static_cast<uint64_t>(classes)))) = 1.0;
    return t;
}

Tensor distribution_rows(int rows, int classes, Prng& prng) {
    Tensor t({rows, classes});
    for (int r = 0; r < rows; ++r) {
        double total = 0.0;
        for (int c = 0; c < classes; ++c) {
            t.at2(r, c) = prng.uniform(0.05, 1.0);
            total += t.at2(r, c);
        }
        for (int c = 0; c < classes; ++c) t.at2(r, c) /= total;
    }
    return t;
}

Tensor binary_rows(int rows, int cols, Prng& prng) {
    Tensor t({rows, cols});
    for (size_t i = 0; i < t.size(); ++i) t[i] = prng.uniform() < 0.5 ? 0.0 : 1.0;
    return t;
}

struct CaseInputs {
    ModelGraph model;
    Tensor input, target;
    LossKind kind = LossKind::Mse;
};

CaseInputs make_case(const std::string& name, Prng& prng) {
    CaseInputs c;
    if (name == "conv2d_valid") {
        c.model = ModelGraph({2, 5, 5}, {LayerSpec::conv2d(3, 3, 3), LayerSpec::flatten()});
        c.input = random_tensor({2, 2, 5, 5}, prng);
        c.target = random_tensor({2, 27}, prng);
    } else if (name == "conv2d_same_strided") {
        c.model = ModelGraph({2, 5, 5}, {LayerSpec::conv2d(3, 3, 3, 2, 2, Padding::Same), LayerSpec::flatten()});
        c.input = random_tensor({2, 2, 5, 5}, prng);
        c.target = random_tensor({2, 27}, prng);
    } else if (name == "dense") {
        c.model = ModelGraph({7}, {LayerSpec::dense(5)});
        c.input = random_tensor({4, 7}, prng);
        c.target = random_tensor({4, 5}, prng);
    } else if (name == "maxpool") {
        c.model = ModelGraph({2, 6, 6}, {LayerSpec::maxpool(2, 2), LayerSpec::flatten()});
        c.input = pool_safe_tensor({2, 2, 6, 6}, prng);
        c.target = random_tensor({2, 18}, prng);
    } else if (name == "dropout_off") {
        c.model = ModelGraph({8}, {LayerSpec::dropout(0.0)});
        c.input = random_tensor({3, 8}, prng);
        c.target = random_tensor({3, 8}, prng);
    } else if (name == "batchnorm_dense") {
        c.model = ModelGraph({3}, {LayerSpec::batchnorm()});
        c.input = random_tensor({8, 3}, prng);
        c.target = random_tensor({8, 3}, prng);
    } else if (name == "batchnorm_conv") {
        c.model = ModelGraph({2, 3, 3}, {LayerSpec::batchnorm(), LayerSpec::flatten()});
        c.input = random_tensor({4, 2, 3, 3}, prng);
        c.target = random_tensor({4, 18}, prng);
    } else if (name == "flatten") {
        c.model = ModelGraph({2, 3, 4}, {LayerSpec::flatten()});
        c.input = random_tensor({2, 2, 3, 4}, prng);
        c.target = random_tensor({2, 24}, prng);
    } else if (name == "global_avg_pool") {
        c.model = ModelGraph({3, 4, 4}, {LayerSpec::global_avg_pool()});
        c.input = random_tensor({2, 3, 4, 4}, prng);
        c.target = random_tensor({2, 3}, prng);
    } else if (name == "activation_sigmoid") {
        c.model = ModelGraph({6}, {LayerSpec::make_activation(ActivationKind::Sigmoid)});
        c.input = random_tensor({3, 6}, prng);
        c.target = random_tensor({3, 6}, prng);
    } else if (name == "activation_relu") {
        c.model = ModelGraph({6}, {LayerSpec::make_activation(ActivationKind::Relu)});
        c.input = relu_safe_tensor({3, 6}, prng);
        c.target = random_tensor({3, 6}, prng);
    } else if (name == "activation_elu") {
        c.model = ModelGraph({6}, {LayerSpec::make_activation(ActivationKind::Elu, 1.3)});
        c.input = relu_safe_tensor({3, 6}, prng);
        c.target = random_tensor({3, 6}, prng);
    } else if (name == "activation_softmax") {
        c.model = ModelGraph({5}, {LayerSpec::make_activation(ActivationKind::Softmax)});
        c.input = random_tensor({3, 5}, prng);
        c.target = random_tensor({3, 5}, prng);
    } else if (name == "upsample") {
        c.model = ModelGraph({2, 3, 4}, {LayerSpec::upsample(2), LayerSpec::flatten()});
        c.input = random_tensor({2, 2, 3, 4}, prng);
        c.target = random_tensor({2, 96}, prng);
    } else if (name == "concat_merge") {
        c.model = ModelGraph({2, 4, 4}, {LayerSpec::conv2d(2, 1, 1).with_tap("skip"),
                                         LayerSpec::conv2d(3, 3, 3, 1, 1, Padding::Same),
                                         LayerSpec::concat_merge("skip"), LayerSpec::flatten()});
        c.input = random_tensor({2, 2, 4, 4}, prng);
        c.target = random_tensor({2, 80}, prng);
    } else if (name == "loss_mse") {
        c.model = ModelGraph({4}, {LayerSpec::dense(2)});
        c.input = random_tensor({3, 4}, prng);
        c.target = random_tensor({3, 2}, prng);
        c.kind = LossKind::Mse;
    } else if (name == "loss_categorical_ce") {
        c.model = ModelGraph({4}, {LayerSpec::dense(3), LayerSpec::make_activation(ActivationKind::Softmax)});
        c.input = random_tensor({3, 4}, prng);
        c.target = one_hot_rows(3, 3, prng);
        c.kind = LossKind::CategoricalCe;
    } else if (name == "loss_cross_entropy") {
        c.model = ModelGraph({4}, {LayerSpec::dense(3), LayerSpec::make_activation(ActivationKind::Softmax)});
        c.input = random_tensor({3, 4}, prng);
        c.target = distribution_rows(3, 3, prng);
        c.kind = LossKind::CrossEntropy;
    } else if (name == "loss_binary_ce") {
        c.model = ModelGraph({4}, {LayerSpec::dense(2), LayerSpec::make_activation(ActivationKind::Sigmoid)});
        c.input = random_tensor({3, 4}, prng);
        c.target = binary_rows(3, 2, prng);
        c.kind = LossKind::BinaryCe;
    } else {
        throw_parameter("unknown gradient check case: " + name);
    }
    return c;
}

}  // namespace

std::vector<GradCheckCase> gradient_check_suite(uint64_t seed, int rounds) {
    static const char* kCases[] = {
        "conv2d_valid", "conv2d_same_strided", "dense", "maxpool", "dropout_off",
        "batchnorm_dense", "batchnorm_conv", "flatten", "global_avg_pool",
        "activation_sigmoid", "activation_relu", "activation_elu", "activation_softmax",
        "upsample", "concat_merge",
        "loss_mse", "loss_categorical_ce", "loss_cross_entropy", "loss_binary_ce",
    };
    Prng root(seed);
    std::vector<GradCheckCase> results;
    for (const char* name : kCases) {
        GradCheckCase r{name, 0.0};
        for (int round = 0; round < rounds; ++round) {
            Prng prng = root.split();
            CaseInputs c = make_case(name, prng);
            c.model.init_params(prng);
            r.max_rel_error = std::max(r.max_rel_error,
                                       gradient_check_model(c.model, c.input, c.target, c.kind));
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace dp
