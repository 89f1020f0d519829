#include "driveperc/models.hpp"

namespace dp {

namespace {

void add_sign_trunk(std::vector<LayerSpec>& layers) {
    for (int filters : {64, 128, 512}) {
        layers.push_back(LayerSpec::conv2d(filters, 3, 3, 1, 1, Padding::Same));
        layers.push_back(LayerSpec::make_activation(ActivationKind::Relu));
        layers.push_back(LayerSpec::maxpool(2, 2));
        layers.push_back(LayerSpec::batchnorm());
        layers.push_back(LayerSpec::dropout(0.3));
    }
    layers.push_back(LayerSpec::flatten());
}

}  // namespace

ModelGraph build_traffic_sign_cnn(int num_classes) {
    std::vector<LayerSpec> layers;
    add_sign_trunk(layers);
    for (int units : {4000, 4000, 1000}) {
        layers.push_back(LayerSpec::dense(units));
        layers.push_back(LayerSpec::make_activation(ActivationKind::Relu));
    }
    layers.push_back(LayerSpec::dense(num_classes, WeightInit::GlorotUniform));
    layers.push_back(LayerSpec::make_activation(ActivationKind::Softmax));
    return ModelGraph({3, 32, 32}, std::move(layers));
}

ModelGraph build_behavior_clone_cnn() {
    std::vector<LayerSpec> layers;
    const int filters[] = {24, 36, 48, 64, 64};
    for (int i = 0; i < 5; ++i) {
        const int k = i < 3 ? 5 : 3;
        const int s = i < 3 ? 2 : 1;
        layers.push_back(LayerSpec::conv2d(filters[i], k, k, s, s));
        layers.push_back(LayerSpec::make_activation(ActivationKind::Elu));
    }
    layers.push_back(LayerSpec::dropout(0.5));
    layers.push_back(LayerSpec::flatten());
    for (int units : {100, 50, 10}) {
        layers.push_back(LayerSpec::dense(units));
        layers.push_back(LayerSpec::make_activation(ActivationKind::Elu));
    }
    layers.push_back(LayerSpec::dense(1));  // linear regression head
    return ModelGraph({3, 66, 200}, std::move(layers));
}

ModelGraph build_mini_fcn_segmenter() {
    std::vector<LayerSpec> layers;
    const int filters[] = {16, 32, 64, 128, 128};
    for (int i = 0; i < 5; ++i) {
        layers.push_back(LayerSpec::conv2d(filters[i], 3, 3, 1, 1, Padding::Same));
        layers.push_back(LayerSpec::make_activation(ActivationKind::Relu));
        LayerSpec pool = LayerSpec::maxpool(2, 2);
        if (i == 2) pool.with_tap("pool3");
        if (i == 3) pool.with_tap("pool4");
        layers.push_back(pool);
    }
    layers.push_back(LayerSpec::upsample(2));
    layers.push_back(LayerSpec::concat_merge("pool4"));
    layers.push_back(LayerSpec::conv2d(64, 3, 3, 1, 1, Padding::Same));
    layers.push_back(LayerSpec::make_activation(ActivationKind::Relu));
    layers.push_back(LayerSpec::upsample(2));
    layers.push_back(LayerSpec::concat_merge("pool3"));
    layers.push_back(LayerSpec::conv2d(32, 3, 3, 1, 1, Padding::Same));
    layers.push_back(LayerSpec::make_activation(ActivationKind::Relu));
    layers.push_back(LayerSpec::upsample(8));
    layers.push_back(LayerSpec::conv2d(1, 1, 1, 1, 1, Padding::Same, WeightInit::GlorotUniform));
    layers.push_back(LayerSpec::make_activation(ActivationKind::Sigmoid));
    return ModelGraph({3, 128, 128}, std::move(layers));
}

ModelGraph build_binary_vehicle_cnn() {
    std::vector<LayerSpec> layers;
    add_sign_trunk(layers);
    layers.push_back(LayerSpec::dense(1, WeightInit::GlorotUniform));
    layers.push_back(LayerSpec::make_activation(ActivationKind::Sigmoid));
    return ModelGraph({3, 32, 32}, std::move(layers));
}

}  // namespace dp
