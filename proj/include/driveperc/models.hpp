#pragma once

#include <string>

#include "driveperc/nn.hpp"

namespace dp {

// Traffic-sign classifier: three conv blocks
// [Conv(c,3x3,same)+ReLU -> MaxPool 2x2 -> BatchNorm -> Dropout 0.3] with
// c in {64,128,512}, then Dense 4000/4000/1000 (ReLU) and a softmax head.
// Input 3x32x32; the head defaults to the 43 GTSRB classes.
ModelGraph build_traffic_sign_cnn(int num_classes = 43);

// Behavioral-cloning regressor: Conv 24/36/48 (5x5, stride 2) + 64/64
// (3x3, stride 1), all ELU, Dropout 0.5, then Dense 100/50/10/1 with a
// linear output. Input 3x66x200 (YUV), output one steering value.
ModelGraph build_behavior_clone_cnn();

// Mini encoder-decoder segmenter with skip fusion: a 5-block encoder
// (16/32/64/128/128 filters, each Conv 3x3 same + ReLU + MaxPool 2x2) with
// taps after pools 3 and 4; the decoder upsamples pool5 by 2, concatenates
// pool4, convolves, upsamples by 2, concatenates pool3, convolves, then
// upsamples by 8 into a 1x1 conv + sigmoid mask head. Input 3x128x128,
// output 1x128x128.
ModelGraph build_mini_fcn_segmenter();

// Binary vehicle/non-vehicle classifier: the traffic-sign conv trunk with a
// Dense(1) + sigmoid head. Input 3x32x32.
ModelGraph build_binary_vehicle_cnn();

// Versioned little-endian binary checkpoint ("NNW1"): the layer specs, every
// parameter tensor and the BatchNorm running statistics. load(save(m))
// reproduces bit-identical inference.
void save_checkpoint(const ModelGraph& model, const std::string& path);
ModelGraph load_checkpoint(const std::string& path);

}  // namespace dp
