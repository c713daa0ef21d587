// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Float32 reference inference.
//
// Every output element is accumulated in a fixed order: input channel, then
// kernel row, then kernel column, starting from zero; the bias is added last.
// Build with -ffp-contract=off so no multiply-add is fused.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "intnet/network.hpp"
#include "intnet/tensor.hpp"

namespace intnet {

struct FloatActivation {
  std::string layer;
  TensorF values;  // NCHW output of `layer`
};

struct FloatResult {
  TensorF output;
  std::vector<FloatActivation> taps;  // every layer output, in execution order
};

// NCHW input, OIHW kernel. `bias` may be empty.
TensorF conv2d_f32(const TensorF& input, const TensorF& kernel, std::span<const float> bias,
                   int stride, int pad);

TensorF brelu_f32(const TensorF& x, float l, float h);

// y = (x - mean) * gamma / sqrt(var + eps) + beta per channel.
TensorF batchnorm_f32(const TensorF& x, const BatchNorm& bn);

// `input` is NCHW (or CHW for a single image) and already re-normalized.
FloatResult forward_f32(const NetworkIR& net, const TensorF& input, bool record_taps = false);

// Pre-BReLU activation (the BReLU's input) of every BReLU layer, keyed by the
// BReLU id, from a tap list.
const TensorF& brelu_input_tap(const NetworkIR& net, const FloatResult& result,
                               std::string_view brelu_id);

}  // namespace intnet
