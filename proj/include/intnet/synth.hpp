// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded demo networks and inputs: untrained weights with He-style scaling,
// BReLU bounds left open (calibration sets them).

#pragma once

#include <cstdint>
#include <vector>

#include "intnet/network.hpp"
#include "intnet/tensor.hpp"

namespace intnet {

// 4 convs, two concats: 64@5x5 -> {16@5x5, 32@3x3} -> {16@3x3, 32@1x1} -> 1@3x3.
// The last conv has no BReLU (signed residual output). ratio_X = 256.
NetworkIR make_vrcnn(std::uint64_t seed, std::int64_t size = 64, bool batch_norm = false);

// conv/BReLU chain over `channels` (first entry = input channels); the last
// conv is the linear sink.
NetworkIR make_linear(std::uint64_t seed, const std::vector<std::int64_t>& channels,
                      std::int64_t size = 16, bool batch_norm = false);

// Stem conv, an identity-skip block and a conv-skip block, linear sink.
NetworkIR make_residual(std::uint64_t seed, std::int64_t channels = 8, std::int64_t size = 16,
                        bool batch_norm = true);

// `count` uniform random CxHxW uint8 images.
std::vector<TensorU8> random_images(std::uint64_t seed, std::size_t count, const Shape& chw);

}  // namespace intnet
