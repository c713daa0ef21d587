// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/synth.hpp"

#include <cmath>
#include <random>

namespace intnet {

namespace {

class Builder {
 public:
  Builder(std::uint64_t seed, bool batch_norm) : rng_(seed), bn_(batch_norm) {}

  std::string conv(const std::string& id, const std::string& in, std::int64_t ic, std::int64_t oc,
                   std::int64_t k, float gain = 2.0f) {
    LayerSpec l;
    l.id = id;
    l.kind = LayerKind::kConv2d;
    l.inputs = {in};
    l.conv.kernel = TensorF({oc, ic, k, k});
    std::normal_distribution<float> w(0.0f, std::sqrt(gain / static_cast<float>(ic * k * k)));
    for (auto& v : l.conv.kernel.data()) v = w(rng_);
    std::normal_distribution<float> b(0.0f, 0.02f);
    l.conv.bias.resize(static_cast<std::size_t>(oc));
    for (auto& v : l.conv.bias) v = b(rng_);
    l.conv.pad = static_cast<int>(k / 2);
    if (bn_) {
      std::uniform_real_distribution<float> u(0.5f, 1.5f);
      std::normal_distribution<float> n(0.0f, 0.05f);
      BatchNorm bn;
      for (std::int64_t c = 0; c < oc; ++c) {
        bn.gamma.push_back(u(rng_));
        bn.beta.push_back(n(rng_));
        bn.mean.push_back(n(rng_));
        bn.var.push_back(u(rng_));
      }
      l.conv.bn = std::move(bn);
    }
    net.layers.push_back(std::move(l));
    return id;
  }

  std::string brelu(const std::string& id, const std::string& in) {
    LayerSpec l;
    l.id = id;
    l.kind = LayerKind::kBRelu;
    l.inputs = {in};
    net.layers.push_back(std::move(l));
    return id;
  }

  std::string merge(const std::string& id, LayerKind kind, std::vector<std::string> ins) {
    LayerSpec l;
    l.id = id;
    l.kind = kind;
    l.inputs = std::move(ins);
    net.layers.push_back(std::move(l));
    return id;
  }

  NetworkIR net;

 private:
  std::mt19937_64 rng_;
  bool bn_;
};

}  // namespace

NetworkIR make_vrcnn(std::uint64_t seed, std::int64_t size, bool batch_norm) {
  Builder b(seed, batch_norm);
  b.net.input = {1, size, size};
  b.net.input_ratio = 256;
  b.brelu("relu1", b.conv("conv1", "input", 1, 64, 5));
  b.brelu("relu2a", b.conv("conv2a", "relu1", 64, 16, 5));
  b.brelu("relu2b", b.conv("conv2b", "relu1", 64, 32, 3));
  b.merge("cat2", LayerKind::kConcat, {"relu2a", "relu2b"});
  b.brelu("relu3a", b.conv("conv3a", "cat2", 48, 16, 3));
  b.brelu("relu3b", b.conv("conv3b", "cat2", 48, 32, 1));
  b.merge("cat3", LayerKind::kConcat, {"relu3a", "relu3b"});
  b.conv("conv4", "cat3", 48, 1, 3, 1.0f);
  validate(b.net);
  return std::move(b.net);
}

NetworkIR make_linear(std::uint64_t seed, const std::vector<std::int64_t>& channels,
                      std::int64_t size, bool batch_norm) {
  if (channels.size() < 2) throw invalid_argument("make_linear needs at least 2 channel counts");
  Builder b(seed, batch_norm);
  b.net.input = {channels[0], size, size};
  std::string prev = "input";
  for (std::size_t i = 1; i < channels.size(); ++i) {
    const std::string id = "conv" + std::to_string(i);
    const bool last = i + 1 == channels.size();
    prev = b.conv(id, prev, channels[i - 1], channels[i], 3, last ? 1.0f : 2.0f);
    if (!last) prev = b.brelu("relu" + std::to_string(i), prev);
  }
  validate(b.net);
  return std::move(b.net);
}

NetworkIR make_residual(std::uint64_t seed, std::int64_t channels, std::int64_t size, bool batch_norm) {
  Builder b(seed, batch_norm);
  b.net.input = {1, size, size};
  const auto c = channels;
  b.brelu("relu0", b.conv("conv0", "input", 1, c, 3));
  // Identity skip.
  b.brelu("relu1", b.conv("conv1", "relu0", c, c, 3));
  b.conv("conv2", "relu1", c, c, 3, 1.0f);
  b.brelu("relu_add1", b.merge("add1", LayerKind::kResidualAdd, {"conv2", "relu0"}));
  // Conv skip.
  b.brelu("relu3", b.conv("conv3", "relu_add1", c, c, 3));
  b.conv("conv4", "relu3", c, c, 3, 1.0f);
  b.conv("conv5", "relu_add1", c, c, 1, 1.0f);
  b.brelu("relu_add2", b.merge("add2", LayerKind::kResidualAdd, {"conv4", "conv5"}));
  b.conv("conv_out", "relu_add2", c, 1, 3, 1.0f);
  validate(b.net);
  return std::move(b.net);
}

std::vector<TensorU8> random_images(std::uint64_t seed, std::size_t count, const Shape& chw) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<TensorU8> out;
  for (std::size_t i = 0; i < count; ++i) {
    TensorU8 t(chw);
    for (auto& v : t.data()) v = static_cast<std::uint8_t>(u(rng));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace intnet
