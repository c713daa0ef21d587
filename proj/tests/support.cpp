// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

namespace testing {

using intnet::LayerKind;
using intnet::LayerSpec;
using intnet::NetworkIR;

namespace {

struct Builder {
  Rng& rng;
  NetworkIR net;
  bool allow_bn;
  int counter = 0;

  std::string fresh(const char* stem) { return stem + std::to_string(counter++); }

  std::string conv(const std::string& in, std::int64_t in_c, std::int64_t out_c, int k, int stride,
                   bool bn) {
    LayerSpec l;
    l.id = fresh("conv");
    l.kind = LayerKind::kConv2d;
    l.inputs = {in};
    l.conv.kernel = random_floats(rng, {out_c, in_c, k, k}, std::sqrt(2.0 / double(in_c * k * k)));
    l.conv.bias.resize(static_cast<std::size_t>(out_c));
    for (auto& b : l.conv.bias) b = static_cast<float>(rng.normal(0.05, 0.05));
    l.conv.stride = stride;
    l.conv.pad = k / 2;
    if (bn) {
      intnet::BatchNorm n;
      for (std::int64_t c = 0; c < out_c; ++c) {
        n.gamma.push_back(static_cast<float>(rng.real(0.5, 1.5)));
        n.beta.push_back(static_cast<float>(rng.normal(0.1, 0.05)));
        n.mean.push_back(static_cast<float>(rng.normal(0.0, 0.05)));
        n.var.push_back(static_cast<float>(rng.real(0.5, 1.5)));
      }
      l.conv.bn = std::move(n);
    }
    net.layers.push_back(std::move(l));
    return net.layers.back().id;
  }

  std::string node(LayerKind kind, const char* stem, std::vector<std::string> inputs) {
    LayerSpec l;
    l.id = fresh(stem);
    l.kind = kind;
    l.inputs = std::move(inputs);
    net.layers.push_back(std::move(l));
    return net.layers.back().id;
  }

  std::string brelu(const std::string& in) { return node(LayerKind::kBRelu, "relu", {in}); }
  bool bn() { return allow_bn && rng.coin(0.4); }
  int kernel() { return static_cast<int>(rng.pick(std::vector<std::int64_t>{1, 3, 5})); }
};

}  // namespace

NetworkIR random_network(Rng& rng, bool allow_bn) {
  Builder b{rng, {}, allow_bn};
  const std::int64_t in_c = rng.uniform(1, 3);
  std::int64_t size = rng.uniform(6, 12);
  b.net.input = {in_c, size, size};
  b.net.input_ratio = rng.coin() ? intnet::Ratio(256) : intnet::Ratio(128);

  std::int64_t c = rng.uniform(2, 6);
  int stride = size >= 10 && rng.coin(0.3) ? 2 : 1;
  std::string cur = b.brelu(b.conv("input", in_c, c, b.kernel(), stride, b.bn()));
  if (stride == 2) size = (size - 1) / 2 + 1;

  const int blocks = static_cast<int>(rng.uniform(1, 3));
  for (int i = 0; i < blocks; ++i) {
    switch (rng.uniform(0, 2)) {
      case 0: {
        const std::int64_t oc = rng.uniform(2, 6);
        cur = b.brelu(b.conv(cur, c, oc, b.kernel(), 1, b.bn()));
        c = oc;
        break;
      }
      case 1: {
        std::vector<std::string> parts;
        std::int64_t total = 0;
        const int branches = static_cast<int>(rng.uniform(2, 3));
        for (int j = 0; j < branches; ++j) {
          const std::int64_t oc = rng.uniform(1, 4);
          parts.push_back(b.brelu(b.conv(cur, c, oc, b.kernel(), 1, b.bn())));
          total += oc;
        }
        cur = b.node(LayerKind::kConcat, "cat", parts);
        c = total;
        break;
      }
      default: {
        const bool conv_skip = rng.coin();
        const std::int64_t oc = conv_skip ? rng.uniform(2, 6) : c;
        const std::int64_t mid = rng.uniform(2, 6);
        const auto a = b.brelu(b.conv(cur, c, mid, b.kernel(), 1, b.bn()));
        const auto main = b.conv(a, mid, oc, b.kernel(), 1, b.bn());
        const auto skip = conv_skip ? b.conv(cur, c, oc, 1, 1, b.bn()) : cur;
        cur = b.brelu(b.node(LayerKind::kResidualAdd, "add", {main, skip}));
        c = oc;
        break;
      }
    }
  }
  b.conv(cur, c, rng.uniform(1, 2), 3, 1, false);
  return std::move(b.net);
}

}  // namespace testing
