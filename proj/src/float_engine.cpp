// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/float_engine.hpp"

#include <algorithm>
#include <cmath>

namespace intnet {

namespace {

TensorF as_batch(const TensorF& t) {
  if (t.rank() == 4) return t;
  if (t.rank() == 3) {
    Shape s{1, t.dim(0), t.dim(1), t.dim(2)};
    return TensorF(s, std::vector<float>(t.data().begin(), t.data().end()));
  }
  throw shape_error("expected a CHW or NCHW tensor, got " + shape_string(t.shape()));
}

// Output columns [lo, hi) whose input column ox*stride - pad + k lies inside [0, w).
void valid_range(std::int64_t out, std::int64_t in, int stride, int pad, std::int64_t k,
                 std::int64_t& lo, std::int64_t& hi) {
  lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= in) --hi;
}

}  // namespace

TensorF conv2d_f32(const TensorF& input, const TensorF& kernel, std::span<const float> bias,
                   int stride, int pad) {
  if (input.rank() != 4 || kernel.rank() != 4)
    throw shape_error("conv2d_f32 expects NCHW input and OIHW kernel");
  if (stride < 1 || pad < 0) throw shape_error("invalid stride/padding");
  const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto oc = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c)
    throw shape_error("kernel " + shape_string(kernel.shape()) + " does not match input " +
                      shape_string(input.shape()));
  if (!bias.empty() && static_cast<std::int64_t>(bias.size()) != oc)
    throw shape_error("bias length does not match output channels");
  if (h + 2 * pad < kh || w + 2 * pad < kw) throw shape_error("kernel larger than padded input");
  const auto oh = (h + 2 * pad - kh) / stride + 1;
  const auto ow = (w + 2 * pad - kw) / stride + 1;
  TensorF out({n, oc, oh, ow});

  std::vector<std::int64_t> x_lo(kw), x_hi(kw), y_lo(kh), y_hi(kh);
  for (std::int64_t k = 0; k < kw; ++k) valid_range(ow, w, stride, pad, k, x_lo[k], x_hi[k]);
  for (std::int64_t k = 0; k < kh; ++k) valid_range(oh, h, stride, pad, k, y_lo[k], y_hi[k]);

  const float* in = input.data().data();
  const float* wt = kernel.data().data();
  float* dst = out.data().data();
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t o = 0; o < oc; ++o) {
      float* plane = dst + (b * oc + o) * oh * ow;
      for (std::int64_t i = 0; i < c; ++i) {
        const float* src = in + (b * c + i) * h * w;
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const float wv = wt[((o * c + i) * kh + ky) * kw + kx];
            for (std::int64_t oy = y_lo[ky]; oy < y_hi[ky]; ++oy) {
              const float* row = src + (oy * stride - pad + ky) * w - pad + kx;
              float* orow = plane + oy * ow;
              for (std::int64_t ox = x_lo[kx]; ox < x_hi[kx]; ++ox) orow[ox] += row[ox * stride] * wv;
            }
          }
        }
      }
      if (!bias.empty()) {
        const float bv = bias[static_cast<std::size_t>(o)];
        for (std::int64_t p = 0; p < oh * ow; ++p) plane[p] += bv;
      }
    }
  }
  return out;
}

TensorF brelu_f32(const TensorF& x, float l, float h) {
  if (!(l < h)) throw invalid_argument("BReLU needs l < h");
  TensorF out = x;
  for (auto& v : out.data()) v = std::min(std::max(v, l), h);
  return out;
}

TensorF batchnorm_f32(const TensorF& x, const BatchNorm& bn) {
  if (x.rank() != 4 || static_cast<std::int64_t>(bn.gamma.size()) != x.dim(1))
    throw shape_error("batch norm channel count does not match input");
  TensorF out = x;
  const auto n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const auto k = static_cast<std::size_t>(ch);
    const float s = bn.gamma[k] / std::sqrt(bn.var[k] + bn.eps);
    for (std::int64_t b = 0; b < n; ++b) {
      float* p = out.data().data() + (b * c + ch) * plane;
      for (std::int64_t i = 0; i < plane; ++i) p[i] = (p[i] - bn.mean[k]) * s + bn.beta[k];
    }
  }
  return out;
}

FloatResult forward_f32(const NetworkIR& net, const TensorF& input, bool record_taps) {
  const auto nodes = graph_view(net);
  const auto order = topo_indices(nodes);
  const TensorF x = as_batch(input);
  if (Shape(x.shape().begin() + 1, x.shape().end()) != net.input)
    throw shape_error("input " + shape_string(x.shape()) + " does not match model input " +
                      shape_string(net.input));

  std::vector<TensorF> outs(net.layers.size());
  std::vector<int> remaining(net.layers.size(), 0);
  const auto consumers = consumers_of(nodes);
  for (std::size_t i = 0; i < consumers.size(); ++i)
    remaining[i] = static_cast<int>(consumers[i].size());

  auto fetch = [&](const std::string& id) -> const TensorF& {
    return id == kInputId ? x : outs[net.index_of(id)];
  };

  FloatResult result;
  const std::size_t sink = sink_index(nodes);
  for (auto idx : order) {
    const auto& l = net.layers[idx];
    TensorF y;
    switch (l.kind) {
      case LayerKind::kConv2d:
        y = conv2d_f32(fetch(l.inputs[0]), l.conv.kernel, l.conv.bias, l.conv.stride, l.conv.pad);
        if (l.conv.bn) y = batchnorm_f32(y, *l.conv.bn);
        break;
      case LayerKind::kBRelu:
        y = brelu_f32(fetch(l.inputs[0]), 0.0f, l.h);
        break;
      case LayerKind::kRescale:
        y = fetch(l.inputs[0]);
        break;
      case LayerKind::kResidualAdd: {
        y = fetch(l.inputs[0]);
        const TensorF& b = fetch(l.inputs[1]);
        if (b.shape() != y.shape()) throw shape_error("residual-add operands differ in shape");
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
        break;
      }
      case LayerKind::kConcat: {
        std::vector<const TensorF*> parts;
        for (const auto& in : l.inputs) parts.push_back(&fetch(in));
        y = concat_channels<float>(parts);
        break;
      }
    }
    if (record_taps) result.taps.push_back({l.id, y});
    outs[idx] = std::move(y);
    // Free producers nobody else reads.
    std::vector<std::string> ins = l.inputs;
    std::sort(ins.begin(), ins.end());
    ins.erase(std::unique(ins.begin(), ins.end()), ins.end());
    for (const auto& in : ins) {
      if (in == kInputId) continue;
      const auto j = net.index_of(in);
      if (--remaining[j] == 0 && j != sink) outs[j] = TensorF();
    }
  }
  result.output = std::move(outs[sink]);
  return result;
}

const TensorF& brelu_input_tap(const NetworkIR& net, const FloatResult& result,
                               std::string_view brelu_id) {
  const auto& l = net.layer(brelu_id);
  if (l.kind != LayerKind::kBRelu) throw ValidationError(l.id, "not a BReLU layer");
  const auto& src = l.inputs.at(0);
  for (const auto& t : result.taps)
    if (t.layer == src) return t.values;
  throw ValidationError(l.id, "no recorded tap for input '" + src + "'");
}

}  // namespace intnet
