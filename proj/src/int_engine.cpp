// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/int_engine.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <thread>

#include "intnet/quantizer.hpp"

namespace intnet {

namespace {

template <typename Fn>
void parallel_for(std::size_t count, const ExecOptions& opts, Fn&& fn) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (opts.schedule_seed != 0) {
    std::mt19937_64 rng(opts.schedule_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  const auto threads = static_cast<std::size_t>(std::max(1, opts.threads));
  if (threads == 1 || count < 2) {
    for (auto i : order) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1, std::memory_order_relaxed);
      if (k >= count) return;
      fn(order[k]);
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  worker();
}

void valid_range(std::int64_t out, std::int64_t in, int stride, int pad, std::int64_t k,
                 std::int64_t& lo, std::int64_t& hi) {
  lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= in) --hi;
}

template <typename T>
TensorI32 conv_impl(const Tensor<T>& x, const TensorI8& w, int stride, int pad,
                    std::span<const std::int32_t> bias, const ExecOptions& opts) {
  if (x.rank() != 4 || w.rank() != 4) throw shape_error("conv2d_i8 expects NCHW input and OIHW kernel");
  if (stride < 1 || pad < 0) throw shape_error("invalid stride/padding");
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != c)
    throw shape_error("kernel " + shape_string(w.shape()) + " does not match input " +
                      shape_string(x.shape()));
  if (!bias.empty() && static_cast<std::int64_t>(bias.size()) != oc)
    throw shape_error("bias length does not match output channels");
  if (h + 2 * pad < kh || wd + 2 * pad < kw) throw shape_error("kernel larger than padded input");
  const auto oh = (h + 2 * pad - kh) / stride + 1;
  const auto ow = (wd + 2 * pad - kw) / stride + 1;
  TensorI32 out({n, oc, oh, ow});

  std::vector<std::int64_t> x_lo(kw), x_hi(kw), y_lo(kh), y_hi(kh);
  for (std::int64_t k = 0; k < kw; ++k) valid_range(ow, wd, stride, pad, k, x_lo[k], x_hi[k]);
  for (std::int64_t k = 0; k < kh; ++k) valid_range(oh, h, stride, pad, k, y_lo[k], y_hi[k]);

  const T* in = x.data().data();
  const std::int8_t* wt = w.data().data();
  std::int32_t* dst = out.data().data();
  parallel_for(static_cast<std::size_t>(n * oc), opts, [&](std::size_t tile) {
    const auto b = static_cast<std::int64_t>(tile) / oc;
    const auto o = static_cast<std::int64_t>(tile) % oc;
    std::int32_t* plane = dst + (b * oc + o) * oh * ow;
    const std::int32_t init = bias.empty() ? 0 : bias[static_cast<std::size_t>(o)];
    std::fill(plane, plane + oh * ow, init);
    for (std::int64_t i = 0; i < c; ++i) {
      const T* src = in + (b * c + i) * h * wd;
      for (std::int64_t ky = 0; ky < kh; ++ky) {
        for (std::int64_t kx = 0; kx < kw; ++kx) {
          const std::int32_t wv = wt[((o * c + i) * kh + ky) * kw + kx];
          if (wv == 0) continue;
          for (std::int64_t oy = y_lo[ky]; oy < y_hi[ky]; ++oy) {
            const T* row = src + (oy * stride - pad + ky) * wd - pad + kx;
            std::int32_t* orow = plane + oy * ow;
            if (stride == 1) {
              for (std::int64_t ox = x_lo[kx]; ox < x_hi[kx]; ++ox)
                orow[ox] += static_cast<std::int32_t>(row[ox]) * wv;
            } else {
              for (std::int64_t ox = x_lo[kx]; ox < x_hi[kx]; ++ox)
                orow[ox] += static_cast<std::int32_t>(row[ox * stride]) * wv;
            }
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> as_batch(const Tensor<T>& t) {
  if (t.rank() == 4) return t;
  if (t.rank() == 3)
    return Tensor<T>({1, t.dim(0), t.dim(1), t.dim(2)}, std::vector<T>(t.data().begin(), t.data().end()));
  throw shape_error("expected a CHW or NCHW tensor, got " + shape_string(t.shape()));
}

const char* kind_name(const IntActivation& a) {
  return std::visit([](const auto& t) { return to_string(std::decay_t<decltype(t)>::kind); }, a);
}

}  // namespace

TensorI32 conv2d_i8(const TensorI8& x, const TensorI8& w, int stride, int pad,
                    std::span<const std::int32_t> bias, const ExecOptions& opts) {
  return conv_impl(x, w, stride, pad, bias, opts);
}

TensorI32 conv2d_i8(const TensorU8& x, const TensorI8& w, int stride, int pad,
                    std::span<const std::int32_t> bias, const ExecOptions& opts) {
  return conv_impl(x, w, stride, pad, bias, opts);
}

TensorU8 brelu_requant(const TensorI32& y, std::span<const std::int32_t> h_i,
                       std::span<const MulShift> ms) {
  if (y.rank() != 4) throw shape_error("brelu_requant expects an NCHW tensor");
  const auto n = y.dim(0), c = y.dim(1), plane = y.dim(2) * y.dim(3);
  auto ok = [&](std::size_t len) { return len == 1 || static_cast<std::int64_t>(len) == c; };
  if (!ok(h_i.size()) || !ok(ms.size())) throw shape_error("requantization parameters do not match channels");
  TensorU8 out(y.shape());
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto hc = h_i[h_i.size() == 1 ? 0 : static_cast<std::size_t>(ch)];
      const auto& m = ms[ms.size() == 1 ? 0 : static_cast<std::size_t>(ch)];
      const std::int32_t* src = y.data().data() + (b * c + ch) * plane;
      std::uint8_t* dst = out.data().data() + (b * c + ch) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] = static_cast<std::uint8_t>(requant_value(src[i], hc, m));
    }
  }
  return out;
}

TensorI32 rescale_i32(const IntActivation& x, const MulShift& ms) {
  return std::visit(
      [&](const auto& t) {
        TensorI32 out(t.shape());
        for (std::size_t i = 0; i < t.size(); ++i) out[i] = rescale_value(t[i], ms);
        return out;
      },
      x);
}

TensorI32 residual_add_i32(const TensorI32& a, const TensorI32& b, const MulShift* skip_rescale) {
  if (a.shape() != b.shape())
    throw shape_error("residual-add operands differ: " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  TensorI32 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::int64_t s = skip_rescale ? rescale_value(b[i], *skip_rescale) : b[i];
    const std::int64_t v = a[i] + s;
    out[i] = static_cast<std::int32_t>(std::clamp<std::int64_t>(v, INT32_MIN, INT32_MAX));
  }
  return out;
}

TensorU8 concat_i8(std::span<const TensorU8* const> inputs) {
  if (inputs.size() == 1) return *inputs[0];
  return concat_channels<std::uint8_t>(inputs);
}

Tensor<std::int32_t> widen(const IntActivation& a) {
  return std::visit([](const auto& t) { return convert<std::int32_t>(t); }, a);
}

IntResult forward_int(const IntegerModel& model, const TensorU8& raw, const ExecOptions& opts,
                      bool record_trace) {
  const auto nodes = graph_view(model);
  const auto order = topo_indices(nodes);
  const std::size_t sink = sink_index(nodes);
  const TensorU8 x = as_batch(raw);
  if (Shape(x.shape().begin() + 1, x.shape().end()) != model.input)
    throw shape_error("input " + shape_string(x.shape()) + " does not match model input " +
                      shape_string(model.input));
  const IntActivation input = renormalize_input(x);

  std::vector<IntActivation> outs(model.layers.size());
  auto fetch = [&](const std::string& id) -> const IntActivation& {
    return id == kInputId ? input : outs[model.index_of(id)];
  };
  auto need_i32 = [&](const IntLayer& l, const std::string& id) -> const TensorI32& {
    const auto& a = fetch(id);
    if (const auto* t = std::get_if<TensorI32>(&a)) return *t;
    throw ValidationError(l.id, std::string("expects an int32 input, '") + id + "' is " + kind_name(a));
  };

  IntResult result;
  for (auto idx : order) {
    const auto& l = model.layers[idx];
    IntActivation y;
    switch (l.kind) {
      case LayerKind::kConv2d: {
        const auto& a = fetch(l.inputs[0]);
        if (const auto* t8 = std::get_if<TensorI8>(&a))
          y = conv2d_i8(*t8, l.kernel, l.stride, l.pad, l.bias, opts);
        else if (const auto* u8 = std::get_if<TensorU8>(&a))
          y = conv2d_i8(*u8, l.kernel, l.stride, l.pad, l.bias, opts);
        else
          throw ValidationError(l.id, "conv input must be 8-bit");
        break;
      }
      case LayerKind::kBRelu:
        y = brelu_requant(need_i32(l, l.inputs[0]), l.h_i, l.requant);
        break;
      case LayerKind::kRescale:
        y = rescale_i32(fetch(l.inputs[0]), l.rescale);
        break;
      case LayerKind::kResidualAdd:
        y = residual_add_i32(need_i32(l, l.inputs[0]), need_i32(l, l.inputs[1]));
        break;
      case LayerKind::kConcat: {
        std::vector<const TensorU8*> parts;
        for (const auto& in : l.inputs) {
          const auto* t = std::get_if<TensorU8>(&fetch(in));
          if (!t) throw ValidationError(l.id, "concat input '" + in + "' is not a uint8 activation");
          parts.push_back(t);
        }
        y = concat_i8(parts);
        break;
      }
    }
    if (record_trace) result.trace.push_back({l.id, y});
    outs[idx] = std::move(y);
  }
  result.output = widen(outs[sink]);
  result.output_ratio = model.output_ratio;
  return result;
}

std::vector<Ratio> activation_ratios(const IntegerModel& model) {
  const auto nodes = graph_view(model);
  std::vector<Ratio> ratio(model.layers.size());
  auto ratio_of = [&](const std::string& id) {
    return id == kInputId ? model.input_ratio : ratio[model.index_of(id)];
  };
  for (auto idx : topo_indices(nodes)) {
    const auto& l = model.layers[idx];
    switch (l.kind) {
      case LayerKind::kConv2d: {
        const QuantRecord* r = nullptr;
        for (const auto& rec : model.records)
          if (rec.layer == l.id) r = &rec;
        if (r && r->brelu.empty() && !r->ratio_y.empty() &&
            std::all_of(r->ratio_y.begin(), r->ratio_y.end(),
                        [&](const Ratio& v) { return v == r->ratio_y.front(); }))
          ratio[idx] = r->ratio_y.front();
        break;
      }
      case LayerKind::kBRelu:
        if (const auto* r = model.record_for(l.id)) ratio[idx] = r->ratio_v;
        break;
      case LayerKind::kRescale:
        ratio[idx] = ratio_of(l.inputs[0]) * l.rescale.value();
        break;
      case LayerKind::kResidualAdd:
      case LayerKind::kConcat:
        ratio[idx] = ratio_of(l.inputs[0]);
        break;
    }
  }
  return ratio;
}

void validate_integer_model(const IntegerModel& model) {
  if (model.layers.empty()) throw ValidationError("", "model has no layers");
  if (model.max_int < 1 || model.max_int > 255) throw ValidationError("", "max_int must be in [1, 255]");
  if (model.input_ratio <= 0 || model.output_ratio <= 0)
    throw ValidationError("", "input and output ratios must be positive");
  const auto nodes = graph_view(model);
  sink_index(nodes);
  const auto shapes = infer_shapes(nodes, model.input);

  auto kind_of = [&](const std::string& id) -> std::optional<LayerKind> {
    if (id == kInputId) return std::nullopt;
    return model.layer(id).kind;
  };
  auto is_int32 = [&](const std::string& id) {
    const auto k = kind_of(id);
    return k && (*k == LayerKind::kConv2d || *k == LayerKind::kResidualAdd || *k == LayerKind::kRescale);
  };
  auto is_u8 = [&](const std::string& id) {
    const auto k = kind_of(id);
    return k && (*k == LayerKind::kBRelu || *k == LayerKind::kConcat);
  };
  auto check_ms = [](const IntLayer& l, const MulShift& ms) {
    if (ms.mul < 1 || ms.mul > kMaxMul || ms.shift < 0 || ms.shift > kMaxShift)
      throw ValidationError(l.id, "mul/shift " + std::to_string(ms.mul) + "/" +
                                      std::to_string(ms.shift) + " out of range");
  };

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const auto channels = shapes[i][0];
    switch (l.kind) {
      case LayerKind::kConv2d: {
        const auto& src = l.inputs[0];
        if (src != kInputId && !is_u8(src))
          throw ValidationError(l.id, "conv input must be the network input or a uint8 activation");
        if (static_cast<std::int64_t>(l.bias.size()) != l.kernel.dim(0))
          throw ValidationError(l.id, "bias length does not match output channels");
        for (auto w : l.kernel.data())
          if (w < -127) throw ValidationError(l.id, "weight -128 is outside the symmetric range");
        const std::int64_t count = l.kernel.dim(1) * l.kernel.dim(2) * l.kernel.dim(3);
        const std::int64_t max_in = src == kInputId ? 128 : model.max_int;
        std::int64_t max_bias = 0;
        for (auto b : l.bias) max_bias = std::max<std::int64_t>(max_bias, b < 0 ? -std::int64_t{b} : b);
        if (count * 127 * max_in + max_bias >= (std::int64_t{1} << 31))
          throw ValidationError(l.id, "int32 accumulator may overflow (" + std::to_string(count) +
                                          " products of up to 127*" + std::to_string(max_in) +
                                          " plus bias " + std::to_string(max_bias) + ")");
        break;
      }
      case LayerKind::kBRelu: {
        if (!is_int32(l.inputs[0])) throw ValidationError(l.id, "BReLU input must be an int32 map");
        auto ok = [&](std::size_t len) { return len == 1 || static_cast<std::int64_t>(len) == channels; };
        if (!ok(l.requant.size()) || !ok(l.h_i.size()))
          throw ValidationError(l.id, "requantization parameters do not match channels");
        for (std::int64_t c = 0; c < channels; ++c) {
          const auto& ms = l.requant[l.requant.size() == 1 ? 0 : static_cast<std::size_t>(c)];
          const auto h = l.h_i[l.h_i.size() == 1 ? 0 : static_cast<std::size_t>(c)];
          check_ms(l, ms);
          if (static_cast<std::int64_t>(ms.mul) > (std::int64_t{1} << ms.shift))
            throw ValidationError(l.id, "requantization must not scale up");
          if (h < model.max_int) throw ValidationError(l.id, "h_i below max_int");
          if (requant_value(h, h, ms) != model.max_int)
            throw ValidationError(l.id, "channel " + std::to_string(c) + ": h_i " + std::to_string(h) +
                                            " does not requantize to max_int");
        }
        break;
      }
      case LayerKind::kRescale:
        check_ms(l, l.rescale);
        break;
      case LayerKind::kResidualAdd:
        if (!is_int32(l.inputs[0]) || !is_int32(l.inputs[1]))
          throw ValidationError(l.id, "residual-add operands must be int32 maps");
        break;
      case LayerKind::kConcat:
        for (const auto& in : l.inputs)
          if (!is_u8(in)) throw ValidationError(l.id, "concat input '" + in + "' is not a uint8 activation");
        break;
    }
  }

  if (model.records.empty()) return;
  const auto ratio = activation_ratios(model);
  auto ratio_of = [&](const std::string& id) {
    return id == kInputId ? model.input_ratio : ratio[model.index_of(id)];
  };
  for (const auto& l : model.layers) {
    if (l.kind != LayerKind::kResidualAdd && l.kind != LayerKind::kConcat) continue;
    const Ratio first = ratio_of(l.inputs[0]);
    for (const auto& in : l.inputs)
      if (ratio_of(in) == 0 || ratio_of(in) != first)
        throw ValidationError(l.id, "merged inputs do not share one exact ratio");
  }
  for (const auto& r : model.records) {
    if (r.brelu.empty()) continue;
    for (std::size_t c = 0; c < r.ratio_y.size(); ++c)
      if (r.ratio_y[c] * r.mul_shift.at(c).value() != r.ratio_v)
        throw ValidationError(r.brelu, "ratio_V != ratio_Y * mul / 2^shift");
  }
  const auto sink = sink_index(nodes);
  if (ratio[sink] != 0 && ratio[sink] != model.output_ratio)
    throw ValidationError(model.layers[sink].id, "output ratio disagrees with the quant records");
}

}  // namespace intnet
