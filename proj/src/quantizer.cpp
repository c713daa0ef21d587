// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/quantizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace intnet {

Error quantization_error(const std::string& what) { return Error(ErrorCode::kQuantization, what); }

namespace {

// [w / delta] exactly. The double estimate decides unless it lands within a
// hair of a rounding tie.
std::int64_t round_ratio(float w, const Ratio& delta, double delta_d) {
  const double q = static_cast<double>(w) / delta_d;
  const double frac = std::abs(q - std::trunc(q));
  if (std::abs(frac - 0.5) > 1e-6 && std::isfinite(q)) return std::llround(q);
  return round_to_i64(exact(w) / delta);
}

std::int64_t channel_count(const TensorF& w) {
  if (w.rank() < 1 || w.empty()) throw quantization_error("empty weight tensor");
  return w.dim(0);
}

}  // namespace

WeightQuant quantize_weights(const TensorF& w, bool per_channel) {
  const auto oc = channel_count(w);
  const auto per = static_cast<std::int64_t>(w.size()) / oc;
  WeightQuant q;
  q.delta.resize(static_cast<std::size_t>(oc));
  float whole = 0.0f;
  for (float v : w.data()) whole = std::max(whole, std::abs(v));
  if (!std::isfinite(whole)) throw quantization_error("non-finite weight");
  for (std::int64_t c = 0; c < oc; ++c) {
    float channel = 0.0f;
    for (std::int64_t i = 0; i < per; ++i) channel = std::max(channel, std::abs(w[c * per + i]));
    if (channel == 0.0f) q.zero_channels.push_back(static_cast<std::size_t>(c));
    const float maxabs = per_channel ? channel : whole;
    if (maxabs == 0.0f) continue;  // delta stays 0
    q.delta[static_cast<std::size_t>(c)] = exact(maxabs) / 127;
  }
  q.weights = quantize_with_steps(w, q.delta);
  return q;
}

TensorI8 quantize_with_steps(const TensorF& w, std::span<const Ratio> delta) {
  const auto oc = channel_count(w);
  if (static_cast<std::int64_t>(delta.size()) != oc)
    throw quantization_error("step count does not match output channels");
  const auto per = static_cast<std::int64_t>(w.size()) / oc;
  TensorI8 out(w.shape());
  for (std::int64_t c = 0; c < oc; ++c) {
    const Ratio& d = delta[static_cast<std::size_t>(c)];
    if (d < 0) throw quantization_error("negative quantization step");
    if (d == 0) continue;
    const double dd = to_double(d);
    for (std::int64_t i = 0; i < per; ++i) {
      const auto k = round_ratio(w[c * per + i], d, dd);
      if (k < -127 || k > 127)
        throw quantization_error("quantized weight " + std::to_string(k) + " in channel " +
                                 std::to_string(c) + " exceeds 127");
      out[c * per + i] = static_cast<std::int8_t>(k);
    }
  }
  return out;
}

TensorF discretize_weights(const TensorF& w, std::span<const Ratio> delta) {
  const TensorI8 q = quantize_with_steps(w, delta);
  const auto oc = w.dim(0);
  const auto per = static_cast<std::int64_t>(w.size()) / oc;
  TensorF out(w.shape());
  std::array<float, 255> lut{};
  for (std::int64_t c = 0; c < oc; ++c) {
    const Ratio& d = delta[static_cast<std::size_t>(c)];
    if (d == 0) continue;
    for (int k = -127; k <= 127; ++k) lut[k + 127] = to_float(d * k);
    for (std::int64_t i = 0; i < per; ++i) out[c * per + i] = lut[q[c * per + i] + 127];
  }
  return out;
}

FoldedConv fold_batchnorm(const TensorF& kernel, std::span<const float> bias, const BatchNorm& bn) {
  const auto oc = channel_count(kernel);
  const auto n = static_cast<std::size_t>(oc);
  if (bn.gamma.size() != n || bn.beta.size() != n || bn.mean.size() != n || bn.var.size() != n)
    throw invalid_argument("batch-norm parameter lengths do not match output channels");
  if (!bias.empty() && bias.size() != n) throw invalid_argument("bias length mismatch");
  const auto per = static_cast<std::int64_t>(kernel.size()) / oc;
  FoldedConv f{kernel, std::vector<float>(n)};
  for (std::size_t c = 0; c < n; ++c) {
    const double v = static_cast<double>(bn.var[c]) + bn.eps;
    if (!(v > 0.0))
      throw invalid_argument("channel " + std::to_string(c) + ": variance + eps is not positive");
    const double s = bn.gamma[c] / std::sqrt(v);
    for (std::int64_t i = 0; i < per; ++i) {
      float& k = f.kernel[static_cast<std::int64_t>(c) * per + i];
      k = static_cast<float>(k * s);
    }
    const double b = bias.empty() ? 0.0 : bias[c];
    f.bias[c] = static_cast<float>((b - bn.mean[c]) * s + bn.beta[c]);
  }
  return f;
}

MulShift approximate_scale(const Ratio& f) {
  if (f <= 0) throw quantization_error("scale must be positive");
  const BigInt num = boost::multiprecision::numerator(f);
  const BigInt den = boost::multiprecision::denominator(f);
  auto mul_at = [&](int s) -> BigInt { return ((num << (s + 1)) + den) / (2 * den); };
  int s = std::clamp(static_cast<int>(std::floor(std::log2(kMaxMul / to_double(f)))), 0, kMaxShift);
  while (s < kMaxShift && mul_at(s + 1) <= kMaxMul) ++s;
  while (s > 0 && mul_at(s) > kMaxMul) --s;
  const BigInt mul = mul_at(s);
  if (mul > kMaxMul)
    throw quantization_error("scale " + to_string(f) + " exceeds the multiplier range");
  if (mul == 0) throw quantization_error("scale " + to_string(f) + " underflows shift 31");
  return MulShift{mul.convert_to<std::int32_t>(), s};
}

MulShift derive_mul_shift(std::int64_t h_ri, std::int64_t max_int) {
  if (max_int < 1) throw invalid_argument("max_int must be positive");
  if (h_ri < max_int)
    throw quantization_error("h_ri " + std::to_string(h_ri) + " is below max_int " +
                             std::to_string(max_int) + "; requantization would scale up");
  return approximate_scale(Ratio(max_int, h_ri));
}

std::int64_t integer_bound(const MulShift& ms, std::int64_t max_int) {
  return round_to_i64(Ratio(max_int) * pow2(ms.shift) / ms.mul);
}

BReluFixup fixup_brelu(double h_rf, const Ratio& ratio_y, std::int64_t max_int) {
  if (!(h_rf > 0) || !std::isfinite(h_rf)) throw invalid_argument("h_rf must be positive");
  if (ratio_y <= 0) throw invalid_argument("ratio_Y must be positive");
  BReluFixup r;
  r.h_ri = round_to_i64(exact(h_rf) * ratio_y);
  r.mul_shift = derive_mul_shift(r.h_ri, max_int);
  r.ratio_v = ratio_y * r.mul_shift.value();
  r.h_f = Ratio(max_int) / r.ratio_v;
  r.h_i = round_to_i64(r.h_f * ratio_y);
  return r;
}

std::vector<std::int32_t> quantize_bias(std::span<const float> bias, std::span<const Ratio> ratio_y) {
  if (bias.size() != ratio_y.size()) throw invalid_argument("bias and ratio counts differ");
  std::vector<std::int32_t> out(bias.size());
  for (std::size_t c = 0; c < bias.size(); ++c) {
    if (ratio_y[c] <= 0) throw invalid_argument("ratio_Y must be positive");
    const BigInt v = round_half_away(exact(bias[c]) * ratio_y[c]);
    if (v > std::numeric_limits<std::int32_t>::max() || v < std::numeric_limits<std::int32_t>::min())
      throw quantization_error("bias of channel " + std::to_string(c) + " overflows int32");
    out[c] = v.convert_to<std::int32_t>();
  }
  return out;
}

TensorI8 renormalize_input(const TensorU8& raw) {
  TensorI8 out(raw.shape());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<std::int8_t>(raw[i] - 128);
  return out;
}

TensorF renormalize_input_float(const TensorU8& raw, const Ratio& ratio_x) {
  if (ratio_x <= 0) throw invalid_argument("ratio_X must be positive");
  std::array<float, 256> lut{};
  for (int v = 0; v < 256; ++v) lut[v] = to_float(Ratio(v - 128) / ratio_x);
  TensorF out(raw.shape());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = lut[raw[i]];
  return out;
}

std::vector<ConcatSynced> sync_concat(std::span<const ConcatEntry> entries) {
  if (entries.empty()) throw invalid_argument("sync_concat needs at least one entry");
  Ratio ratio_min = entries[0].ratio_v;
  for (const auto& e : entries) {
    if (e.ratio_v <= 0 || e.ratio_y <= 0) throw invalid_argument("ratios must be positive");
    ratio_min = std::min(ratio_min, e.ratio_v);
  }
  std::vector<ConcatSynced> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    ConcatSynced s;
    s.mul_shift = approximate_scale(ratio_min / e.ratio_y);
    s.correction = e.ratio_y * s.mul_shift.value() / ratio_min;
    s.delta = e.delta * s.correction;
    s.ratio_y = ratio_min / s.mul_shift.value();
    s.ratio_v = ratio_min;
    out.push_back(std::move(s));
  }
  return out;
}

ResidualSync sync_residual(const Ratio& skip_ratio, const Ratio& main_ratio_x,
                           std::span<const Ratio> main_delta) {
  if (skip_ratio <= 0 || main_ratio_x <= 0) throw invalid_argument("ratios must be positive");
  Ratio max_delta = 0;
  for (const auto& d : main_delta) max_delta = std::max(max_delta, d);
  const Ratio main_ratio = max_delta == 0 ? skip_ratio : main_ratio_x / max_delta;
  ResidualSync r;
  r.rescale = approximate_scale(main_ratio / skip_ratio);
  r.shared_ratio = skip_ratio * r.rescale.value();
  for (const auto& d : main_delta) r.delta.push_back(d == 0 ? Ratio(0) : main_ratio_x / r.shared_ratio);
  return r;
}

Ratio equalize_channels(const Ratio& ratio_x, std::vector<Ratio>& delta) {
  Ratio max_delta = 0;
  for (const auto& d : delta) max_delta = std::max(max_delta, d);
  if (max_delta == 0) return ratio_x;
  for (auto& d : delta)
    if (d != 0) d = max_delta;
  return ratio_x / max_delta;
}

}  // namespace intnet
