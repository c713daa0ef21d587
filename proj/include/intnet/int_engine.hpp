// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Integer-only inference. No floating-point operation runs on this path:
// convolution accumulates int8 x int8/uint8 products in int32, BReLU clamps
// in int32 and requantizes with a multiply and a rounding right shift.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "intnet/network.hpp"
#include "intnet/tensor.hpp"

namespace intnet {

struct ExecOptions {
  int threads = 1;
  // Output tiles (image, output channel) are claimed in an order shuffled by
  // this seed; 0 keeps the natural order. Results never depend on it.
  std::uint64_t schedule_seed = 0;
};

// Network input (int8), BReLU/concat output (uint8) or accumulator (int32).
using IntActivation = std::variant<TensorI8, TensorU8, TensorI32>;

struct IntTrace {
  std::string layer;
  IntActivation values;
};

struct IntResult {
  TensorI32 output;
  Ratio output_ratio;
  std::vector<IntTrace> trace;  // every layer output when requested
};

// NCHW input, OIHW kernel; the accumulator starts from bias[o] (or 0).
TensorI32 conv2d_i8(const TensorI8& x, const TensorI8& w, int stride, int pad,
                    std::span<const std::int32_t> bias = {}, const ExecOptions& opts = {});
TensorI32 conv2d_i8(const TensorU8& x, const TensorI8& w, int stride, int pad,
                    std::span<const std::int32_t> bias = {}, const ExecOptions& opts = {});

// round(clamp(y, 0, h_i) * mul / 2^shift) as (y' * mul + 2^(shift-1)) >> shift.
inline std::int32_t requant_value(std::int32_t y, std::int32_t h_i, const MulShift& ms) {
  const std::int64_t c = y < 0 ? 0 : (y > h_i ? h_i : y);
  const std::int64_t half = ms.shift > 0 ? (std::int64_t{1} << (ms.shift - 1)) : 0;
  return static_cast<std::int32_t>((c * ms.mul + half) >> ms.shift);
}

// Signed value times mul / 2^shift, ties away from zero, saturated to int32.
inline std::int32_t rescale_value(std::int64_t v, const MulShift& ms) {
  const std::int64_t half = ms.shift > 0 ? (std::int64_t{1} << (ms.shift - 1)) : 0;
  const std::int64_t mag = ((v < 0 ? -v : v) * ms.mul + half) >> ms.shift;
  const std::int64_t r = v < 0 ? -mag : mag;
  constexpr std::int64_t lo = INT32_MIN, hi = INT32_MAX;
  return static_cast<std::int32_t>(r < lo ? lo : (r > hi ? hi : r));
}

// Per-channel clamp bound and requantization; single entries broadcast.
TensorU8 brelu_requant(const TensorI32& y, std::span<const std::int32_t> h_i,
                       std::span<const MulShift> ms);

TensorI32 rescale_i32(const IntActivation& x, const MulShift& ms);

// a + rescale(b) elementwise, saturated to int32. Without `skip_rescale`
// the operands are added as they are.
TensorI32 residual_add_i32(const TensorI32& a, const TensorI32& b,
                           const MulShift* skip_rescale = nullptr);

TensorU8 concat_i8(std::span<const TensorU8* const> inputs);

// `raw` is CHW or NCHW uint8; it is re-normalized to int8 (x - 128) first.
IntResult forward_int(const IntegerModel& model, const TensorU8& raw, const ExecOptions& opts = {},
                      bool record_trace = false);

// Output ratio of every layer (0 for a conv whose channels do not share one),
// derived from the model's quant records.
std::vector<Ratio> activation_ratios(const IntegerModel& model);

// Structure, value ranges, the BReLU anchor round(h_i*mul/2^shift) == max_int,
// the int32 accumulation bound and ratio equality at merges. Throws
// ValidationError naming the layer.
void validate_integer_model(const IntegerModel& model);

Tensor<std::int32_t> widen(const IntActivation& a);

}  // namespace intnet
