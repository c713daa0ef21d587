// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Conversion math: weight steps, BN folding, multiplier/shift pairs, the
// quantized BReLU fixup and ratio synchronization at merges.

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "intnet/exact.hpp"
#include "intnet/network.hpp"
#include "intnet/tensor.hpp"

namespace intnet {

Error quantization_error(const std::string& what);

struct WeightQuant {
  TensorI8 weights;
  std::vector<Ratio> delta;                // one per output channel (replicated if per-tensor)
  std::vector<std::size_t> zero_channels;  // channels whose max |W| is 0; delta is 0 there
};

// Δ = max|W| / 127 per output channel (or over the whole kernel), W_i = [W/Δ].
WeightQuant quantize_weights(const TensorF& w, bool per_channel);

// W_i = [W/Δ_c] with the given steps; Δ_c == 0 yields a zero channel. Throws
// if any |W_i| exceeds 127.
TensorI8 quantize_with_steps(const TensorF& w, std::span<const Ratio> delta);

// W_d = [W/Δ_c] * Δ_c as float32.
TensorF discretize_weights(const TensorF& w, std::span<const Ratio> delta);

struct FoldedConv {
  TensorF kernel;
  std::vector<float> bias;
};

FoldedConv fold_batchnorm(const TensorF& kernel, std::span<const float> bias, const BatchNorm& bn);

// Largest shift in [0, 31] with mul = [f * 2^shift] <= 65535. Throws if even
// shift 0 overflows or shift 31 rounds to zero.
MulShift approximate_scale(const Ratio& f);

// approximate_scale(max_int / h_ri); requires h_ri >= max_int.
MulShift derive_mul_shift(std::int64_t h_ri, std::int64_t max_int);

struct BReluFixup {
  std::int64_t h_ri = 0;
  MulShift mul_shift;
  Ratio ratio_v;
  Ratio h_f;
  std::int64_t h_i = 0;
};

BReluFixup fixup_brelu(double h_rf, const Ratio& ratio_y, std::int64_t max_int);

// h_i = [h_f * ratio_y] for h_f = max_int / (ratio_y * mul / 2^shift).
std::int64_t integer_bound(const MulShift& ms, std::int64_t max_int);

std::vector<std::int32_t> quantize_bias(std::span<const float> bias, std::span<const Ratio> ratio_y);

// Integer path: x - 128 as int8.
TensorI8 renormalize_input(const TensorU8& raw);
// Float path: (x - 128) / ratio_x as float32.
TensorF renormalize_input_float(const TensorU8& raw, const Ratio& ratio_x);

// Concat sync entry: a branch (or a channel) feeding a merge.
struct ConcatEntry {
  Ratio delta;    // 0 for an all-zero channel
  Ratio ratio_y;
  Ratio ratio_v;
};

struct ConcatSynced {
  Ratio delta;
  Ratio ratio_y;
  MulShift mul_shift;
  Ratio ratio_v;
  Ratio correction;  // delta_new / delta_old
};

// ratio_min = min ratio_V; per entry (mul, shift) approximates
// ratio_min / ratio_Y, Δ is scaled by ratio_Y*mul / (2^shift*ratio_min) and
// ratio_Y becomes ratio_min*2^shift/mul so every ratio_V equals ratio_min.
std::vector<ConcatSynced> sync_concat(std::span<const ConcatEntry> entries);

struct ResidualSync {
  MulShift rescale;          // applied to the skip operand
  Ratio shared_ratio;        // ratio of both addends after sync
  std::vector<Ratio> delta;  // adjusted steps of the last main-path conv
};

// The skip operand (ratio `skip_ratio`) is rescaled toward the smallest ratio
// of the main conv's channels; the main conv's steps are then set so every
// channel lands exactly on the rescaled skip ratio.
ResidualSync sync_residual(const Ratio& skip_ratio, const Ratio& main_ratio_x,
                           std::span<const Ratio> main_delta);

// Sets every nonzero step to the largest one so all channels share
// ratio_x / max Δ; returns the shared ratio.
Ratio equalize_channels(const Ratio& ratio_x, std::vector<Ratio>& delta);

}  // namespace intnet
