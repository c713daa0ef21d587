// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/compare.hpp"

#include <cmath>
#include <limits>

#include "intnet/float_engine.hpp"
#include "intnet/quantizer.hpp"

namespace intnet {

void ErrorStats::add(std::span<const float> reference, std::span<const float> test) {
  if (reference.size() != test.size()) throw shape_error("compared outputs differ in size");
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i];
    const double d = std::abs(r - static_cast<double>(test[i]));
    sum_abs_ += d;
    sum_sq_ += d * d;
    max_abs_ = std::max(max_abs_, d);
    max_ref_ = std::max(max_ref_, std::abs(r));
  }
  count_ += reference.size();
}

void ErrorStats::add(std::span<const double> reference, std::span<const double> test) {
  if (reference.size() != test.size()) throw shape_error("compared outputs differ in size");
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = std::abs(reference[i] - test[i]);
    sum_abs_ += d;
    sum_sq_ += d * d;
    max_abs_ = std::max(max_abs_, d);
    max_ref_ = std::max(max_ref_, std::abs(reference[i]));
  }
  count_ += reference.size();
}

double psnr(double mse, double peak) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

Comparison ErrorStats::finish(double peak) const {
  Comparison c;
  c.count = count_;
  if (count_ == 0) return c;
  c.max_abs = max_abs_;
  c.mean_abs = sum_abs_ / static_cast<double>(count_);
  c.mse = sum_sq_ / static_cast<double>(count_);
  c.peak = peak;
  c.psnr = psnr(c.mse, peak);
  return c;
}

Comparison compare_outputs(std::span<const float> reference, std::span<const float> test, double peak) {
  ErrorStats s;
  s.add(reference, test);
  return s.finish(peak);
}

TensorF dequantize(const TensorI32& values, const Ratio& ratio) {
  if (ratio <= 0) throw invalid_argument("ratio must be positive");
  const double inv = to_double(1 / ratio);
  TensorF out(values.shape());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i] * inv);
  return out;
}

Comparison compare_models(const NetworkIR& float_net, const IntegerModel& model,
                          std::span<const TensorU8> inputs, CompareMode mode, const ExecOptions& opts) {
  if (float_net.input != model.input) throw shape_error("float and integer models take different inputs");
  if (inputs.empty()) throw invalid_argument("no inputs to compare on");
  ErrorStats stats;
  const double ratio = to_double(model.output_ratio);
  const double inv = to_double(1 / model.output_ratio);
  for (const auto& raw : inputs) {
    const TensorF ref = forward_f32(float_net, renormalize_input_float(raw, float_net.input_ratio)).output;
    const IntResult res = forward_int(model, raw, opts);
    if (ref.size() != res.output.size()) throw shape_error("float and integer outputs differ in shape");
    std::vector<double> r(ref.size()), t(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (mode == CompareMode::kRegress) {
        r[i] = ref[i];
        t[i] = res.output[i] * inv;
      } else {
        r[i] = ref[i] * ratio;
        t[i] = res.output[i];
      }
    }
    stats.add(std::span<const double>(r), std::span<const double>(t));
  }
  const double peak = mode == CompareMode::kRegress ? 255.0 / to_double(float_net.input_ratio)
                                                    : stats.max_abs_reference();
  return stats.finish(peak);
}

}  // namespace intnet
