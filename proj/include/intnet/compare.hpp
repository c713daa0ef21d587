// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Float vs integer output comparison.

#pragma once

#include <span>
#include <vector>

#include "intnet/int_engine.hpp"
#include "intnet/network.hpp"
#include "intnet/tensor.hpp"

namespace intnet {

enum class CompareMode {
  kClassify,  // ignore the output ratio: compare in integer units, peak = max |reference|
  kRegress,   // rescale by the output ratio: compare in float units, peak = 255 / ratio_X
};

struct Comparison {
  std::size_t count = 0;
  double max_abs = 0.0;
  double mean_abs = 0.0;
  double mse = 0.0;
  double peak = 0.0;
  double psnr = 0.0;  // +inf when identical
};

// Accumulates element errors over several outputs.
class ErrorStats {
 public:
  void add(std::span<const float> reference, std::span<const float> test);
  void add(std::span<const double> reference, std::span<const double> test);
  Comparison finish(double peak) const;
  double max_abs_reference() const { return max_ref_; }

 private:
  std::size_t count_ = 0;
  double sum_abs_ = 0.0, sum_sq_ = 0.0, max_abs_ = 0.0, max_ref_ = 0.0;
};

Comparison compare_outputs(std::span<const float> reference, std::span<const float> test, double peak);

double psnr(double mse, double peak);

TensorF dequantize(const TensorI32& values, const Ratio& ratio);

// Runs both engines on every raw input and compares the outputs.
Comparison compare_models(const NetworkIR& float_net, const IntegerModel& model,
                          std::span<const TensorU8> inputs, CompareMode mode,
                          const ExecOptions& opts = {});

}  // namespace intnet
