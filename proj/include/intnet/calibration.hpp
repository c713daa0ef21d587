// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// BReLU upper-bound calibration: the n-sigma quantile rule over data batches,
// or a geometric progression between fixed input and output ranges.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "intnet/network.hpp"
#include "intnet/tensor.hpp"

namespace intnet {

// One-sided standard normal tail beyond n, 1 - Phi(n).
double tail_fraction(double n);

// Ascending-order rank (1-based) of the (1 - tail)-quantile among `count`
// values: ceil((1 - tail) * count) clamped to [1, count].
std::size_t quantile_rank(std::size_t count, double tail);

// Empirical (1 - tail_fraction(n))-quantile of the values.
float quantile_bound(std::span<const float> values, double n);
float batch_quantile_bound(const TensorF& feature_map, double n);

struct CalibrationStats {
  std::string layer;  // BReLU id
  double n = 0.0;
  double tail_fraction = 0.0;
  std::vector<double> batch_quantiles;
  int depth = 0;      // geometric method: conv depth of the BReLU
  double h_rf = 0.0;
};

enum class CalibrationMethod { kNSigma, kGeometric };

struct CalibrationResult {
  CalibrationMethod method = CalibrationMethod::kNSigma;
  double n = 0.0;
  double a0 = 0.0, an = 0.0;  // geometric only
  int n_layers = 0;           // geometric only
  std::vector<CalibrationStats> layers;

  const CalibrationStats* find(std::string_view brelu_id) const;
  // Throws a calibration error naming the layer when absent.
  double h_rf(std::string_view brelu_id) const;
};

// Runs every batch through the float net and averages the per-batch quantile
// of each BReLU's input. Throws if a bound would be non-positive.
CalibrationResult calibrate_nsigma(const NetworkIR& net, std::span<const TensorF> batches,
                                   double n);

// a_i = an^(i/n) * a0^((n-i)/n) for i = 1..n-1.
std::vector<double> geometric_progression_bounds(double a0, double an, int n_layers);

// Number of convs on the longest path from the input to each layer (inclusive).
std::vector<int> conv_depths(const NetworkIR& net);

// BReLU at conv depth i gets a_i; a BReLU at the full depth gets a_n.
CalibrationResult calibrate_geometric(const NetworkIR& net, double a0, double an);

// Largest |output| of the float net over the batches, a practical a_n.
double scan_output_range(const NetworkIR& net, std::span<const TensorF> batches);

std::string format_calibration(const CalibrationResult& calib);
CalibrationResult parse_calibration(const std::string& text);
void save_calibration(const CalibrationResult& calib, const std::string& path);
CalibrationResult load_calibration(const std::string& path);

}  // namespace intnet
