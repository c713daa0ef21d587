// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Float network -> integer model conversion.
//
// Supported topology: every conv reads one activation (the network input, a
// BReLU, a concat or a skip rescale) and feeds exactly one of
//   - a BReLU,
//   - a residual-add as its first operand (main path) or second operand (conv skip),
//   - nothing (the sink; its output stays a signed 32-bit map).
// Concat inputs are BReLUs of convs with the concat as their only consumer.
// A BReLU reads a conv or a residual-add.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "intnet/calibration.hpp"
#include "intnet/network.hpp"

namespace intnet {

enum class FinetuneStage { kAfterRenormalize, kAfterDiscretize, kAfterBRelu };

const char* to_string(FinetuneStage stage);

struct PipelineConfig {
  int bits = 7;  // activation bit depth, max_int = 2^bits - 1
  double n = 3.0;
  double n_step = 0.5;
  double n_cap = 6.0;
  std::optional<bool> per_channel;  // default: per-channel steps iff the conv carries BN
  Ratio input_ratio = 0;            // 0 keeps the network's ratio_X

  // Recomputes bounds for the current n on the discretized float network.
  // Without it the supplied calibration is used and the loop runs once.
  std::function<CalibrationResult(const NetworkIR&, double n)> recalibrate;
  // Task metric of a candidate (higher is better). The loop stops once
  // metric >= baseline - threshold.
  std::function<double(const struct ConversionResult&)> metric;
  double baseline = 0.0;
  double threshold = 0.0;
  // Training is out of scope; the hook receives the working float network.
  std::function<void(FinetuneStage, NetworkIR&)> finetune;

  std::int32_t max_int() const;
};

enum class SyncKind { kChannels, kConcat, kResidual };

const char* to_string(SyncKind kind);

struct SyncEvent {
  SyncKind kind = SyncKind::kChannels;
  std::string layer;                // BReLU (channels), concat or residual-add id
  std::vector<std::string> inputs;  // merged producers
  std::vector<Ratio> before;        // ratio of each input before sync
  Ratio ratio;                      // shared ratio after sync
  std::vector<MulShift> mul_shift;  // per input (concat) or the skip rescale (residual)
  int residual_type = 0;            // 1 identity skip, 2 conv skip
};

struct PruneCandidate {
  std::string layer;
  std::size_t channel = 0;
};

struct ConversionResult {
  IntegerModel model;
  NetworkIR float_net;  // BN folded, discretized weights, fixed-up BReLU bounds
  CalibrationResult calibration;
  std::vector<SyncEvent> events;
  std::vector<PruneCandidate> prune_candidates;
  std::vector<std::string> warnings;
  double n_used = 0.0;
  std::optional<double> metric_value;
  bool threshold_met = true;
};

// Checks the topology rules above; throws ValidationError naming the layer.
void check_convertible(const NetworkIR& net);

ConversionResult convert_network(const NetworkIR& net, const CalibrationResult& calib,
                                 const PipelineConfig& cfg);

// Key-value text report of a conversion.
std::string conversion_report(const ConversionResult& result, const PipelineConfig& cfg);

}  // namespace intnet
