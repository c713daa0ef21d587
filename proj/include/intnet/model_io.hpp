// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// `.fnet` / `.inet` model files.
//
// A text header (one record per line, `key=value` tokens) followed by binary
// tensor blobs in layer order:
//
//   intnet-model 1
//   kind float|int
//   input 1x64x64 ratio_x=256
//   max_int 127                        (int only)
//   output_ratio <rational>            (int only)
//   layer <id> <kind> in=<a,b> ...     (hyperparameters)
//   quant <id> ...                     (int only, one per QuantRecord)
//   end <payload bytes>
//
// Per conv layer the payload holds the kernel blob, the bias blob and, for a
// float conv carrying batch norm, gamma/beta/mean/var blobs. Reals in the
// header use the shortest round-trip decimal form, ratios are exact "p/q".

#pragma once

#include <cstddef>
#include <string>

#include "intnet/network.hpp"

namespace intnet {

enum class ModelKind { kFloat, kInt };

std::string serialize(const NetworkIR& net);
std::string serialize(const IntegerModel& model);

NetworkIR parse_network(const std::string& bytes);
IntegerModel parse_integer_model(const std::string& bytes);
ModelKind peek_model_kind(const std::string& bytes);

void save_model(const NetworkIR& net, const std::string& path);
void save_model(const IntegerModel& model, const std::string& path);
NetworkIR load_model(const std::string& path);
IntegerModel load_integer_model(const std::string& path);
ModelKind model_file_kind(const std::string& path);

// Byte accounting of a serialized model.
struct PayloadStats {
  std::size_t total = 0;
  std::size_t weight_bytes = 0;  // kernel elements only
  std::size_t bias_bytes = 0;    // bias elements only
  std::size_t metadata() const { return total - weight_bytes - bias_bytes; }
};

PayloadStats payload_stats(const NetworkIR& net);
PayloadStats payload_stats(const IntegerModel& model);

}  // namespace intnet
