// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "intnet/exact.hpp"
#include "intnet/tensor.hpp"

namespace intnet {

// Reserved producer id naming the network input.
inline constexpr std::string_view kInputId = "input";

enum class LayerKind { kConv2d, kBRelu, kResidualAdd, kConcat, kRescale };

const char* to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

struct BatchNorm {
  std::vector<float> gamma, beta, mean, var;
  float eps = 1e-5f;

  friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

struct ConvParams {
  TensorF kernel;  // OIHW
  std::vector<float> bias;
  int stride = 1;
  int pad = 0;
  std::optional<BatchNorm> bn;  // applied after the conv until folded

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::kConv2d;
  std::vector<std::string> inputs;
  ConvParams conv;                                      // kConv2d
  float h = std::numeric_limits<float>::infinity();     // kBRelu upper bound; lower bound is 0

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Float32 network. Layers are kept in file order; execution uses topo_order.
struct NetworkIR {
  Shape input;           // C, H, W
  Ratio input_ratio = 1; // ratio_X of the re-normalized input
  std::vector<LayerSpec> layers;

  const LayerSpec& layer(std::string_view id) const;
  LayerSpec& layer(std::string_view id);
  std::size_t index_of(std::string_view id) const;

  friend bool operator==(const NetworkIR&, const NetworkIR&) = default;
};

// Integer multiplier and right shift approximating mul / 2^shift.
struct MulShift {
  std::int32_t mul = 1;
  std::int32_t shift = 0;

  Ratio value() const { return Ratio(mul) / pow2(shift); }
  friend bool operator==(const MulShift&, const MulShift&) = default;
};

inline constexpr std::int32_t kMaxMul = (1 << 16) - 1;
inline constexpr std::int32_t kMaxShift = 31;

struct IntLayer {
  std::string id;
  LayerKind kind = LayerKind::kConv2d;
  std::vector<std::string> inputs;
  // kConv2d
  TensorI8 kernel;
  std::vector<std::int32_t> bias;
  int stride = 1;
  int pad = 0;
  // kBRelu: per-channel clamp and requantization (one entry broadcasts)
  std::vector<MulShift> requant;
  std::vector<std::int32_t> h_i;
  // kRescale
  MulShift rescale;

  friend bool operator==(const IntLayer&, const IntLayer&) = default;
};

// Per-layer quantization bookkeeping. `layer` is the conv that owns the
// weights, or the BReLU itself when its producer has no weights.
struct QuantRecord {
  std::string layer;
  std::string brelu;  // BReLU driven by this record; empty for a linear output conv
  Ratio ratio_x;
  std::vector<Ratio> delta;    // per output channel; 0 marks an all-zero channel
  std::vector<Ratio> ratio_y;  // per output channel
  // Present when `brelu` is set.
  std::vector<MulShift> mul_shift;
  Ratio ratio_v;
  Ratio h_f;
  double h_rf = 0.0;
  std::vector<std::int64_t> h_ri;
  std::vector<std::int32_t> h_i;
  std::int32_t max_int = 0;

  std::size_t channels() const { return ratio_y.size(); }
  // 1/Δ, or 0 for an all-zero channel.
  Ratio ratio_w(std::size_t c) const { return delta.at(c) == 0 ? Ratio(0) : 1 / delta.at(c); }

  friend bool operator==(const QuantRecord&, const QuantRecord&) = default;
};

struct IntegerModel {
  Shape input;
  Ratio input_ratio = 1;
  std::int32_t max_int = 127;
  std::vector<IntLayer> layers;
  std::vector<QuantRecord> records;
  Ratio output_ratio = 1;

  const IntLayer& layer(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;
  const QuantRecord* record_for(std::string_view id) const;

  friend bool operator==(const IntegerModel&, const IntegerModel&) = default;
};

// Minimal structural view shared by float and integer graphs.
struct NodeView {
  std::string id;
  LayerKind kind;
  std::vector<std::string> inputs;
  std::int64_t out_channels = 0;  // conv only
  std::int64_t in_channels = 0;   // conv only
  std::int64_t kh = 0, kw = 0;    // conv only
  int stride = 1, pad = 0;
};

std::vector<NodeView> graph_view(const NetworkIR& net);
std::vector<NodeView> graph_view(const IntegerModel& model);

// Kahn's algorithm, ties broken by ascending id. Throws ValidationError on a
// cycle or a dangling input.
std::vector<std::string> topo_order(const std::vector<NodeView>& nodes);
inline std::vector<std::string> topo_order(const NetworkIR& net) { return topo_order(graph_view(net)); }
inline std::vector<std::string> topo_order(const IntegerModel& m) { return topo_order(graph_view(m)); }

// Same order as indices into the node list.
std::vector<std::size_t> topo_indices(const std::vector<NodeView>& nodes);

// consumers[i] = indices of nodes reading node i, ascending.
std::vector<std::vector<std::size_t>> consumers_of(const std::vector<NodeView>& nodes);

// Index of the single layer nobody consumes.
std::size_t sink_index(const std::vector<NodeView>& nodes);

// C, H, W of every node output, checking shape compatibility.
std::vector<Shape> infer_shapes(const std::vector<NodeView>& nodes, const Shape& input);

// Structural checks: unique ids, inputs exist, acyclic, arity, a single sink,
// conv/bias/BN sizes, BReLU bounds, shapes.
void validate(const NetworkIR& net);

}  // namespace intnet
