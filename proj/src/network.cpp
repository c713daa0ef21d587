// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <unordered_map>

namespace intnet {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kBRelu: return "brelu";
    case LayerKind::kResidualAdd: return "residual-add";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kRescale: return "rescale";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view text) {
  for (auto k : {LayerKind::kConv2d, LayerKind::kBRelu, LayerKind::kResidualAdd,
                 LayerKind::kConcat, LayerKind::kRescale})
    if (text == to_string(k)) return k;
  throw invalid_argument("unknown layer kind '" + std::string(text) + "'");
}

namespace {

template <typename Layers>
std::size_t find_index(const Layers& layers, std::string_view id) {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].id == id) return i;
  throw ValidationError(std::string(id), "no such layer");
}

}  // namespace

const LayerSpec& NetworkIR::layer(std::string_view id) const { return layers[index_of(id)]; }
LayerSpec& NetworkIR::layer(std::string_view id) { return layers[index_of(id)]; }
std::size_t NetworkIR::index_of(std::string_view id) const { return find_index(layers, id); }

const IntLayer& IntegerModel::layer(std::string_view id) const { return layers[index_of(id)]; }
std::size_t IntegerModel::index_of(std::string_view id) const { return find_index(layers, id); }

const QuantRecord* IntegerModel::record_for(std::string_view id) const {
  for (const auto& r : records)
    if (r.layer == id || r.brelu == id) return &r;
  return nullptr;
}

std::vector<NodeView> graph_view(const NetworkIR& net) {
  std::vector<NodeView> nodes;
  nodes.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    NodeView v{l.id, l.kind, l.inputs};
    if (l.kind == LayerKind::kConv2d) {
      const auto& k = l.conv.kernel;
      if (k.rank() != 4) throw ValidationError(l.id, "kernel must be OIHW");
      v.out_channels = k.dim(0);
      v.in_channels = k.dim(1);
      v.kh = k.dim(2);
      v.kw = k.dim(3);
      v.stride = l.conv.stride;
      v.pad = l.conv.pad;
    }
    nodes.push_back(std::move(v));
  }
  return nodes;
}

std::vector<NodeView> graph_view(const IntegerModel& model) {
  std::vector<NodeView> nodes;
  nodes.reserve(model.layers.size());
  for (const auto& l : model.layers) {
    NodeView v{l.id, l.kind, l.inputs};
    if (l.kind == LayerKind::kConv2d) {
      if (l.kernel.rank() != 4) throw ValidationError(l.id, "kernel must be OIHW");
      v.out_channels = l.kernel.dim(0);
      v.in_channels = l.kernel.dim(1);
      v.kh = l.kernel.dim(2);
      v.kw = l.kernel.dim(3);
      v.stride = l.stride;
      v.pad = l.pad;
    }
    nodes.push_back(std::move(v));
  }
  return nodes;
}

std::vector<std::size_t> topo_indices(const std::vector<NodeView>& nodes) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == kInputId) throw ValidationError(nodes[i].id, "layer id is reserved");
    if (!index.emplace(nodes[i].id, i).second)
      throw ValidationError(nodes[i].id, "duplicate layer id");
  }
  std::vector<std::size_t> pending(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> out_edges(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& in : nodes[i].inputs) {
      if (in == kInputId) continue;
      auto it = index.find(in);
      if (it == index.end()) throw ValidationError(nodes[i].id, "unknown input '" + in + "'");
      out_edges[it->second].push_back(i);
      ++pending[i];
    }
  }
  auto by_id = [&](std::size_t a, std::size_t b) { return nodes[a].id > nodes[b].id; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_id)> ready(by_id);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (pending[i] == 0) ready.push(i);
  std::vector<std::size_t> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (auto j : out_edges[i])
      if (--pending[j] == 0) ready.push(j);
  }
  if (order.size() != nodes.size()) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (pending[i] != 0) throw ValidationError(nodes[i].id, "cycle detected");
  }
  return order;
}

std::vector<std::string> topo_order(const std::vector<NodeView>& nodes) {
  std::vector<std::string> ids;
  for (auto i : topo_indices(nodes)) ids.push_back(nodes[i].id);
  return ids;
}

std::vector<std::vector<std::size_t>> consumers_of(const std::vector<NodeView>& nodes) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].id, i);
  std::vector<std::vector<std::size_t>> consumers(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (const auto& in : nodes[i].inputs)
      if (auto it = index.find(in); it != index.end()) consumers[it->second].push_back(i);
  for (auto& c : consumers) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  return consumers;
}

std::size_t sink_index(const std::vector<NodeView>& nodes) {
  const auto consumers = consumers_of(nodes);
  std::optional<std::size_t> sink;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!consumers[i].empty()) continue;
    if (sink) throw ValidationError(nodes[i].id, "second output layer (also '" + nodes[*sink].id +
                                                     "'); exactly one sink is supported");
    sink = i;
  }
  if (!sink) throw ValidationError("", "network has no output layer");
  return *sink;
}

std::vector<Shape> infer_shapes(const std::vector<NodeView>& nodes, const Shape& input) {
  if (input.size() != 3) throw ValidationError("", "input shape must be C,H,W");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].id, i);
  std::vector<Shape> shapes(nodes.size());
  auto shape_of = [&](const std::string& id) -> const Shape& {
    return id == kInputId ? input : shapes[index.at(id)];
  };
  for (auto i : topo_indices(nodes)) {
    const auto& n = nodes[i];
    switch (n.kind) {
      case LayerKind::kConv2d: {
        if (n.inputs.size() != 1) throw ValidationError(n.id, "conv2d takes exactly one input");
        const Shape& in = shape_of(n.inputs[0]);
        if (in[0] != n.in_channels)
          throw ValidationError(n.id, "kernel expects " + std::to_string(n.in_channels) +
                                          " input channels, producer has " + std::to_string(in[0]));
        if (n.stride < 1 || n.pad < 0) throw ValidationError(n.id, "invalid stride/padding");
        const std::int64_t oh = (in[1] + 2 * n.pad - n.kh) / n.stride + 1;
        const std::int64_t ow = (in[2] + 2 * n.pad - n.kw) / n.stride + 1;
        if (in[1] + 2 * n.pad < n.kh || in[2] + 2 * n.pad < n.kw)
          throw ValidationError(n.id, "kernel larger than padded input");
        shapes[i] = {n.out_channels, oh, ow};
        break;
      }
      case LayerKind::kBRelu:
      case LayerKind::kRescale:
        if (n.inputs.size() != 1)
          throw ValidationError(n.id, std::string(to_string(n.kind)) + " takes exactly one input");
        shapes[i] = shape_of(n.inputs[0]);
        break;
      case LayerKind::kResidualAdd: {
        if (n.inputs.size() != 2) throw ValidationError(n.id, "residual-add takes exactly 2 inputs");
        const Shape& a = shape_of(n.inputs[0]);
        const Shape& b = shape_of(n.inputs[1]);
        if (a != b)
          throw ValidationError(n.id, "addend shapes differ: " + shape_string(a) + " vs " +
                                          shape_string(b));
        shapes[i] = a;
        break;
      }
      case LayerKind::kConcat: {
        if (n.inputs.size() < 2) throw ValidationError(n.id, "concat needs at least 2 inputs");
        Shape out = shape_of(n.inputs[0]);
        out[0] = 0;
        for (const auto& in : n.inputs) {
          const Shape& s = shape_of(in);
          if (s[1] != out[1] || s[2] != out[2])
            throw ValidationError(n.id, "spatial dims of '" + in + "' do not match");
          out[0] += s[0];
        }
        shapes[i] = out;
        break;
      }
    }
  }
  return shapes;
}

void validate(const NetworkIR& net) {
  if (net.layers.empty()) throw ValidationError("", "network has no layers");
  if (net.input_ratio <= 0) throw ValidationError("", "input ratio must be positive");
  const auto nodes = graph_view(net);
  for (const auto& l : net.layers) {
    if (l.id.empty() || l.id.find_first_of(" \t\n,=") != std::string::npos)
      throw ValidationError(l.id, "layer ids must be non-empty and free of spaces, ',' and '='");
    if (l.kind == LayerKind::kConv2d) {
      const auto& c = l.conv;
      if (static_cast<std::int64_t>(c.bias.size()) != c.kernel.dim(0))
        throw ValidationError(l.id, "bias length " + std::to_string(c.bias.size()) +
                                        " != output channels " + std::to_string(c.kernel.dim(0)));
      if (c.bn) {
        const auto oc = static_cast<std::size_t>(c.kernel.dim(0));
        if (c.bn->gamma.size() != oc || c.bn->beta.size() != oc || c.bn->mean.size() != oc ||
            c.bn->var.size() != oc)
          throw ValidationError(l.id, "batch-norm parameter lengths do not match output channels");
      }
    }
    if (l.kind == LayerKind::kBRelu && !(l.h > 0.0f))
      throw ValidationError(l.id, "BReLU upper bound must exceed the lower bound 0");
  }
  sink_index(nodes);
  infer_shapes(nodes, net.input);
}

}  // namespace intnet
