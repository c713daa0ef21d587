// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/model_io.hpp"

#include "intnet/int_engine.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace intnet {

namespace {

constexpr std::string_view kMagic = "intnet-model 1";

// ---- formatting -------------------------------------------------------------

template <typename F>
std::string fmt_real(F v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T, typename Fmt>
std::string fmt_list(const std::vector<T>& values, Fmt fmt) {
  if (values.empty()) return "";
  bool uniform = true;
  for (const auto& v : values) uniform = uniform && v == values.front();
  if (uniform) return fmt(values.front());
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += fmt(values[i]);
  }
  return s;
}

std::string fmt_ratio(const Ratio& r) { return to_string(r); }
std::string fmt_int(std::int64_t v) { return std::to_string(v); }

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
  return s;
}

// ---- parsing ----------------------------------------------------------------

struct Token {
  std::string_view text;
  std::size_t offset;
};

struct Line {
  std::size_t offset = 0;
  std::vector<Token> tokens;

  const Token& tok(std::size_t i) const {
    if (i >= tokens.size()) throw ParseError(offset, "missing field");
    return tokens[i];
  }
  std::string_view word(std::size_t i) const { return tok(i).text; }

  // key=value lookup among tokens from `first` on.
  std::optional<Token> find(std::string_view key, std::size_t first = 0) const {
    for (std::size_t i = first; i < tokens.size(); ++i) {
      auto t = tokens[i].text;
      if (t.size() > key.size() && t.substr(0, key.size()) == key && t[key.size()] == '=')
        return Token{t.substr(key.size() + 1), tokens[i].offset + key.size() + 1};
    }
    return std::nullopt;
  }
  Token get(std::string_view key, std::size_t first = 0) const {
    auto t = find(key, first);
    if (!t) throw ParseError(offset, "missing '" + std::string(key) + "='");
    return *t;
  }
};

Line tokenize(std::string_view line, std::size_t offset) {
  Line out{offset, {}};
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.tokens.push_back({line.substr(start, i - start), offset + start});
  }
  return out;
}

template <typename T>
T parse_number(const Token& t) {
  T v{};
  const char* end = t.text.data() + t.text.size();
  auto res = std::from_chars(t.text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ParseError(t.offset, "bad number '" + std::string(t.text) + "'");
  return v;
}

Ratio parse_ratio_tok(const Token& t) {
  try {
    return parse_ratio(t.text);
  } catch (const std::exception&) {
    throw ParseError(t.offset, "bad rational '" + std::string(t.text) + "'");
  }
}

std::vector<Token> split_list(const Token& t) {
  std::vector<Token> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= t.text.size(); ++i) {
    if (i == t.text.size() || t.text[i] == ',') {
      out.push_back({t.text.substr(start, i - start), t.offset + start});
      start = i + 1;
    }
  }
  return out;
}

template <typename T, typename F>
std::vector<T> parse_list(const Token& t, std::size_t channels, F parse_one) {
  auto parts = split_list(t);
  std::vector<T> out;
  for (const auto& p : parts) out.push_back(parse_one(p));
  if (out.size() == 1 && channels > 1) out.assign(channels, out.front());
  if (out.size() != channels)
    throw ParseError(t.offset, "expected " + std::to_string(channels) + " values, found " +
                                   std::to_string(out.size()));
  return out;
}

Shape parse_shape(const Token& t) {
  Shape s;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= t.text.size(); ++i) {
    if (i == t.text.size() || t.text[i] == 'x') {
      Token part{t.text.substr(start, i - start), t.offset + start};
      const auto d = parse_number<std::int64_t>(part);
      if (d <= 0) throw ParseError(part.offset, "non-positive dimension");
      s.push_back(d);
      start = i + 1;
    }
  }
  return s;
}

std::vector<std::string> parse_inputs(const Token& t) {
  std::vector<std::string> ins;
  for (const auto& p : split_list(t)) {
    if (p.text.empty()) throw ParseError(p.offset, "empty input id");
    ins.emplace_back(p.text);
  }
  return ins;
}

struct Header {
  std::vector<Line> lines;
  std::size_t payload_offset = 0;
  std::size_t payload_size = 0;
};

Header split_header(const std::string& bytes) {
  if (bytes.empty()) throw ParseError(0, "empty model file");
  Header h;
  std::size_t pos = 0;
  bool ended = false;
  while (pos < bytes.size()) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError(pos, "unterminated header line");
    std::string_view text(bytes.data() + pos, nl - pos);
    Line line = tokenize(text, pos);
    pos = nl + 1;
    if (line.tokens.empty()) continue;
    if (line.word(0) == "end") {
      h.payload_size = parse_number<std::size_t>(line.tok(1));
      ended = true;
      break;
    }
    h.lines.push_back(std::move(line));
  }
  if (!ended) throw ParseError(bytes.size(), "missing 'end' line");
  if (h.lines.empty() || h.lines[0].tokens.size() != 2 ||
      h.lines[0].word(0) != "intnet-model")
    throw ParseError(0, "not an intnet model file");
  if (h.lines[0].word(1) != "1")
    throw ParseError(h.lines[0].tokens[1].offset,
                     "unsupported format version " + std::string(h.lines[0].word(1)));
  h.payload_offset = pos;
  if (bytes.size() - pos != h.payload_size)
    throw ParseError(pos, "payload is " + std::to_string(bytes.size() - pos) +
                              " bytes, header declares " + std::to_string(h.payload_size));
  return h;
}

const Line& line_at(const Header& h, std::size_t i) {
  if (i >= h.lines.size()) throw ParseError(h.payload_offset, "header ends early");
  return h.lines[i];
}

ModelKind kind_of(const Header& h) {
  if (h.lines.size() < 2 || h.lines[1].word(0) != "kind")
    throw ParseError(h.lines.size() > 1 ? h.lines[1].offset : 0, "expected 'kind' line");
  const auto k = h.lines[1].word(1);
  if (k == "float") return ModelKind::kFloat;
  if (k == "int") return ModelKind::kInt;
  throw ParseError(h.lines[1].tokens[1].offset, "unknown model kind '" + std::string(k) + "'");
}

struct CommonHeader {
  Shape input;
  Ratio ratio_x;
};

CommonHeader parse_input_line(const Line& l) {
  if (l.word(0) != "input") throw ParseError(l.offset, "expected 'input' line");
  CommonHeader c;
  c.input = parse_shape(l.tok(1));
  if (c.input.size() != 3) throw ParseError(l.tokens[1].offset, "input shape must be CxHxW");
  c.ratio_x = parse_ratio_tok(l.get("ratio_x"));
  if (c.ratio_x <= 0) throw ParseError(l.offset, "ratio_x must be positive");
  return c;
}

std::string header_prefix(ModelKind kind, const Shape& input, const Ratio& ratio_x) {
  std::string s(kMagic);
  s += "\nkind ";
  s += kind == ModelKind::kFloat ? "float" : "int";
  s += "\ninput " + shape_string(input) + " ratio_x=" + to_string(ratio_x) + "\n";
  return s;
}

std::string finish(std::string header, const std::string& payload) {
  header += "end " + std::to_string(payload.size()) + "\n";
  return header + payload;
}

void rethrow_at(const Line& l, const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) throw;
  throw ParseError(l.offset, e.what());
}

}  // namespace

// ---- float networks ---------------------------------------------------------

std::string serialize(const NetworkIR& net) {
  validate(net);
  std::string header = header_prefix(ModelKind::kFloat, net.input, net.input_ratio);
  std::ostringstream payload;
  for (const auto& l : net.layers) {
    header += "layer " + l.id + " " + to_string(l.kind) + " in=" + join(l.inputs);
    switch (l.kind) {
      case LayerKind::kConv2d: {
        header += " kernel=" + shape_string(l.conv.kernel.shape()) +
                  " stride=" + std::to_string(l.conv.stride) +
                  " pad=" + std::to_string(l.conv.pad);
        if (l.conv.bn) header += " bn=1 eps=" + fmt_real(l.conv.bn->eps);
        write_blob(payload, l.conv.kernel);
        const auto oc = static_cast<std::int64_t>(l.conv.bias.size());
        write_blob(payload, TensorF({oc}, l.conv.bias));
        if (l.conv.bn) {
          for (const auto* v : {&l.conv.bn->gamma, &l.conv.bn->beta, &l.conv.bn->mean,
                                &l.conv.bn->var})
            write_blob(payload, TensorF({oc}, *v));
        }
        break;
      }
      case LayerKind::kBRelu:
        header += " h=" + fmt_real(l.h);
        break;
      default:
        break;
    }
    header += "\n";
  }
  return finish(std::move(header), payload.str());
}

NetworkIR parse_network(const std::string& bytes) {
  Header h = split_header(bytes);
  if (kind_of(h) != ModelKind::kFloat) throw ParseError(h.lines[1].offset, "not a float model");
  NetworkIR net;
  const auto common = parse_input_line(line_at(h, 2));
  net.input = common.input;
  net.input_ratio = common.ratio_x;

  std::istringstream payload(bytes.substr(h.payload_offset));
  std::size_t offset = h.payload_offset;
  for (std::size_t i = 3; i < h.lines.size(); ++i) {
    const Line& l = h.lines[i];
    if (l.word(0) != "layer") throw ParseError(l.offset, "unexpected '" + std::string(l.word(0)) + "'");
    try {
      LayerSpec spec;
      spec.id = std::string(l.word(1));
      spec.kind = parse_layer_kind(l.word(2));
      spec.inputs = parse_inputs(l.get("in"));
      if (spec.kind == LayerKind::kConv2d) {
        const Shape kshape = parse_shape(l.get("kernel"));
        if (kshape.size() != 4) throw ParseError(l.get("kernel").offset, "kernel must be OxIxHxW");
        spec.conv.stride = parse_number<int>(l.get("stride"));
        spec.conv.pad = parse_number<int>(l.get("pad"));
        spec.conv.kernel = read_blob<float>(payload, offset);
        if (spec.conv.kernel.shape() != kshape)
          throw ValidationError(spec.id, "kernel blob shape disagrees with header");
        auto bias = read_blob<float>(payload, offset);
        spec.conv.bias.assign(bias.data().begin(), bias.data().end());
        if (auto bn = l.find("bn"); bn && bn->text == "1") {
          BatchNorm b;
          b.eps = parse_number<float>(l.get("eps"));
          for (auto* v : {&b.gamma, &b.beta, &b.mean, &b.var}) {
            auto t = read_blob<float>(payload, offset);
            v->assign(t.data().begin(), t.data().end());
          }
          spec.conv.bn = std::move(b);
        }
      } else if (spec.kind == LayerKind::kBRelu) {
        spec.h = parse_number<float>(l.get("h"));
      }
      net.layers.push_back(std::move(spec));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      rethrow_at(l, e);
    }
  }
  if (offset != bytes.size()) throw ParseError(offset, "unused payload bytes");
  validate(net);
  return net;
}

// ---- integer models ---------------------------------------------------------

std::string serialize(const IntegerModel& model) {
  std::string header = header_prefix(ModelKind::kInt, model.input, model.input_ratio);
  header += "max_int " + std::to_string(model.max_int) + "\n";
  header += "output_ratio " + to_string(model.output_ratio) + "\n";
  std::ostringstream payload;
  for (const auto& l : model.layers) {
    header += "layer " + l.id + " " + to_string(l.kind) + " in=" + join(l.inputs);
    switch (l.kind) {
      case LayerKind::kConv2d: {
        header += " kernel=" + shape_string(l.kernel.shape()) +
                  " stride=" + std::to_string(l.stride) + " pad=" + std::to_string(l.pad);
        write_blob(payload, l.kernel);
        write_blob(payload, TensorI32({static_cast<std::int64_t>(l.bias.size())}, l.bias));
        break;
      }
      case LayerKind::kBRelu: {
        std::vector<std::int64_t> mul, shift;
        for (const auto& ms : l.requant) {
          mul.push_back(ms.mul);
          shift.push_back(ms.shift);
        }
        header += " mul=" + fmt_list(mul, fmt_int) + " shift=" + fmt_list(shift, fmt_int) +
                  " h_i=" + fmt_list(l.h_i, [](std::int32_t v) { return fmt_int(v); });
        break;
      }
      case LayerKind::kRescale:
        header += " mul=" + std::to_string(l.rescale.mul) +
                  " shift=" + std::to_string(l.rescale.shift);
        break;
      default:
        break;
    }
    header += "\n";
  }
  // Only what cannot be derived is stored: ratio_x follows from the
  // producer, ratio_y from ratio_v and the BReLU's mul/shift (or is stored
  // when no BReLU follows), and delta = ratio_x / ratio_y except on all-zero
  // channels.
  for (const auto& r : model.records) {
    header += "quant " + r.layer;
    if (!r.brelu.empty()) {
      header += " brelu=" + r.brelu + " ratio_v=" + to_string(r.ratio_v) + " h_rf=" +
                fmt_real(r.h_rf) + " h_ri=" + fmt_list(r.h_ri, fmt_int);
    } else {
      header += " ratio_y=" + fmt_list(r.ratio_y, fmt_ratio);
    }
    std::vector<std::string> zero;
    for (std::size_t c = 0; c < r.delta.size(); ++c)
      if (r.delta[c] == 0) zero.push_back(std::to_string(c));
    if (!zero.empty()) header += " zero=" + join(zero);
    header += "\n";
  }
  return finish(std::move(header), payload.str());
}

IntegerModel parse_integer_model(const std::string& bytes) {
  Header h = split_header(bytes);
  if (kind_of(h) != ModelKind::kInt) throw ParseError(h.lines[1].offset, "not an integer model");
  IntegerModel m;
  const auto common = parse_input_line(line_at(h, 2));
  m.input = common.input;
  m.input_ratio = common.ratio_x;
  const Line& mi = line_at(h, 3);
  if (mi.word(0) != "max_int") throw ParseError(mi.offset, "expected 'max_int' line");
  m.max_int = parse_number<std::int32_t>(mi.tok(1));
  if (m.max_int < 1 || m.max_int > 255) throw ParseError(mi.tokens[1].offset, "max_int out of range");
  const Line& orl = line_at(h, 4);
  if (orl.word(0) != "output_ratio") throw ParseError(orl.offset, "expected 'output_ratio' line");
  m.output_ratio = parse_ratio_tok(orl.tok(1));

  std::istringstream payload(bytes.substr(h.payload_offset));
  std::size_t offset = h.payload_offset;
  std::vector<const Line*> brelu_lines;
  std::vector<const Line*> quant_lines;
  for (std::size_t i = 5; i < h.lines.size(); ++i) {
    const Line& l = h.lines[i];
    try {
      if (l.word(0) == "quant") {
        quant_lines.push_back(&l);
        continue;
      }
      if (l.word(0) != "layer")
        throw ParseError(l.offset, "unexpected '" + std::string(l.word(0)) + "'");
      if (!quant_lines.empty()) throw ParseError(l.offset, "layer line after quant lines");
      IntLayer layer;
      layer.id = std::string(l.word(1));
      layer.kind = parse_layer_kind(l.word(2));
      layer.inputs = parse_inputs(l.get("in"));
      switch (layer.kind) {
        case LayerKind::kConv2d: {
          const Shape kshape = parse_shape(l.get("kernel"));
          layer.stride = parse_number<int>(l.get("stride"));
          layer.pad = parse_number<int>(l.get("pad"));
          layer.kernel = read_blob<std::int8_t>(payload, offset);
          if (layer.kernel.shape() != kshape)
            throw ValidationError(layer.id, "kernel blob shape disagrees with header");
          auto bias = read_blob<std::int32_t>(payload, offset);
          layer.bias.assign(bias.data().begin(), bias.data().end());
          break;
        }
        case LayerKind::kBRelu:
          brelu_lines.push_back(&l);  // expanded once channel counts are known
          break;
        case LayerKind::kRescale:
          layer.rescale.mul = parse_number<std::int32_t>(l.get("mul"));
          layer.rescale.shift = parse_number<std::int32_t>(l.get("shift"));
          break;
        default:
          break;
      }
      m.layers.push_back(std::move(layer));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      rethrow_at(l, e);
    }
  }
  if (offset != bytes.size()) throw ParseError(offset, "unused payload bytes");

  const auto nodes = graph_view(m);
  const auto shapes = infer_shapes(nodes, m.input);
  auto channels_of = [&](std::string_view id) {
    return static_cast<std::size_t>(shapes.at(m.index_of(id))[0]);
  };

  for (const Line* l : brelu_lines) {
    try {
      auto& layer = m.layers[m.index_of(l->word(1))];
      const std::size_t c = channels_of(layer.id);
      auto mul = parse_list<std::int32_t>(l->get("mul"), c, parse_number<std::int32_t>);
      auto shift = parse_list<std::int32_t>(l->get("shift"), c, parse_number<std::int32_t>);
      layer.h_i = parse_list<std::int32_t>(l->get("h_i"), c, parse_number<std::int32_t>);
      for (std::size_t k = 0; k < c; ++k) layer.requant.push_back({mul[k], shift[k]});
    } catch (const std::exception& e) {
      rethrow_at(*l, e);
    }
  }

  std::vector<std::vector<bool>> zero_sets;
  for (const Line* l : quant_lines) {
    try {
      QuantRecord r;
      r.layer = std::string(l->word(1));
      const std::size_t c = channels_of(r.layer);
      if (auto b = l->find("brelu")) {
        r.brelu = std::string(b->text);
        const auto& br = m.layer(r.brelu);
        if (br.kind != LayerKind::kBRelu) throw ValidationError(r.brelu, "quant record names a non-BReLU");
        if (br.requant.size() != c) throw ValidationError(r.brelu, "channel count differs from its conv");
        r.ratio_v = parse_ratio_tok(l->get("ratio_v"));
        if (r.ratio_v <= 0) throw ParseError(l->get("ratio_v").offset, "ratio_v must be positive");
        r.h_rf = parse_number<double>(l->get("h_rf"));
        r.h_ri = parse_list<std::int64_t>(l->get("h_ri"), c, parse_number<std::int64_t>);
        r.mul_shift = br.requant;
        r.h_i = br.h_i;
        r.max_int = m.max_int;
        r.h_f = Ratio(m.max_int) / r.ratio_v;
        for (const auto& ms : r.mul_shift) {
          if (ms.mul < 1) throw ValidationError(r.brelu, "mul must be positive");
          r.ratio_y.push_back(r.ratio_v / ms.value());
        }
      } else {
        r.ratio_y = parse_list<Ratio>(l->get("ratio_y"), c, parse_ratio_tok);
        for (const auto& v : r.ratio_y)
          if (v <= 0) throw ParseError(l->get("ratio_y").offset, "ratio_y must be positive");
      }
      std::vector<bool> zero(c, false);
      if (auto z = l->find("zero")) {
        for (const auto& part : split_list(*z)) {
          const auto k = parse_number<std::size_t>(part);
          if (k >= c) throw ParseError(part.offset, "channel index out of range");
          zero[k] = true;
        }
      }
      zero_sets.push_back(std::move(zero));
      m.records.push_back(std::move(r));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      rethrow_at(*l, e);
    }
  }

  const auto ratios = activation_ratios(m);
  for (std::size_t k = 0; k < m.records.size(); ++k) {
    auto& r = m.records[k];
    const auto& owner = m.layer(r.layer);
    const auto& src = owner.inputs.at(0);
    r.ratio_x = src == kInputId ? m.input_ratio : ratios[m.index_of(src)];
    if (r.ratio_x == 0) throw ValidationError(r.layer, "input ratio cannot be derived");
    if (owner.kind != LayerKind::kConv2d) continue;
    for (std::size_t c = 0; c < r.ratio_y.size(); ++c)
      r.delta.push_back(zero_sets[k][c] ? Ratio(0) : r.ratio_x / r.ratio_y[c]);
  }
  validate_integer_model(m);
  return m;
}

ModelKind peek_model_kind(const std::string& bytes) { return kind_of(split_header(bytes)); }

// ---- files ------------------------------------------------------------------

namespace {

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open '" + path + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw io_error("failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

void save_model(const NetworkIR& net, const std::string& path) { write_file(path, serialize(net)); }
void save_model(const IntegerModel& model, const std::string& path) {
  write_file(path, serialize(model));
}
NetworkIR load_model(const std::string& path) { return parse_network(read_file(path)); }
IntegerModel load_integer_model(const std::string& path) {
  return parse_integer_model(read_file(path));
}
ModelKind model_file_kind(const std::string& path) { return peek_model_kind(read_file(path)); }

PayloadStats payload_stats(const NetworkIR& net) {
  PayloadStats s;
  s.total = serialize(net).size();
  for (const auto& l : net.layers) {
    if (l.kind != LayerKind::kConv2d) continue;
    s.weight_bytes += l.conv.kernel.size() * sizeof(float);
    s.bias_bytes += l.conv.bias.size() * sizeof(float);
  }
  return s;
}

PayloadStats payload_stats(const IntegerModel& model) {
  PayloadStats s;
  s.total = serialize(model).size();
  for (const auto& l : model.layers) {
    if (l.kind != LayerKind::kConv2d) continue;
    s.weight_bytes += l.kernel.size() * sizeof(std::int8_t);
    s.bias_bytes += l.bias.size() * sizeof(std::int32_t);
  }
  return s;
}

}  // namespace intnet
