// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "intnet/float_engine.hpp"

namespace intnet {

namespace {

Error calibration_error(const std::string& what) { return Error(ErrorCode::kCalibration, what); }

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double tail_fraction(double n) { return 0.5 * std::erfc(n / std::sqrt(2.0)); }

std::size_t quantile_rank(std::size_t count, double tail) {
  if (count == 0) throw invalid_argument("quantile of an empty set");
  const auto dropped = static_cast<std::size_t>(std::floor(tail * static_cast<double>(count)));
  const std::size_t rank = dropped >= count ? 1 : count - dropped;
  return std::clamp<std::size_t>(rank, 1, count);
}

float quantile_bound(std::span<const float> values, double n) {
  if (values.empty()) throw invalid_argument("quantile of an empty tensor");
  if (!(n > 0)) throw invalid_argument("n must be positive");
  const std::size_t rank = quantile_rank(values.size(), tail_fraction(n));
  std::vector<float> v(values.begin(), values.end());
  auto kth = v.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(v.begin(), kth, v.end());
  return *kth;
}

float batch_quantile_bound(const TensorF& feature_map, double n) {
  return quantile_bound(feature_map.data(), n);
}

const CalibrationStats* CalibrationResult::find(std::string_view brelu_id) const {
  for (const auto& s : layers)
    if (s.layer == brelu_id) return &s;
  return nullptr;
}

double CalibrationResult::h_rf(std::string_view brelu_id) const {
  const auto* s = find(brelu_id);
  if (!s) throw calibration_error("layer '" + std::string(brelu_id) + "': no calibrated bound");
  return s->h_rf;
}

CalibrationResult calibrate_nsigma(const NetworkIR& net, std::span<const TensorF> batches,
                                   double n) {
  if (batches.empty()) throw calibration_error("calibration needs at least one batch");
  if (!(n > 0)) throw invalid_argument("n must be positive");
  validate(net);
  CalibrationResult result;
  result.method = CalibrationMethod::kNSigma;
  result.n = n;
  for (const auto& l : net.layers) {
    if (l.kind != LayerKind::kBRelu) continue;
    CalibrationStats s;
    s.layer = l.id;
    s.n = n;
    s.tail_fraction = tail_fraction(n);
    result.layers.push_back(std::move(s));
  }
  for (const auto& batch : batches) {
    const FloatResult fr = forward_f32(net, batch, true);
    for (auto& s : result.layers)
      s.batch_quantiles.push_back(batch_quantile_bound(brelu_input_tap(net, fr, s.layer), n));
  }
  for (auto& s : result.layers) {
    double sum = 0.0;
    for (double q : s.batch_quantiles) sum += q;
    s.h_rf = sum / static_cast<double>(s.batch_quantiles.size());
    if (!(s.h_rf > 0.0))
      throw calibration_error("layer '" + s.layer + "': calibrated bound " + fmt(s.h_rf) +
                              " is not positive (input to the BReLU is non-positive)");
  }
  return result;
}

std::vector<double> geometric_progression_bounds(double a0, double an, int n_layers) {
  if (!(a0 > 0) || !(an > 0)) throw invalid_argument("progression endpoints must be positive");
  if (n_layers < 2) throw invalid_argument("progression needs at least 2 layers");
  std::vector<double> a;
  const double n = n_layers;
  for (int i = 1; i < n_layers; ++i) a.push_back(std::pow(an, i / n) * std::pow(a0, (n - i) / n));
  return a;
}

std::vector<int> conv_depths(const NetworkIR& net) {
  const auto nodes = graph_view(net);
  std::vector<int> depth(net.layers.size(), 0);
  for (auto i : topo_indices(nodes)) {
    int d = 0;
    for (const auto& in : net.layers[i].inputs)
      if (in != kInputId) d = std::max(d, depth[net.index_of(in)]);
    depth[i] = d + (net.layers[i].kind == LayerKind::kConv2d ? 1 : 0);
  }
  return depth;
}

CalibrationResult calibrate_geometric(const NetworkIR& net, double a0, double an) {
  validate(net);
  const auto depth = conv_depths(net);
  const int n_layers = depth[sink_index(graph_view(net))];
  const auto a = geometric_progression_bounds(a0, an, n_layers);
  CalibrationResult result;
  result.method = CalibrationMethod::kGeometric;
  result.a0 = a0;
  result.an = an;
  result.n_layers = n_layers;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.kind != LayerKind::kBRelu) continue;
    const int d = depth[i];
    if (d == 0) throw calibration_error("layer '" + l.id + "': BReLU precedes every conv");
    CalibrationStats s;
    s.layer = l.id;
    s.depth = d;
    s.h_rf = d >= n_layers ? an : a[static_cast<std::size_t>(d - 1)];
    result.layers.push_back(std::move(s));
  }
  return result;
}

double scan_output_range(const NetworkIR& net, std::span<const TensorF> batches) {
  if (batches.empty()) throw calibration_error("output range scan needs at least one batch");
  double m = 0.0;
  for (const auto& b : batches) {
    const TensorF y = forward_f32(net, b).output;
    for (float v : y.data()) m = std::max(m, std::abs(double(v)));
  }
  return m;
}

// ---- report file --------------------------------------------------------------
//
//   intnet-calibration 1
//   method nsigma n=3 tail=0.0013498980316301035
//   method geometric a0=0.5 an=1.2 layers=4
//   layer <brelu-id> h_rf=<x> [depth=<d>] [quantiles=<q1,q2,...>]

std::string format_calibration(const CalibrationResult& calib) {
  std::string s = "intnet-calibration 1\n";
  if (calib.method == CalibrationMethod::kNSigma)
    s += "method nsigma n=" + fmt(calib.n) + " tail=" + fmt(tail_fraction(calib.n)) + "\n";
  else
    s += "method geometric a0=" + fmt(calib.a0) + " an=" + fmt(calib.an) +
         " layers=" + std::to_string(calib.n_layers) + "\n";
  for (const auto& l : calib.layers) {
    s += "layer " + l.layer + " h_rf=" + fmt(l.h_rf);
    if (calib.method == CalibrationMethod::kGeometric) s += " depth=" + std::to_string(l.depth);
    if (!l.batch_quantiles.empty()) {
      s += " quantiles=";
      for (std::size_t i = 0; i < l.batch_quantiles.size(); ++i)
        s += (i ? "," : "") + fmt(l.batch_quantiles[i]);
    }
    s += "\n";
  }
  return s;
}

namespace {

struct Field {
  std::string_view key, value;
  std::size_t offset;
};

double parse_double(std::string_view text, std::size_t offset) {
  double v = 0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ParseError(offset, "bad number '" + std::string(text) + "'");
  return v;
}

}  // namespace

CalibrationResult parse_calibration(const std::string& text) {
  CalibrationResult calib;
  std::size_t pos = 0, line_no = 0;
  bool have_method = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line(text.data() + pos, nl - pos);
    const std::size_t line_off = pos;
    pos = nl + 1;
    if (line.empty()) continue;
    std::vector<Field> fields;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ') ++i;
      if (i == start) break;
      const auto tok = line.substr(start, i - start);
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos)
        fields.push_back({tok, {}, line_off + start});
      else
        fields.push_back({tok.substr(0, eq), tok.substr(eq + 1), line_off + start + eq + 1});
    }
    auto get = [&](std::string_view key) -> const Field& {
      for (const auto& f : fields)
        if (f.key == key && !f.value.empty()) return f;
      throw ParseError(line_off, "missing '" + std::string(key) + "='");
    };
    if (line_no++ == 0) {
      if (line != "intnet-calibration 1") throw ParseError(0, "not a calibration report");
      continue;
    }
    if (fields[0].key == "method") {
      if (fields.size() < 2) throw ParseError(line_off, "missing method name");
      if (fields[1].key == "nsigma") {
        calib.method = CalibrationMethod::kNSigma;
        const auto& n = get("n");
        calib.n = parse_double(n.value, n.offset);
      } else if (fields[1].key == "geometric") {
        calib.method = CalibrationMethod::kGeometric;
        const auto& a0 = get("a0");
        const auto& an = get("an");
        const auto& nl2 = get("layers");
        calib.a0 = parse_double(a0.value, a0.offset);
        calib.an = parse_double(an.value, an.offset);
        calib.n_layers = static_cast<int>(parse_double(nl2.value, nl2.offset));
      } else {
        throw ParseError(fields[1].offset, "unknown method '" + std::string(fields[1].key) + "'");
      }
      have_method = true;
    } else if (fields[0].key == "layer") {
      if (!have_method) throw ParseError(line_off, "layer line before method line");
      if (fields.size() < 2) throw ParseError(line_off, "missing layer id");
      CalibrationStats s;
      s.layer = std::string(fields[1].key);
      const auto& h = get("h_rf");
      s.h_rf = parse_double(h.value, h.offset);
      if (!(s.h_rf > 0)) throw ParseError(h.offset, "h_rf must be positive");
      s.n = calib.n;
      if (calib.method == CalibrationMethod::kNSigma) s.tail_fraction = tail_fraction(calib.n);
      for (const auto& f : fields) {
        if (f.key == "depth") s.depth = static_cast<int>(parse_double(f.value, f.offset));
        if (f.key != "quantiles") continue;
        std::size_t start = 0;
        for (std::size_t k = 0; k <= f.value.size(); ++k) {
          if (k == f.value.size() || f.value[k] == ',') {
            s.batch_quantiles.push_back(
                parse_double(f.value.substr(start, k - start), f.offset + start));
            start = k + 1;
          }
        }
      }
      calib.layers.push_back(std::move(s));
    } else {
      throw ParseError(line_off, "unexpected '" + std::string(fields[0].key) + "'");
    }
  }
  if (line_no == 0) throw ParseError(0, "empty calibration report");
  if (!have_method) throw ParseError(text.size(), "missing method line");
  return calib;
}

void save_calibration(const CalibrationResult& calib, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open '" + path + "' for writing");
  os << format_calibration(calib);
  if (!os) throw io_error("failed writing '" + path + "'");
}

CalibrationResult load_calibration(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_calibration(ss.str());
}

}  // namespace intnet
