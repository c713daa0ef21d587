// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "intnet/int_engine.hpp"
#include "intnet/quantizer.hpp"

namespace intnet {

const char* to_string(FinetuneStage stage) {
  switch (stage) {
    case FinetuneStage::kAfterRenormalize: return "after-renormalize";
    case FinetuneStage::kAfterDiscretize: return "after-discretize";
    case FinetuneStage::kAfterBRelu: return "after-brelu";
  }
  return "?";
}

const char* to_string(SyncKind kind) {
  switch (kind) {
    case SyncKind::kChannels: return "channels";
    case SyncKind::kConcat: return "concat";
    case SyncKind::kResidual: return "residual";
  }
  return "?";
}

std::int32_t PipelineConfig::max_int() const {
  if (bits < 4 || bits > 8) throw invalid_argument("activation bit depth must be in [4, 8]");
  return (1 << bits) - 1;
}

void check_convertible(const NetworkIR& net) {
  validate(net);
  const auto nodes = graph_view(net);
  const auto consumers = consumers_of(nodes);
  auto kind_of = [&](const std::string& id) -> std::optional<LayerKind> {
    if (id == kInputId) return std::nullopt;
    return net.layer(id).kind;
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    switch (l.kind) {
      case LayerKind::kRescale:
        throw ValidationError(l.id, "rescale layers are inserted by conversion, not accepted as input");
      case LayerKind::kConv2d: {
        const auto src = kind_of(l.inputs[0]);
        if (src && *src != LayerKind::kBRelu && *src != LayerKind::kConcat)
          throw ValidationError(l.id, "conv input must be the network input, a BReLU or a concat");
        if (consumers[i].size() > 1)
          throw ValidationError(l.id, "conv output must feed a single layer");
        if (consumers[i].size() == 1) {
          const auto& c = net.layers[consumers[i][0]];
          if (c.kind != LayerKind::kBRelu && c.kind != LayerKind::kResidualAdd)
            throw ValidationError(l.id, "conv output must feed a BReLU or a residual-add");
          if (c.kind == LayerKind::kResidualAdd && c.inputs[0] == c.inputs[1])
            throw ValidationError(c.id, "both operands are the same conv");
        }
        break;
      }
      case LayerKind::kBRelu: {
        const auto src = kind_of(l.inputs[0]);
        if (!src || (*src != LayerKind::kConv2d && *src != LayerKind::kResidualAdd))
          throw ValidationError(l.id, "BReLU input must be a conv or a residual-add");
        break;
      }
      case LayerKind::kResidualAdd:
        if (kind_of(l.inputs[0]) != LayerKind::kConv2d)
          throw ValidationError(l.id, "first operand must be the main-path conv");
        break;
      case LayerKind::kConcat: {
        std::set<std::string> seen;
        for (const auto& in : l.inputs) {
          if (!seen.insert(in).second) throw ValidationError(l.id, "input '" + in + "' repeated");
          if (kind_of(in) != LayerKind::kBRelu ||
              net.layer(net.layer(in).inputs[0]).kind != LayerKind::kConv2d)
            throw ValidationError(l.id, "concat input '" + in + "' must be a BReLU of a conv");
          if (consumers[net.index_of(in)].size() != 1)
            throw ValidationError(in, "a BReLU feeding a concat must have no other consumer");
        }
        break;
      }
    }
  }
}

namespace {

struct Prepared {
  NetworkIR work;                         // BN folded, weights discretized
  std::vector<std::vector<Ratio>> delta;  // by layer index, conv only
  std::vector<PruneCandidate> prune;
  std::vector<std::string> warnings;
};

Prepared prepare(const NetworkIR& net, const PipelineConfig& cfg) {
  Prepared p{net, {}, {}, {}};
  if (cfg.input_ratio > 0) p.work.input_ratio = cfg.input_ratio;
  check_convertible(p.work);
  if (cfg.finetune) cfg.finetune(FinetuneStage::kAfterRenormalize, p.work);

  p.delta.resize(p.work.layers.size());
  for (std::size_t i = 0; i < p.work.layers.size(); ++i) {
    auto& l = p.work.layers[i];
    if (l.kind != LayerKind::kConv2d) continue;
    auto& conv = l.conv;
    const bool per_channel = cfg.per_channel.value_or(conv.bn.has_value());
    if (conv.bn) {
      auto folded = fold_batchnorm(conv.kernel, conv.bias, *conv.bn);
      conv.kernel = std::move(folded.kernel);
      conv.bias = std::move(folded.bias);
      conv.bn.reset();
    }
    auto q = quantize_weights(conv.kernel, per_channel);
    for (auto c : q.zero_channels) {
      p.prune.push_back({l.id, c});
      p.warnings.push_back("layer '" + l.id + "': channel " + std::to_string(c) +
                           " has all-zero weights (prune candidate)");
    }
    conv.kernel = discretize_weights(conv.kernel, q.delta);
    p.delta[i] = std::move(q.delta);
  }
  if (cfg.finetune) {
    cfg.finetune(FinetuneStage::kAfterDiscretize, p.work);
    check_convertible(p.work);
  }
  return p;
}

struct BReluState {
  std::vector<MulShift> ms;
  std::vector<std::int64_t> h_ri, h_i;
  Ratio ratio_v;
  double h_rf = 0.0;
};

struct SkipRescale {
  std::size_t add = 0;
  std::string id;
  std::string input;
  MulShift ms;
};

ConversionResult build(const Prepared& p, const CalibrationResult& calib, const PipelineConfig& cfg) {
  const NetworkIR& net = p.work;
  const std::int32_t max_int = cfg.max_int();
  const auto nodes = graph_view(net);
  const auto order = topo_indices(nodes);
  const auto consumers = consumers_of(nodes);
  const auto shapes = infer_shapes(nodes, net.input);
  const std::size_t count = net.layers.size();
  const std::size_t sink = sink_index(nodes);

  ConversionResult result;
  result.prune_candidates = p.prune;
  result.warnings = p.warnings;

  std::vector<Ratio> act(count);  // uniform output ratio, 0 while per-channel
  std::vector<Ratio> ratio_x(count);
  std::vector<std::vector<Ratio>> delta = p.delta;
  std::vector<std::vector<Ratio>> ratio_y(count);
  std::vector<std::optional<BReluState>> bstate(count);
  std::vector<SkipRescale> rescales;

  auto ratio_of = [&](const std::string& id) -> Ratio {
    if (id == kInputId) return net.input_ratio;
    const Ratio& r = act[net.index_of(id)];
    if (r == 0) throw ValidationError(id, "output ratio requested before it is known");
    return r;
  };
  auto channels = [&](std::size_t idx) { return static_cast<std::size_t>(shapes[idx][0]); };

  for (auto idx : order) {
    const auto& l = net.layers[idx];
    switch (l.kind) {
      case LayerKind::kConv2d: {
        ratio_x[idx] = ratio_of(l.inputs[0]);
        ratio_y[idx].resize(delta[idx].size());
        for (std::size_t c = 0; c < delta[idx].size(); ++c)
          if (delta[idx][c] != 0) ratio_y[idx][c] = ratio_x[idx] / delta[idx][c];
        if (idx == sink) {
          act[idx] = equalize_channels(ratio_x[idx], delta[idx]);
          std::fill(ratio_y[idx].begin(), ratio_y[idx].end(), act[idx]);
        }
        break;
      }
      case LayerKind::kBRelu: {
        const std::size_t j = net.index_of(l.inputs[0]);
        const std::size_t chans = channels(idx);
        BReluState b;
        b.h_rf = calib.h_rf(l.id);
        b.ms.resize(chans);
        b.h_ri.resize(chans);
        b.h_i.resize(chans);
        if (net.layers[j].kind == LayerKind::kResidualAdd) {
          const auto fix = fixup_brelu(b.h_rf, act[j], max_int);
          std::fill(b.ms.begin(), b.ms.end(), fix.mul_shift);
          std::fill(b.h_ri.begin(), b.h_ri.end(), fix.h_ri);
          std::fill(b.h_i.begin(), b.h_i.end(), fix.h_i);
          b.ratio_v = fix.ratio_v;
        } else {
          auto& d = delta[j];
          auto& ry = ratio_y[j];
          const bool all_zero = std::all_of(d.begin(), d.end(), [](const Ratio& x) { return x == 0; });
          std::vector<ConcatEntry> entries;
          std::vector<std::size_t> live;
          std::set<Ratio> distinct;
          for (std::size_t c = 0; c < chans; ++c) {
            if (d[c] == 0 && !all_zero) continue;
            const Ratio r = d[c] == 0 ? ratio_x[j] : ry[c];
            const auto fix = fixup_brelu(b.h_rf, r, max_int);
            b.h_ri[c] = fix.h_ri;
            entries.push_back({d[c], r, fix.ratio_v});
            distinct.insert(fix.ratio_v);
            live.push_back(c);
          }
          const auto synced = sync_concat(entries);
          b.ratio_v = synced.front().ratio_v;
          for (std::size_t k = 0; k < live.size(); ++k) {
            const std::size_t c = live[k];
            d[c] = synced[k].delta;
            ry[c] = synced[k].ratio_y;
            b.ms[c] = synced[k].mul_shift;
            b.h_i[c] = integer_bound(synced[k].mul_shift, max_int);
          }
          const MulShift unity = approximate_scale(Ratio(1));
          for (std::size_t c = 0; c < chans; ++c) {
            if (d[c] != 0 || all_zero) continue;
            ry[c] = b.ratio_v;
            b.ms[c] = unity;
            b.h_ri[c] = round_to_i64(exact(b.h_rf) * b.ratio_v);
            b.h_i[c] = integer_bound(unity, max_int);
          }
          if (distinct.size() > 1) {
            SyncEvent e;
            e.kind = SyncKind::kChannels;
            e.layer = l.id;
            e.inputs = {net.layers[j].id};
            e.before.assign(distinct.begin(), distinct.end());
            e.ratio = b.ratio_v;
            result.events.push_back(std::move(e));
          }
        }
        act[idx] = b.ratio_v;
        bstate[idx] = std::move(b);
        break;
      }
      case LayerKind::kConcat: {
        std::vector<ConcatEntry> entries;
        SyncEvent e;
        e.kind = SyncKind::kConcat;
        e.layer = l.id;
        for (const auto& in : l.inputs) {
          const std::size_t b = net.index_of(in);
          const std::size_t j = net.index_of(net.layers[b].inputs[0]);
          e.inputs.push_back(in);
          e.before.push_back(bstate[b]->ratio_v);
          for (std::size_t c = 0; c < delta[j].size(); ++c)
            entries.push_back({delta[j][c], ratio_y[j][c], bstate[b]->ratio_v});
        }
        const auto synced = sync_concat(entries);
        std::size_t k = 0;
        for (const auto& in : l.inputs) {
          const std::size_t b = net.index_of(in);
          const std::size_t j = net.index_of(net.layers[b].inputs[0]);
          auto& st = *bstate[b];
          e.mul_shift.push_back(synced[k].mul_shift);
          for (std::size_t c = 0; c < delta[j].size(); ++c, ++k) {
            delta[j][c] = synced[k].delta;
            ratio_y[j][c] = synced[k].ratio_y;
            st.ms[c] = synced[k].mul_shift;
            st.h_i[c] = integer_bound(synced[k].mul_shift, max_int);
          }
          st.ratio_v = synced.front().ratio_v;
          act[b] = st.ratio_v;
        }
        e.ratio = synced.front().ratio_v;
        act[idx] = e.ratio;
        result.events.push_back(std::move(e));
        break;
      }
      case LayerKind::kResidualAdd: {
        const std::size_t m = net.index_of(l.inputs[0]);
        const std::string& skip = l.inputs[1];
        Ratio r_s;
        int type = 1;
        if (skip != kInputId && net.layer(skip).kind == LayerKind::kConv2d) {
          type = 2;
          const std::size_t s = net.index_of(skip);
          r_s = equalize_channels(ratio_x[s], delta[s]);
          std::fill(ratio_y[s].begin(), ratio_y[s].end(), r_s);
          act[s] = r_s;
        } else {
          r_s = ratio_of(skip);
        }
        const Ratio max_delta = *std::max_element(delta[m].begin(), delta[m].end());
        const Ratio main_before = max_delta == 0 ? r_s : ratio_x[m] / max_delta;
        auto rs = sync_residual(r_s, ratio_x[m], delta[m]);
        delta[m] = rs.delta;
        std::fill(ratio_y[m].begin(), ratio_y[m].end(), rs.shared_ratio);
        act[m] = rs.shared_ratio;
        act[idx] = rs.shared_ratio;
        rescales.push_back({idx, l.id + ".skip_rescale", skip, rs.rescale});
        SyncEvent e;
        e.kind = SyncKind::kResidual;
        e.layer = l.id;
        e.inputs = {l.inputs[0], skip};
        e.before = {main_before, r_s};
        e.ratio = rs.shared_ratio;
        e.mul_shift = {rs.rescale};
        e.residual_type = type;
        result.events.push_back(std::move(e));
        break;
      }
      case LayerKind::kRescale:
        break;  // rejected by check_convertible
    }
  }

  // Step 7: integer weights and biases, float counterpart.
  IntegerModel& model = result.model;
  model.input = net.input;
  model.input_ratio = net.input_ratio;
  model.max_int = max_int;
  model.output_ratio = act[sink];
  NetworkIR& fnet = result.float_net;
  fnet.input = net.input;
  fnet.input_ratio = net.input_ratio;

  for (std::size_t idx = 0; idx < count; ++idx) {
    const auto& l = net.layers[idx];
    for (const auto& r : rescales) {
      if (r.add != idx) continue;
      IntLayer il;
      il.id = r.id;
      il.kind = LayerKind::kRescale;
      il.inputs = {r.input};
      il.rescale = r.ms;
      model.layers.push_back(std::move(il));
      LayerSpec fl;
      fl.id = r.id;
      fl.kind = LayerKind::kRescale;
      fl.inputs = {r.input};
      fnet.layers.push_back(std::move(fl));
    }
    IntLayer il;
    il.id = l.id;
    il.kind = l.kind;
    il.inputs = l.inputs;
    LayerSpec fl = l;
    switch (l.kind) {
      case LayerKind::kConv2d: {
        try {
          il.kernel = quantize_with_steps(l.conv.kernel, delta[idx]);
          il.bias = quantize_bias(l.conv.bias, ratio_y[idx]);
        } catch (const Error& e) {
          throw ValidationError(l.id, e.what());
        }
        il.stride = l.conv.stride;
        il.pad = l.conv.pad;
        fl.conv.kernel = discretize_weights(l.conv.kernel, delta[idx]);

        QuantRecord rec;
        rec.layer = l.id;
        rec.ratio_x = ratio_x[idx];
        rec.delta = delta[idx];
        rec.ratio_y = ratio_y[idx];
        if (consumers[idx].size() == 1 && net.layers[consumers[idx][0]].kind == LayerKind::kBRelu) {
          const std::size_t b = consumers[idx][0];
          const auto& st = *bstate[b];
          rec.brelu = net.layers[b].id;
          rec.mul_shift = st.ms;
          rec.ratio_v = st.ratio_v;
          rec.h_f = Ratio(max_int) / st.ratio_v;
          rec.h_rf = st.h_rf;
          rec.h_ri = st.h_ri;
          for (auto h : st.h_i) rec.h_i.push_back(static_cast<std::int32_t>(h));
          rec.max_int = max_int;
        }
        model.records.push_back(std::move(rec));
        break;
      }
      case LayerKind::kBRelu: {
        const auto& st = *bstate[idx];
        il.requant = st.ms;
        for (auto h : st.h_i) il.h_i.push_back(static_cast<std::int32_t>(h));
        fl.h = to_float(Ratio(max_int) / st.ratio_v);
        if (net.layer(l.inputs[0]).kind == LayerKind::kResidualAdd) {
          QuantRecord rec;
          rec.layer = l.id;
          rec.brelu = l.id;
          rec.ratio_x = act[net.index_of(l.inputs[0])];
          rec.ratio_y.assign(channels(idx), rec.ratio_x);
          rec.mul_shift = st.ms;
          rec.ratio_v = st.ratio_v;
          rec.h_f = Ratio(max_int) / st.ratio_v;
          rec.h_rf = st.h_rf;
          rec.h_ri = st.h_ri;
          rec.h_i = il.h_i;
          rec.max_int = max_int;
          model.records.push_back(std::move(rec));
        }
        break;
      }
      case LayerKind::kResidualAdd:
        for (const auto& r : rescales)
          if (r.add == idx) il.inputs[1] = fl.inputs[1] = r.id;
        break;
      default:
        break;
    }
    model.layers.push_back(std::move(il));
    fnet.layers.push_back(std::move(fl));
  }
  validate_integer_model(model);
  return result;
}

}  // namespace

ConversionResult convert_network(const NetworkIR& net, const CalibrationResult& calib,
                                 const PipelineConfig& cfg) {
  cfg.max_int();  // range check
  if (cfg.recalibrate && !(cfg.n_step > 0)) throw invalid_argument("n_step must be positive");
  const Prepared p = prepare(net, cfg);
  std::optional<ConversionResult> best;
  double n = cfg.n;
  while (true) {
    CalibrationResult c = cfg.recalibrate ? cfg.recalibrate(p.work, n) : calib;
    ConversionResult r = build(p, c, cfg);
    r.calibration = std::move(c);
    r.n_used = cfg.recalibrate ? n : r.calibration.n;
    if (cfg.finetune) cfg.finetune(FinetuneStage::kAfterBRelu, r.float_net);
    if (!cfg.metric) return r;
    r.metric_value = cfg.metric(r);
    r.threshold_met = *r.metric_value >= cfg.baseline - cfg.threshold;
    if (r.threshold_met) return r;
    if (!best || *r.metric_value > *best->metric_value) best = std::move(r);
    n += cfg.n_step;
    if (!cfg.recalibrate || n > cfg.n_cap) break;
  }
  best->threshold_met = false;
  best->warnings.push_back("metric did not reach baseline - threshold up to n = " +
                           std::to_string(cfg.n_cap) + "; keeping the best n");
  return std::move(*best);
}

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

std::string num(const Ratio& r) { return num(to_double(r)); }

template <typename T, typename F>
std::string range(const std::vector<T>& v, F f) {
  if (v.empty()) return "-";
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi ? f(*lo) : f(*lo) + ".." + f(*hi);
}

}  // namespace

std::string conversion_report(const ConversionResult& result, const PipelineConfig& cfg) {
  const auto& m = result.model;
  std::string s = "intnet-conversion 1\n";
  s += "bits " + std::to_string(cfg.bits) + "\n";
  s += "max_int " + std::to_string(m.max_int) + "\n";
  s += "calibration " +
       std::string(result.calibration.method == CalibrationMethod::kNSigma ? "nsigma" : "geometric") +
       "\n";
  if (result.calibration.method == CalibrationMethod::kNSigma) s += "n " + num(result.n_used) + "\n";
  if (result.metric_value) s += "metric " + num(*result.metric_value) + "\n";
  s += "threshold_met " + std::string(result.threshold_met ? "1" : "0") + "\n";
  s += "input_ratio " + to_string(m.input_ratio) + "\n";
  s += "output_ratio " + num(m.output_ratio) + "\n";
  auto i64 = [](std::int64_t v) { return std::to_string(v); };
  for (const auto& r : m.records) {
    s += "quant " + r.layer;
    if (!r.delta.empty()) {
      std::vector<Ratio> nz;
      for (const auto& d : r.delta)
        if (d != 0) nz.push_back(d);
      s += " delta=" + range(nz, [](const Ratio& x) { return num(x); });
    }
    s += " ratio_x=" + num(r.ratio_x);
    s += " ratio_y=" + range(r.ratio_y, [](const Ratio& x) { return num(x); });
    if (!r.brelu.empty()) {
      std::vector<std::int64_t> mul, shift, hi;
      for (const auto& ms : r.mul_shift) {
        mul.push_back(ms.mul);
        shift.push_back(ms.shift);
      }
      for (auto h : r.h_i) hi.push_back(h);
      s += " brelu=" + r.brelu + " h_rf=" + num(r.h_rf) + " h_ri=" + range(r.h_ri, i64) +
           " h_f=" + num(r.h_f) + " h_i=" + range(hi, i64) + " mul=" + range(mul, i64) +
           " shift=" + range(shift, i64) + " ratio_v=" + num(r.ratio_v);
    }
    s += "\n";
  }
  for (const auto& e : result.events) {
    s += "sync " + std::string(to_string(e.kind)) + " " + e.layer;
    if (e.kind == SyncKind::kResidual) s += " type=" + std::to_string(e.residual_type);
    s += " inputs=";
    for (std::size_t i = 0; i < e.inputs.size(); ++i) s += (i ? "," : "") + e.inputs[i];
    s += " before=";
    for (std::size_t i = 0; i < e.before.size(); ++i) s += (i ? "," : "") + num(e.before[i]);
    s += (e.kind == SyncKind::kResidual ? " shared_ratio=" : " ratio_min=") + num(e.ratio);
    if (!e.mul_shift.empty()) {
      s += e.kind == SyncKind::kResidual ? " rescale=" : " mul_shift=";
      for (std::size_t i = 0; i < e.mul_shift.size(); ++i)
        s += (i ? "," : "") + std::to_string(e.mul_shift[i].mul) + "/2^" +
             std::to_string(e.mul_shift[i].shift);
    }
    s += "\n";
  }
  for (const auto& p : result.prune_candidates)
    s += "prune " + p.layer + " channel=" + std::to_string(p.channel) + "\n";
  for (const auto& w : result.warnings) s += "warning " + w + "\n";
  return s;
}

}  // namespace intnet
