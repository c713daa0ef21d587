// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "intnet/calibration.hpp"
#include "intnet/compare.hpp"
#include "intnet/float_engine.hpp"
#include "intnet/int_engine.hpp"
#include "intnet/model_io.hpp"
#include "intnet/pipeline.hpp"
#include "intnet/quantizer.hpp"
#include "intnet/synth.hpp"
#include "support.hpp"

using namespace intnet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// 1000 (h_rf, ratio_Y) pairs: the requantized integer bound lands on max_int.
Outcome anchor_property() {
  testing::Rng rng(101);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t max_int = (std::int64_t{1} << rng.uniform(4, 8)) - 1;
    const Ratio ratio_y = exact(std::exp(rng.real(std::log(10.0), std::log(1e6))));
    const double h_rf = max_int / to_double(ratio_y) * std::exp(rng.real(0.01, std::log(5000.0)));
    const auto f = fixup_brelu(h_rf, ratio_y, max_int);
    bad += testing::oracle_requant(f.h_i, f.h_i, f.mul_shift.mul, f.mul_shift.shift) != max_int;
  }
  return {bad == 0, fmt("%d/1000 pairs off the anchor", bad)};
}

// 10000 h_ri against the exhaustive (mul, shift) search.
Outcome mul_shift_oracle() {
  testing::Rng rng(102);
  int exact_pairs = 0, ties = 0, bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::int64_t h_ri = rng.uniform(127, std::int64_t{1} << 20);
    const auto got = derive_mul_shift(h_ri, 127);
    const auto best = testing::exhaustive_mul_shift(h_ri, 127);
    if (got.mul == best.mul && got.shift == best.shift)
      ++exact_pairs;
    else if (testing::equal_error(testing::make_candidate(got.mul, got.shift, h_ri, 127), best))
      ++ties;
    else
      ++bad;
  }
  return {bad == 0, fmt("%d exact, %d equal-error ties, %d worse", exact_pairs, ties, bad)};
}

// 200 random shapes, int8 and uint8 operands, against a 64-bit naive conv.
Outcome conv_oracle() {
  testing::Rng rng(103);
  int shapes = 0, bad = 0;
  while (shapes < 200) {
    const auto k = rng.pick(std::vector<std::int64_t>{1, 3, 5});
    const auto c = rng.uniform(1, 8), o = rng.uniform(1, 8);
    const auto h = rng.uniform(1, 16), w = rng.uniform(1, 16);
    const int stride = static_cast<int>(rng.uniform(1, 2));
    const int pad = static_cast<int>(rng.uniform(0, k / 2));
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    ++shapes;
    const auto kern = testing::random_ints<std::int8_t>(rng, {o, c, k, k}, -127, 127);
    std::vector<std::int32_t> bias;
    for (std::int64_t i = 0; i < o; ++i) bias.push_back(static_cast<std::int32_t>(rng.uniform(-1 << 20, 1 << 20)));
    const ExecOptions opts{static_cast<int>(rng.uniform(1, 4)), static_cast<std::uint64_t>(rng.uniform(0, 9))};
    Shape s;
    if (rng.coin()) {
      const auto x = testing::random_ints<std::int8_t>(rng, {2, c, h, w}, -128, 127);
      const auto ref = testing::naive_conv<std::int64_t>(x, kern, bias, stride, pad, s);
      const auto y = conv2d_i8(x, kern, stride, pad, bias, opts);
      bad += y.shape() != s || !std::equal(ref.begin(), ref.end(), y.data().begin());
    } else {
      const auto x = testing::random_ints<std::uint8_t>(rng, {2, c, h, w}, 0, 255);
      const auto ref = testing::naive_conv<std::int64_t>(x, kern, bias, stride, pad, s);
      const auto y = conv2d_i8(x, kern, stride, pad, bias, opts);
      bad += y.shape() != s || !std::equal(ref.begin(), ref.end(), y.data().begin());
    }
  }
  return {bad == 0, fmt("%d/%d shapes differ", bad, shapes)};
}

// The fixed net of criteria 4 and 5.
struct FixedNet {
  NetworkIR net = make_vrcnn(7, 64);
  std::vector<TensorU8> inputs = random_images(2, 20, net.input);
  CalibrationResult calib;

  FixedNet() {
    std::vector<TensorF> batches;
    for (const auto& img : random_images(1, 20, net.input))
      batches.push_back(stack_batch<float>(std::vector{renormalize_input_float(img, net.input_ratio)}));
    calib = calibrate_geometric(net, 0.5, scan_output_range(net, batches));
  }

  double psnr_at(int bits) const {
    PipelineConfig cfg;
    cfg.bits = bits;
    const auto r = convert_network(net, calib, cfg);
    return compare_models(r.float_net, r.model, inputs, CompareMode::kRegress, {4, 0}).psnr;
  }
};

const FixedNet& fixed_net() {
  static const FixedNet f;
  return f;
}

Outcome float_int_equivalence() {
  const auto& f = fixed_net();
  const double got = f.psnr_at(7);
  // An ideal uniform quantizer with max_int levels over the full activation
  // range has MSE step^2/12 at peak = max_int * step.
  const double ideal = 10.0 * std::log10(12.0 * 127.0 * 127.0);
  const double floor_db = 40.0;
  return {got >= floor_db, fmt("PSNR %.2f dB, floor %.1f dB (ideal 7-bit bound %.2f dB - 3 = %.2f dB)", got,
                               floor_db, ideal, ideal - 3.0)};
}

Outcome bit_depth_trend() {
  const auto& f = fixed_net();
  std::vector<double> p;
  for (int bits = 8; bits >= 4; --bits) p.push_back(f.psnr_at(bits));
  bool monotone = true;
  for (std::size_t i = 1; i < p.size(); ++i) monotone = monotone && p[i] <= p[i - 1];
  const double d65 = p[2] - p[3], d54 = p[3] - p[4];
  return {monotone && d54 > d65,
          fmt("PSNR 8..4 bits: %.2f %.2f %.2f %.2f %.2f dB; drop 6->5 %.2f, 5->4 %.2f", p[0], p[1], p[2], p[3],
              p[4], d65, d54)};
}

Outcome determinism() {
  struct Case {
    const char* name;
    NetworkIR net;
  };
  std::vector<Case> cases = {{"linear", make_linear(11, {1, 8, 8, 4, 1}, 32)},
                             {"residual", make_residual(12, 8, 32)},
                             {"concat", make_vrcnn(13, 32)}};
  int bad = 0;
  testing::Rng rng(106);
  for (const auto& c : cases) {
    std::vector<TensorF> batches;
    for (const auto& img : random_images(3, 4, c.net.input))
      batches.push_back(stack_batch<float>(std::vector{renormalize_input_float(img, c.net.input_ratio)}));
    const auto model = convert_network(c.net, calibrate_nsigma(c.net, batches, 3.0), PipelineConfig{}).model;
    const auto batch = stack_batch<std::uint8_t>(random_images(4, 3, c.net.input));
    const auto ref = forward_int(model, batch, {1, 0}).output;
    const int threads[] = {1, 2, 8};
    for (int run = 0; run < 10; ++run) {
      const ExecOptions opts{threads[run % 3], rng.eng()};
      bad += !(forward_int(model, batch, opts).output == ref);
    }
  }
  return {bad == 0, fmt("%d/30 runs differ from the single-thread run", bad)};
}

Outcome model_size() {
  const auto& f = fixed_net();
  const auto model = convert_network(f.net, f.calib, PipelineConfig{}).model;
  const auto fs = payload_stats(f.net);
  const auto qs = payload_stats(model);
  const double meta = double(qs.metadata()) / double(qs.total);
  return {4 * qs.weight_bytes == fs.weight_bytes && meta <= 0.05,
          fmt("%zu of %zu float weight bytes, metadata %zu of %zu bytes (%.2f%%)", qs.weight_bytes,
              fs.weight_bytes, qs.metadata(), qs.total, 100 * meta)};
}

Outcome sync_exactness() {
  testing::Rng rng(108);
  int bad = 0;
  // direct: residual syncs
  for (int i = 0; i < 100; ++i) {
    const Ratio ratio_x = exact(rng.real(20.0, 300.0));
    std::vector<Ratio> delta;
    for (int c = 0; c < rng.uniform(1, 8); ++c) delta.push_back(rng.uniform(0, 9) == 0 ? Ratio(0) : exact(rng.real(1e-3, 0.1)));
    const Ratio skip = exact(rng.real(10.0, 5e4));
    const auto s = sync_residual(skip, ratio_x, delta);
    bad += skip * s.rescale.value() != s.shared_ratio;
    for (std::size_t c = 0; c < delta.size(); ++c)
      bad += delta[c] == 0 ? s.delta[c] != 0 : ratio_x / s.delta[c] != s.shared_ratio;
  }
  // direct: concat fan-ins against the sync output equations
  for (int i = 0; i < 100; ++i) {
    std::vector<ConcatEntry> in;
    for (int k = 0; k < rng.uniform(2, 5); ++k) {
      const Ratio ry = exact(rng.real(50.0, 5e5));
      const auto ms = approximate_scale(Ratio(127) / exact(rng.real(127.0, 1e5)));
      in.push_back({exact(rng.real(1e-4, 1e-1)), ry, ry * ms.value()});
    }
    const auto out = sync_concat(in);
    Ratio ratio_min = in[0].ratio_v;
    for (const auto& e : in) ratio_min = std::min(ratio_min, e.ratio_v);
    for (std::size_t k = 0; k < in.size(); ++k) {
      const auto& s = out[k];
      const Ratio scale = pow2(s.mul_shift.shift);
      bad += s.ratio_v != ratio_min;
      bad += s.delta != in[k].delta * in[k].ratio_y * s.mul_shift.mul / (scale * ratio_min);
      bad += s.ratio_y != ratio_min * scale / s.mul_shift.mul;
    }
  }
  // end to end: merges inside converted random networks
  int residual = 0, concat = 0;
  while (residual < 100 || concat < 100) {
    const auto net = testing::random_network(rng);
    const auto m = convert_network(net, calibrate_geometric(net, 0.5, 1.0), PipelineConfig{}).model;
    const auto ratios = activation_ratios(m);
    for (std::size_t k = 0; k < m.layers.size(); ++k) {
      const auto& l = m.layers[k];
      if (l.kind != LayerKind::kConcat && l.kind != LayerKind::kResidualAdd) continue;
      (l.kind == LayerKind::kConcat ? concat : residual) += 1;
      for (const auto& in : l.inputs) bad += ratios[m.index_of(in)] != ratios[k];
    }
  }
  return {bad == 0, fmt("%d mismatches (100 + 100 direct syncs, %d residual and %d concat merges in converted nets)",
                        bad, residual, concat)};
}

Outcome bn_folding() {
  testing::Rng rng(109);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto ic = rng.uniform(1, 8), oc = rng.uniform(1, 8);
    const auto k = rng.pick(std::vector<std::int64_t>{1, 3, 5});
    const auto kernel = testing::random_floats(rng, {oc, ic, k, k}, 0.3);
    std::vector<float> bias(static_cast<std::size_t>(oc));
    for (auto& b : bias) b = static_cast<float>(rng.normal(0, 0.1));
    BatchNorm bn;
    bn.eps = 1e-5f;
    for (std::int64_t c = 0; c < oc; ++c) {
      bn.gamma.push_back(static_cast<float>(rng.real(0.2, 2.0)));
      bn.beta.push_back(static_cast<float>(rng.normal(0, 0.3)));
      bn.mean.push_back(static_cast<float>(rng.normal(0, 0.3)));
      bn.var.push_back(static_cast<float>(rng.real(0.1, 3.0)));
    }
    const auto x = testing::random_floats(rng, {1, ic, 9, 9});
    const int pad = static_cast<int>(k / 2);
    const auto ref = batchnorm_f32(conv2d_f32(x, kernel, bias, 1, pad), bn);
    const auto f = fold_batchnorm(kernel, bias, bn);
    const auto y = conv2d_f32(x, f.kernel, f.bias, 1, pad);
    for (std::size_t j = 0; j < y.size(); ++j) worst = std::max(worst, double(std::abs(y[j] - ref[j])));
  }
  return {worst <= 1e-4, fmt("max abs diff %.3g", worst)};
}

Outcome weight_round_trip() {
  testing::Rng rng(110);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto k = rng.pick(std::vector<std::int64_t>{1, 3, 5});
    const auto w = testing::random_floats(rng, {rng.uniform(1, 16), rng.uniform(1, 16), k, k},
                                          std::exp(rng.real(std::log(1e-4), std::log(10.0))));
    const bool per_channel = rng.coin();
    const auto q = quantize_weights(w, per_channel);
    const auto again = quantize_weights(discretize_weights(w, q.delta), per_channel);
    bad += !(again.weights == q.weights) || again.delta != q.delta;
  }
  return {bad == 0, fmt("%d/1000 kernels differ", bad)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"quantized BReLU anchor", 1, anchor_property},
      {"mul/shift exhaustive oracle", 5, mul_shift_oracle},
      {"integer conv oracle", 30, conv_oracle},
      {"float/integer equivalence", 60, float_int_equivalence},
      {"bit-depth trend", 120, bit_depth_trend},
      {"bit-exact determinism", 60, determinism},
      {"model size", 1, model_size},
      {"ratio synchronization", 5, sync_exactness},
      {"batch-norm folding", 10, bn_folding},
      {"weight round-trip", 5, weight_round_trip},
  };
  fixed_net();  // shared setup, timed outside criterion 4
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && s < c.budget_s;
    failed += !pass;
    std::printf("criterion %2zu %s: %s | %s | %.2f s (budget %.0f s)\n", i + 1, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), s, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
