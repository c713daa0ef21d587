// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "intnet/float_engine.hpp"
#include "intnet/int_engine.hpp"
#include "intnet/quantizer.hpp"
#include "support.hpp"

using namespace intnet;

namespace {

TensorF row(std::vector<float> v) {
  const auto n = static_cast<std::int64_t>(v.size());
  return TensorF({1, n, 1, 1}, std::move(v));
}

// round(w / delta) ties away, from the exact rational definition.
std::int64_t oracle_quantize(float w, const Ratio& delta) {
  const Ratio q = Ratio(w) / delta;
  const BigInt num = boost::multiprecision::numerator(q), den = boost::multiprecision::denominator(q);
  const BigInt a = abs(num);
  const BigInt r = (2 * a + den) / (2 * den);
  return (num < 0 ? -r : r).convert_to<std::int64_t>();
}

}  // namespace

TEST_CASE("weight quantization examples") {
  const auto q = quantize_weights(row({0.635f, -1.27f, 0.3175f}), false);
  CHECK(to_double(q.delta[0]) == doctest::Approx(0.01));
  CHECK(q.delta[0] == Ratio(1.27f) / 127);
  CHECK(q.weights[0] == 64);
  CHECK(q.weights[1] == -127);
  CHECK(q.weights[2] == 32);

  const auto r = quantize_weights(row({127.0f, -3.4f, 2.5f, -0.5f}), false);
  CHECK(r.delta[0] == 1);
  CHECK(std::vector<int>(r.weights.data().begin(), r.weights.data().end()) ==
        std::vector<int>{127, -3, 3, -1});
}

TEST_CASE("per-channel steps and all-zero channels") {
  TensorF w({3, 1, 1, 2}, std::vector<float>{1.0f, -0.5f, 0.0f, 0.0f, 0.25f, 0.1f});
  const auto per = quantize_weights(w, true);
  CHECK(per.delta[0] == Ratio(1, 127));
  CHECK(per.delta[1] == 0);
  CHECK(per.delta[2] == Ratio(1, 4 * 127));
  CHECK(per.zero_channels == std::vector<std::size_t>{1});
  CHECK(per.weights[2] == 0);
  CHECK(per.weights[3] == 0);
  CHECK(per.weights[4] == 127);
  const auto whole = quantize_weights(w, false);
  for (const auto& d : whole.delta) CHECK(d == Ratio(1, 127));
  CHECK(whole.weights[4] == 32);
}

TEST_CASE("quantized weights match the exact rounding oracle") {
  testing::Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto w = testing::random_floats(rng, {rng.uniform(1, 6), rng.uniform(1, 4), 3, 3},
                                          rng.real(0.01, 3.0));
    const bool per_channel = rng.coin();
    const auto q = quantize_weights(w, per_channel);
    const auto per = static_cast<std::int64_t>(w.size()) / w.dim(0);
    for (std::int64_t c = 0; c < w.dim(0); ++c) {
      int peak = 0;
      for (std::int64_t k = 0; k < per; ++k) {
        const auto idx = static_cast<std::size_t>(c * per + k);
        CHECK(q.weights[idx] == oracle_quantize(w[idx], q.delta[static_cast<std::size_t>(c)]));
        peak = std::max(peak, std::abs(int(q.weights[idx])));
      }
      if (per_channel) CHECK(peak == 127);
    }
  }
}

TEST_CASE("quantizing a weight exactly at a tie rounds away from zero") {
  // 2.5 steps and -2.5 steps.
  const Ratio delta = Ratio(1, 4);
  const TensorF w({2, 1, 1, 1}, std::vector<float>{0.625f, -0.625f});
  const std::vector<Ratio> d = {delta, delta};
  const auto q = quantize_with_steps(w, d);
  CHECK(q[0] == 3);
  CHECK(q[1] == -3);
  const std::vector<Ratio> tiny = {Ratio(1, 1000), Ratio(1, 1000)};
  CHECK_THROWS_AS(quantize_with_steps(w, tiny), Error);
}

TEST_CASE("discretization examples") {
  const std::vector<Ratio> d = {Ratio(0.01f)};
  CHECK(discretize_weights(row({0.005f}), d)[0] == 0.01f);
  const std::vector<Ratio> quarter = {Ratio(1, 4)};
  const auto w = row({0.25f, -0.75f, 31.75f});
  CHECK(discretize_weights(w, quarter) == w);
}

TEST_CASE("discretized weights quantize back to the same integers") {
  testing::Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    const auto w = testing::random_floats(rng, {rng.uniform(1, 8), rng.uniform(1, 8), 3, 3},
                                          rng.real(1e-3, 10.0));
    const bool per_channel = rng.coin();
    const auto q = quantize_weights(w, per_channel);
    const auto wd = discretize_weights(w, q.delta);
    CHECK(quantize_with_steps(wd, q.delta) == q.weights);
    const auto again = quantize_weights(wd, per_channel);
    CHECK(again.weights == q.weights);
    CHECK(again.delta == q.delta);
  }
}

TEST_CASE("batch-norm folding examples") {
  const TensorF k({1, 1, 1, 2}, std::vector<float>{0.3f, -0.7f});
  const std::vector<float> bias = {1.0f};
  const auto f = fold_batchnorm(k, bias, BatchNorm{{2.f}, {0.5f}, {1.f}, {4.f}, 0.f});
  CHECK(f.kernel == k);
  CHECK(f.bias[0] == 0.5f);
  const auto id = fold_batchnorm(k, bias, BatchNorm{{1.f}, {0.f}, {0.f}, {1.f}, 0.f});
  CHECK(id.kernel == k);
  CHECK(id.bias == bias);
  CHECK_THROWS_AS(fold_batchnorm(k, bias, BatchNorm{{1.f}, {0.f}, {0.f}, {-1.f}, 0.f}), Error);
}

TEST_CASE("folded conv agrees with conv followed by batch norm") {
  testing::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto ic = rng.uniform(1, 4), oc = rng.uniform(1, 4);
    const auto k = rng.pick(std::vector<std::int64_t>{1, 3, 5});
    const auto kernel = testing::random_floats(rng, {oc, ic, k, k}, 0.5);
    std::vector<float> bias(static_cast<std::size_t>(oc));
    BatchNorm bn;
    bn.eps = 1e-5f;
    for (auto& b : bias) b = static_cast<float>(rng.normal(0, 0.1));
    for (std::int64_t c = 0; c < oc; ++c) {
      bn.gamma.push_back(static_cast<float>(rng.real(0.2, 2.0)));
      bn.beta.push_back(static_cast<float>(rng.normal(0, 0.3)));
      bn.mean.push_back(static_cast<float>(rng.normal(0, 0.3)));
      bn.var.push_back(static_cast<float>(rng.real(0.1, 3.0)));
    }
    const auto x = testing::random_floats(rng, {1, ic, 7, 7});
    const auto ref = batchnorm_f32(conv2d_f32(x, kernel, bias, 1, int(k / 2)), bn);
    const auto f = fold_batchnorm(kernel, bias, bn);
    const auto y = conv2d_f32(x, f.kernel, f.bias, 1, int(k / 2));
    double worst = 0;
    for (std::size_t j = 0; j < y.size(); ++j) worst = std::max(worst, double(std::abs(y[j] - ref[j])));
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("mul/shift examples") {
  const auto unity = derive_mul_shift(127, 127);
  CHECK(unity.mul == 32768);
  CHECK(unity.shift == 15);
  CHECK(unity.value() == 1);
  CHECK(derive_mul_shift(254, 127).value() == Ratio(1, 2));
  const auto ms = derive_mul_shift(300, 127);
  const auto best = testing::exhaustive_mul_shift(300, 127);
  CHECK(testing::equal_error(testing::make_candidate(ms.mul, ms.shift, 300, 127), best));
  CHECK_THROWS_AS(derive_mul_shift(100, 127), Error);
}

TEST_CASE("mul/shift matches exhaustive search") {
  testing::Rng rng(4);
  for (int i = 0; i < 3000; ++i) {
    const std::int64_t max_int = (std::int64_t{1} << rng.uniform(4, 8)) - 1;
    const std::int64_t h_ri = rng.uniform(max_int, std::int64_t{1} << 24);
    const auto ms = derive_mul_shift(h_ri, max_int);
    CHECK(ms.mul >= 1);
    CHECK(ms.mul <= kMaxMul);
    CHECK(ms.shift <= kMaxShift);
    const auto best = testing::exhaustive_mul_shift(h_ri, max_int);
    const auto got = testing::make_candidate(ms.mul, ms.shift, h_ri, max_int);
    CHECK(testing::equal_error(got, best));
  }
}

TEST_CASE("approximate_scale range limits") {
  CHECK(approximate_scale(Ratio(65535)).value() == 65535);
  CHECK_THROWS_AS(approximate_scale(Ratio(65536)), Error);
  CHECK_THROWS_AS(approximate_scale(Ratio(0)), Error);
  CHECK_THROWS_AS(approximate_scale(Ratio(1) / pow2(40)), Error);
  const auto big = approximate_scale(Ratio(3, 2));
  CHECK(big.value() == Ratio(3, 2));
  CHECK(big.shift == 15);
}

TEST_CASE("BReLU fixup example on the power-of-two path") {
  const auto r = fixup_brelu(2.54, Ratio(100), 127);
  CHECK(r.h_ri == 254);
  CHECK(r.mul_shift.value() == Ratio(1, 2));
  CHECK(r.ratio_v == 50);
  CHECK(r.h_f == Ratio(254, 100));
  CHECK(r.h_i == 254);
  CHECK_THROWS_AS(fixup_brelu(0.5, Ratio(100), 127), Error);
}

TEST_CASE("BReLU fixup anchors h_i to max_int") {
  testing::Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t max_int = (std::int64_t{1} << rng.uniform(4, 8)) - 1;
    const Ratio ratio_y = exact(std::exp(rng.real(std::log(10.0), std::log(1e6))));
    const double h_rf = double(max_int) / to_double(ratio_y) * rng.real(1.01, 50.0);
    const auto r = fixup_brelu(h_rf, ratio_y, max_int);
    CHECK(testing::oracle_requant(r.h_i, r.h_i, r.mul_shift.mul, r.mul_shift.shift) == max_int);
    CHECK(r.ratio_v == ratio_y * r.mul_shift.value());
    CHECK(r.h_f * r.ratio_v == max_int);
    CHECK(integer_bound(r.mul_shift, max_int) == r.h_i);
  }
}

TEST_CASE("bias quantization") {
  const std::vector<float> b = {0.5f, 0.0f, -0.3f};
  const std::vector<Ratio> ry = {Ratio(200), Ratio(77), Ratio(10)};
  CHECK(quantize_bias(b, ry) == std::vector<std::int32_t>{100, 0, -3});
  const std::vector<float> big = {1e6f};
  const std::vector<Ratio> huge = {Ratio(1e4)};
  CHECK_THROWS_AS(quantize_bias(big, huge), Error);
}

TEST_CASE("input re-normalization") {
  const TensorU8 raw({4}, std::vector<std::uint8_t>{200, 0, 255, 128});
  const auto x = renormalize_input(raw);
  CHECK(std::vector<int>(x.data().begin(), x.data().end()) == std::vector<int>{72, -128, 127, 0});
  const auto f = renormalize_input_float(raw, Ratio(256));
  CHECK(f[2] == 0.49609375f);
  CHECK(f[1] == -0.5f);
}

TEST_CASE("residual sync examples") {
  const Ratio ratio_x = 200;
  const std::vector<Ratio> delta = {Ratio(1, 100), Ratio(1, 100)};
  const auto same = sync_residual(ratio_x / delta[0], ratio_x, delta);
  CHECK(same.rescale.value() == 1);
  CHECK(same.delta == delta);
  const auto half = sync_residual(2 * ratio_x / delta[0], ratio_x, delta);
  CHECK(half.rescale.value() == Ratio(1, 2));
  CHECK(half.delta == delta);
  CHECK(half.shared_ratio == ratio_x / delta[0]);
}

TEST_CASE("residual sync keeps all-zero channels at zero") {
  const std::vector<Ratio> delta = {Ratio(1, 50), Ratio(0), Ratio(1, 70)};
  const auto r = sync_residual(Ratio(1234, 7), Ratio(99), delta);
  CHECK(r.delta[1] == 0);
  CHECK(r.delta[0] == r.delta[2]);
  CHECK(Ratio(99) / r.delta[0] == r.shared_ratio);
  // the rounded rescale moves the step by at most one part in 2^15
  CHECK(abs(r.delta[0] * 50 - 1) <= Ratio(1) / pow2(15));
}

TEST_CASE("concat sync examples") {
  const Ratio d = Ratio(1, 64);
  std::vector<ConcatEntry> twins = {{d, Ratio(1000), Ratio(1000) * Ratio(32768, 65536)},
                                    {d, Ratio(1000), Ratio(1000) * Ratio(32768, 65536)}};
  const auto t = sync_concat(twins);
  for (const auto& s : t) {
    CHECK(s.delta == d);
    CHECK(s.ratio_v == 500);
    CHECK(s.mul_shift == approximate_scale(Ratio(1, 2)));
  }
  std::vector<ConcatEntry> two = {{d, Ratio(100), Ratio(100)}, {d, Ratio(50), Ratio(50)}};
  const auto r = sync_concat(two);
  CHECK(r[0].ratio_v == 50);
  CHECK(r[1].ratio_v == 50);
  CHECK(r[0].mul_shift.value() == Ratio(1, 2));
  CHECK(r[1].mul_shift.value() == 1);
  CHECK(r[0].delta == d);
}

TEST_CASE("concat sync output equations hold exactly") {
  testing::Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    std::vector<ConcatEntry> in;
    for (int k = 0; k < rng.uniform(1, 5); ++k) {
      const Ratio ry = exact(rng.real(50.0, 5e5));
      const auto ms = approximate_scale(Ratio(127) / exact(rng.real(127.0, 1e5)));
      in.push_back({exact(rng.real(1e-4, 1e-1)), ry, ry * ms.value()});
    }
    const auto out = sync_concat(in);
    Ratio ratio_min = in[0].ratio_v;
    for (const auto& e : in) ratio_min = std::min(ratio_min, e.ratio_v);
    for (std::size_t k = 0; k < in.size(); ++k) {
      const auto& s = out[k];
      CHECK(s.ratio_v == ratio_min);
      CHECK(s.ratio_y * s.mul_shift.value() == ratio_min);
      CHECK(s.delta / in[k].delta ==
            in[k].ratio_y * s.mul_shift.mul / (pow2(s.mul_shift.shift) * ratio_min));
      // the synchronized step keeps ratio_Y = ratio_X / delta for any ratio_X
      const Ratio ratio_x = in[k].ratio_y * in[k].delta;
      CHECK(ratio_x / s.delta == s.ratio_y);
    }
  }
}

TEST_CASE("channel equalization") {
  std::vector<Ratio> d = {Ratio(1, 10), Ratio(0), Ratio(1, 20)};
  CHECK(equalize_channels(Ratio(5), d) == 50);
  CHECK(d == std::vector<Ratio>{Ratio(1, 10), Ratio(0), Ratio(1, 10)});
}
