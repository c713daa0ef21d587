// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Reference oracles and random generators shared by the tests. The oracles
// deliberately avoid the library's own helpers: plain loops, wide integers
// and long double arithmetic.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "intnet/network.hpp"
#include "intnet/tensor.hpp"

namespace testing {

using intnet::Shape;

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng);
  }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(eng);
  }
  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(v.size()) - 1))];
  }
};

inline intnet::TensorF random_floats(Rng& rng, Shape shape, double sd = 1.0) {
  intnet::TensorF t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal(0.0, sd));
  return t;
}

template <typename T>
intnet::Tensor<T> random_ints(Rng& rng, Shape shape, std::int64_t lo, std::int64_t hi) {
  intnet::Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Direct-definition convolution, NCHW x OIHW, every product summed in `Acc`.
template <typename Acc, typename X, typename W, typename B>
std::vector<Acc> naive_conv(const intnet::Tensor<X>& x, const intnet::Tensor<W>& w,
                            const std::vector<B>& bias, int stride, int pad, Shape& out_shape) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  out_shape = {n, o, oh, ow};
  std::vector<Acc> out;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oc = 0; oc < o; ++oc)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t xx = 0; xx < ow; ++xx) {
          Acc acc = bias.empty() ? Acc(0) : static_cast<Acc>(bias[oc]);
          for (std::int64_t ic = 0; ic < c; ++ic)
            for (std::int64_t ky = 0; ky < kh; ++ky)
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const auto iy = y * stride + ky - pad, ix = xx * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += static_cast<Acc>(x.at(b, ic, iy, ix)) * static_cast<Acc>(w.at(oc, ic, ky, kx));
              }
          out.push_back(acc);
        }
  return out;
}

// Best (mul, shift) for max_int / h_ri by trying every shift and both
// neighbouring multipliers; error compared exactly as
// |mul * h_ri - max_int * 2^shift| / (h_ri * 2^shift).
struct ScaleCandidate {
  std::int64_t mul = 0;
  int shift = 0;
  __int128 num = 0;  // |mul * h_ri - max_int * 2^shift|
};

inline bool smaller_error(const ScaleCandidate& a, const ScaleCandidate& b) {
  // a.num / 2^a.shift < b.num / 2^b.shift
  return (a.num << b.shift) < (b.num << a.shift);
}

inline bool equal_error(const ScaleCandidate& a, const ScaleCandidate& b) {
  return (a.num << b.shift) == (b.num << a.shift);
}

inline ScaleCandidate make_candidate(std::int64_t mul, int shift, std::int64_t h_ri, std::int64_t max_int) {
  __int128 d = static_cast<__int128>(mul) * h_ri - (static_cast<__int128>(max_int) << shift);
  return {mul, shift, d < 0 ? -d : d};
}

inline ScaleCandidate exhaustive_mul_shift(std::int64_t h_ri, std::int64_t max_int) {
  ScaleCandidate best;
  bool have = false;
  for (int s = 0; s <= 31; ++s) {
    const __int128 scaled = static_cast<__int128>(max_int) << s;
    const auto lo = static_cast<std::int64_t>(scaled / h_ri);
    for (std::int64_t m : {lo, lo + 1}) {
      if (m < 1 || m > 65535) continue;
      const auto c = make_candidate(m, s, h_ri, max_int);
      if (!have || smaller_error(c, best)) best = c, have = true;
    }
  }
  return best;
}

// round(v * mul / 2^shift) computed through long division in __int128.
inline std::int64_t oracle_requant(std::int64_t y, std::int64_t h_i, std::int64_t mul, int shift) {
  const std::int64_t c = std::min(std::max<std::int64_t>(y, 0), h_i);
  const __int128 num = static_cast<__int128>(c) * mul;
  const __int128 den = static_cast<__int128>(1) << shift;
  __int128 q = num / den;
  if ((num - q * den) * 2 >= den) ++q;
  return static_cast<std::int64_t>(q);
}

// A random float network built only from supported topology patterns:
// conv+BReLU chains, concat fan-ins and residual blocks, ending in a linear
// output conv.
intnet::NetworkIR random_network(Rng& rng, bool allow_bn = true);

}  // namespace testing
