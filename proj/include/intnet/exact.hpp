// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Exact rational bookkeeping for quantization ratios.
//
// Every ratio relating an integer quantity to its float counterpart is kept
// as an exact rational. Floats enter exactly (a binary float is a dyadic
// rational) and leave only for reporting or for the float reference net.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace intnet {

using Ratio = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Ratio exact(double v) { return Ratio(v); }

inline Ratio pow2(int exponent) {
  BigInt p = 1;
  p <<= exponent < 0 ? -exponent : exponent;
  return exponent < 0 ? Ratio(1) / Ratio(p) : Ratio(p);
}

// Nearest integer, ties away from zero, computed exactly.
BigInt round_half_away(const Ratio& x);

// round_half_away narrowed to int64; throws if out of range.
std::int64_t round_to_i64(const Ratio& x);

double to_double(const Ratio& x);
float to_float(const Ratio& x);

// Canonical "num/den" (or "num" when den == 1).
std::string to_string(const Ratio& x);

// Inverse of to_string. Throws std::invalid_argument on malformed text.
Ratio parse_ratio(std::string_view text);

}  // namespace intnet
