// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/exact.hpp"

#include <limits>
#include <stdexcept>

namespace intnet {

BigInt round_half_away(const Ratio& x) {
  const BigInt num = boost::multiprecision::numerator(x);
  const BigInt den = boost::multiprecision::denominator(x);  // always > 0
  const BigInt mag = (2 * abs(num) + den) / (2 * den);         // floor(|x| + 1/2)
  return num < 0 ? BigInt(-mag) : mag;
}

std::int64_t round_to_i64(const Ratio& x) {
  const BigInt r = round_half_away(x);
  if (r > std::numeric_limits<std::int64_t>::max() || r < std::numeric_limits<std::int64_t>::min())
    throw std::overflow_error("rounded value exceeds 64-bit range");
  return r.convert_to<std::int64_t>();
}

double to_double(const Ratio& x) { return x.convert_to<double>(); }
float to_float(const Ratio& x) { return x.convert_to<float>(); }

std::string to_string(const Ratio& x) {
  const BigInt den = boost::multiprecision::denominator(x);
  std::string s = boost::multiprecision::numerator(x).str();
  if (den != 1) s += "/" + den.str();
  return s;
}

Ratio parse_ratio(std::string_view text) {
  auto parse_int = [](std::string_view t, bool allow_sign) {
    std::size_t i = 0;
    if (allow_sign && !t.empty() && t[0] == '-') i = 1;
    if (i == t.size()) throw std::invalid_argument("empty integer");
    for (std::size_t k = i; k < t.size(); ++k)
      if (t[k] < '0' || t[k] > '9') throw std::invalid_argument("bad digit in rational");
    return BigInt(std::string(t));
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Ratio(parse_int(text, true));
  const BigInt num = parse_int(text.substr(0, slash), true);
  const BigInt den = parse_int(text.substr(slash + 1), false);
  if (den == 0) throw std::invalid_argument("zero denominator");
  return Ratio(num, den);
}

}  // namespace intnet
