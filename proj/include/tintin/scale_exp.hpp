// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_SCALE_EXP_HPP_
#define TINTIN_SCALE_EXP_HPP_

#include <cstdint>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace tintin {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Compound exponent of a scaling factor: s = 2^S * (4/3)^U * (4/5)^D.
//
// One right shift increments S, one upscale (Q *= 3/4) increments U and one
// downscale (Q *= 5/4) increments D; the real value s*Q is kept constant.
// Products of scaled values add exponents componentwise.
struct ScaleExp {
  std::int8_t S = 0;
  std::int8_t U = 0;
  std::int8_t D = 0;

  friend bool operator==(const ScaleExp&, const ScaleExp&) = default;

  // Componentwise sum. Throws std::overflow_error if a component leaves int8.
  friend ScaleExp operator+(const ScaleExp& a, const ScaleExp& b);
  friend ScaleExp operator-(const ScaleExp& a, const ScaleExp& b);

  ScaleExp& operator+=(const ScaleExp& o) { return *this = *this + o; }

  static ScaleExp shift(int s) { return make(s, 0, 0); }
  // Builds from wide integers, checking the int8 range.
  static ScaleExp make(int s, int u, int d);

  std::string str() const;
};

static_assert(sizeof(ScaleExp) == 3, "scale exponents occupy 3 bytes");

// Exact value 2^S * 4^U * 4^D / (3^U * 5^D).
Rational scale_value(const ScaleExp& e);

// Floating-point view of scale_value, for metrics and logs only.
double scale_value_real(const ScaleExp& e);

// 2^k as an exact rational (k may be negative).
Rational pow2(int k);

// floor(log2(r)) for r > 0.
int floor_log2(const Rational& r);

std::string to_string(const Rational& r);

}  // namespace tintin

#endif  // TINTIN_SCALE_EXP_HPP_
