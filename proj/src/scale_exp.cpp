// SPDX-License-Identifier: Apache-2.0
#include "tintin/scale_exp.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tintin {

namespace {

std::int8_t narrow(int v, const char* what) {
  if (v < std::numeric_limits<std::int8_t>::min() ||
      v > std::numeric_limits<std::int8_t>::max()) {
    throw std::overflow_error(std::string("scale exponent ") + what +
                              " out of int8 range: " + std::to_string(v));
  }
  return static_cast<std::int8_t>(v);
}

BigInt ipow(unsigned base, int exp) {
  return boost::multiprecision::pow(BigInt(base), static_cast<unsigned>(exp));
}

}  // namespace

ScaleExp ScaleExp::make(int s, int u, int d) {
  ScaleExp e;
  e.S = narrow(s, "S");
  e.U = narrow(u, "U");
  e.D = narrow(d, "D");
  return e;
}

ScaleExp operator+(const ScaleExp& a, const ScaleExp& b) {
  return ScaleExp::make(a.S + b.S, a.U + b.U, a.D + b.D);
}

ScaleExp operator-(const ScaleExp& a, const ScaleExp& b) {
  return ScaleExp::make(a.S - b.S, a.U - b.U, a.D - b.D);
}

std::string ScaleExp::str() const {
  std::ostringstream os;
  os << '(' << int(S) << ',' << int(U) << ',' << int(D) << ')';
  return os.str();
}

Rational pow2(int k) {
  if (k >= 0) return Rational(BigInt(1) << k);
  return Rational(BigInt(1), BigInt(1) << -k);
}

Rational scale_value(const ScaleExp& e) {
  // 2^S * 2^(2U) * 2^(2D) / (3^U * 5^D), negative U or D invert their factor
  BigInt num = 1;
  BigInt den = 1;
  if (e.U >= 0) den *= ipow(3, e.U); else num *= ipow(3, -e.U);
  if (e.D >= 0) den *= ipow(5, e.D); else num *= ipow(5, -e.D);
  return Rational(num, den) * pow2(e.S + 2 * e.U + 2 * e.D);
}

double scale_value_real(const ScaleExp& e) {
  return std::ldexp(std::pow(4.0 / 3.0, e.U) * std::pow(0.8, e.D), e.S);
}

int floor_log2(const Rational& r) {
  if (r <= 0) throw std::domain_error("floor_log2 of non-positive value");
  const BigInt num = boost::multiprecision::numerator(r);
  const BigInt den = boost::multiprecision::denominator(r);
  int k = static_cast<int>(boost::multiprecision::msb(num)) -
          static_cast<int>(boost::multiprecision::msb(den));
  // k is floor(log2) or one above it
  if (r < pow2(k)) --k;
  return k;
}

std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << boost::multiprecision::numerator(r);
  if (boost::multiprecision::denominator(r) != 1) {
    os << '/' << boost::multiprecision::denominator(r);
  }
  return os.str();
}

}  // namespace tintin
