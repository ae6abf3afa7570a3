// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_RESCALE_HPP_
#define TINTIN_RESCALE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "tintin/inttensor.hpp"
#include "tintin/scale_exp.hpp"

namespace tintin {

inline constexpr int kDefaultDecompositionTerms = 3;

// Greedy sum of distinct powers of two approximating a ratio from below.
// Exponent e > 0 means a left shift by e, e < 0 a right shift by -e.
struct Decomposition {
  std::vector<int> exponents;  // strictly decreasing
  int n_max = kDefaultDecompositionTerms;
  Rational residual;  // ratio - sum(2^e), always >= 0

  Rational approximation() const;
};

// Throws std::domain_error if r <= 0 or n_max < 1.
Decomposition decompose(const Rational& r, int n_max = kDefaultDecompositionTerms);

// sum over e of shift_and_round(v, -e); approximates v * ratio.
std::vector<std::int32_t> apply_decomposition(std::span<const std::int32_t> v,
                                              const Decomposition& d);

struct ScaledData {
  std::vector<std::int32_t> data;
  ScaleExp delta;
};

// Q <- (Q >> 1) + (Q >> 2) per application, i.e. Q * 3/4 with U += 1.
ScaledData upscale_q(std::span<const std::int32_t> v, int times);
// Q <- Q + (Q >> 2) per application, i.e. Q * 5/4 with D += 1.
// Throws std::overflow_error if an intermediate leaves int32.
ScaledData downscale_q(std::span<const std::int32_t> v, int times);

AccTensor32 upscale(const AccTensor32& t, int times);
AccTensor32 downscale(const AccTensor32& t, int times);

struct Aligned {
  AccTensor32 first;
  AccTensor32 second;
  ScaleExp common;
};

// Brings both tensors to (min S, max U, max D): left shift, then upscale,
// then downscale, so the only rounding happens after the exact shift.
Aligned align_scales(const AccTensor32& q1, const AccTensor32& q2);

// One reachable scale adjustment. Applying it multiplies the data by q_ratio
// and adds delta to the scale exponent; q_ratio * scale_value(delta) == 1.
struct RescaleEntry {
  Rational q_ratio;
  ScaleExp delta;

  int upscales() const { return delta.U; }
  int downscales() const { return delta.D; }
  int shift() const { return delta.S; }  // > 0 right shift, < 0 left shift
  int op_count() const;
  Rational adjustment() const { return scale_value(delta); }
};

struct RescaleTable {
  std::vector<RescaleEntry> entries;  // sorted by q_ratio
};

// Up to two combined up/downscales times a 1-bit shift in either direction,
// keeping the adjustments strictly inside (1/2, 2).
RescaleTable build_rescale_table();

// Built once on first use.
const RescaleTable& default_rescale_table();

struct RescaleChoice {
  RescaleEntry entry;  // table entry
  int extra_shift = 0;  // additional S delta combined with the entry
  ScaleExp delta;       // entry.delta + extra_shift
  Rational adjustment;  // scale_value(delta)
};

// Table entry times 2^k whose adjustment is closest to target_ratio in log
// space. Ties go to fewer operations, then to the smaller adjustment, then to
// the smaller extra shift.
RescaleChoice choose_rescale(const Rational& target_ratio, const RescaleTable& table);

// Applies a chosen adjustment: left shift, upscales, downscales, right shift.
AccTensor32 apply_rescale(const AccTensor32& t, const ScaleExp& delta);

AccTensor32 rescale_to_nearest(const AccTensor32& t, const Rational& target_ratio,
                               const RescaleTable& table = default_rescale_table());

}  // namespace tintin

#endif  // TINTIN_RESCALE_HPP_
