// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_INTTENSOR_HPP_
#define TINTIN_INTTENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tintin/scale_exp.hpp"

namespace tintin {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

enum class Signedness : std::uint8_t { kSigned, kUnsigned };

// Largest inner dimension accepted by int_matmul; with 8-bit operands every
// int32 accumulation is then overflow-free.
inline constexpr std::size_t kMaxInnerDim = std::size_t{1} << 16;

struct MacCounters {
  std::uint64_t total_macs = 0;
  std::uint64_t skipped_macs = 0;

  MacCounters& operator+=(const MacCounters& o) {
    total_macs += o.total_macs;
    skipped_macs += o.skipped_macs;
    return *this;
  }
  double skipped_fraction() const {
    return total_macs == 0 ? 0.0 : double(skipped_macs) / double(total_macs);
  }
};

// 32-bit accumulator tensor: matmul outputs, loss errors, widened operands.
struct AccTensor32 {
  Shape shape;
  std::vector<std::int32_t> data;
  ScaleExp scale;

  AccTensor32() = default;
  AccTensor32(Shape s, ScaleExp e = {})
      : shape(std::move(s)), data(shape_size(shape), 0), scale(e) {}
  AccTensor32(Shape s, std::vector<std::int32_t> d, ScaleExp e = {});

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  std::int32_t at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
};

// 8-bit tensor, int8 or uint8 depending on signedness. Values are exposed as
// int32; storage is one byte per element.
class QTensor8 {
 public:
  QTensor8() = default;
  QTensor8(Shape shape, Signedness sign, ScaleExp scale = {});

  // Throws std::out_of_range if any value is outside the signedness range.
  static QTensor8 from_values(Shape shape, std::span<const std::int32_t> values,
                              Signedness sign, ScaleExp scale = {});

  static std::int32_t min_value(Signedness s) { return s == Signedness::kSigned ? -128 : 0; }
  static std::int32_t max_value(Signedness s) { return s == Signedness::kSigned ? 127 : 255; }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return bytes_.size(); }
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }
  Signedness signedness() const { return sign_; }
  bool is_signed() const { return sign_ == Signedness::kSigned; }

  std::int32_t operator[](std::size_t i) const {
    return is_signed() ? std::int32_t(static_cast<std::int8_t>(bytes_[i]))
                       : std::int32_t(bytes_[i]);
  }
  std::int32_t at(std::size_t r, std::size_t c) const { return (*this)[r * cols() + c]; }
  void set(std::size_t i, std::int32_t v);

  std::vector<std::int32_t> values() const;

  std::span<const std::int8_t> as_int8() const {
    return {reinterpret_cast<const std::int8_t*>(bytes_.data()), bytes_.size()};
  }
  std::span<const std::uint8_t> as_uint8() const { return bytes_; }

  ScaleExp scale;

  friend bool operator==(const QTensor8& a, const QTensor8& b) {
    return a.shape_ == b.shape_ && a.sign_ == b.sign_ && a.scale == b.scale &&
           a.bytes_ == b.bytes_;
  }

 private:
  Shape shape_;
  Signedness sign_ = Signedness::kSigned;
  std::vector<std::uint8_t> bytes_;
};

// Bit length of max|v|: 0 for an all-zero tensor, else floor(log2 max|v|) + 1.
int effective_bitwidth(std::span<const std::int32_t> v);
int effective_bitwidth(const AccTensor32& t);
int effective_bitwidth(const QTensor8& t);

// k > 0: sign(v) * ((|v| + 2^(k-1)) >> k), rounding half away from zero.
// k < 0: exact left shift; throws std::overflow_error if the result leaves int32.
std::int32_t shift_and_round(std::int32_t v, int k);
std::vector<std::int32_t> shift_and_round(std::span<const std::int32_t> v, int k);

// shift_and_round on the data with S += k, so the represented value is kept.
AccTensor32 shift_scaled(const AccTensor32& t, int k);

struct Saturated {
  QTensor8 tensor;
  std::size_t clamped = 0;
};

// Clamps each element into the 8-bit range; scale is carried over unchanged.
Saturated saturate_to_8(const AccTensor32& t, Signedness sign);

enum class MatmulMode : std::uint8_t { kSkipZeros, kDense };

// Exact integer product [b x n] * [n x m] -> [b x m] with the scale exponents
// summed. In kSkipZeros mode MACs where either operand is zero are skipped
// and counted; kDense performs and counts every MAC as unskipped.
AccTensor32 int_matmul(const QTensor8& a, const QTensor8& w, MacCounters& counters,
                       MatmulMode mode = MatmulMode::kSkipZeros);

QTensor8 transpose(const QTensor8& t);
AccTensor32 widen(const QTensor8& t);

// Metrics-only real views: data * scale_value(scale).
std::vector<double> dequantize(const QTensor8& t);
std::vector<double> dequantize(const AccTensor32& t);

}  // namespace tintin

#endif  // TINTIN_INTTENSOR_HPP_
