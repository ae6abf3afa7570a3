// SPDX-License-Identifier: Apache-2.0
#include "tintin/inttensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tintin {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

AccTensor32::AccTensor32(Shape s, std::vector<std::int32_t> d, ScaleExp e)
    : shape(std::move(s)), data(std::move(d)), scale(e) {
  if (data.size() != shape_size(shape)) {
    throw std::invalid_argument("AccTensor32: data size does not match shape");
  }
}

QTensor8::QTensor8(Shape shape, Signedness sign, ScaleExp e)
    : scale(e), shape_(std::move(shape)), sign_(sign), bytes_(shape_size(shape_), 0) {}

QTensor8 QTensor8::from_values(Shape shape, std::span<const std::int32_t> values,
                               Signedness sign, ScaleExp e) {
  QTensor8 t(std::move(shape), sign, e);
  if (values.size() != t.size()) {
    throw std::invalid_argument("QTensor8: value count does not match shape");
  }
  for (std::size_t i = 0; i < values.size(); ++i) t.set(i, values[i]);
  return t;
}

void QTensor8::set(std::size_t i, std::int32_t v) {
  if (v < min_value(sign_) || v > max_value(sign_)) {
    throw std::out_of_range("QTensor8: value " + std::to_string(v) +
                            " outside 8-bit range");
  }
  bytes_[i] = static_cast<std::uint8_t>(v);
}

std::vector<std::int32_t> QTensor8::values() const {
  std::vector<std::int32_t> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = (*this)[i];
  return out;
}

int effective_bitwidth(std::span<const std::int32_t> v) {
  std::uint32_t max_mag = 0;
  for (auto x : v) {
    // magnitude in uint32 so that INT32_MIN is representable
    const auto mag = x < 0 ? 0u - static_cast<std::uint32_t>(x) : static_cast<std::uint32_t>(x);
    max_mag = std::max(max_mag, mag);
  }
  return static_cast<int>(std::bit_width(max_mag));
}

int effective_bitwidth(const AccTensor32& t) { return effective_bitwidth(t.data); }

int effective_bitwidth(const QTensor8& t) {
  const auto v = t.values();
  return effective_bitwidth(v);
}

std::int32_t shift_and_round(std::int32_t v, int k) {
  if (k == 0) return v;
  const std::int64_t wide = v;
  if (k < 0) {
    if (v == 0) return 0;
    if (-k >= 32) throw std::overflow_error("shift_and_round: left shift overflows int32");
    const std::int64_t shifted = wide * (std::int64_t{1} << -k);
    if (shifted > std::numeric_limits<std::int32_t>::max() ||
        shifted < std::numeric_limits<std::int32_t>::min()) {
      throw std::overflow_error("shift_and_round: left shift overflows int32");
    }
    return static_cast<std::int32_t>(shifted);
  }
  if (k > 40) return 0;
  const std::int64_t mag = wide < 0 ? -wide : wide;
  const std::int64_t r = (mag + (std::int64_t{1} << (k - 1))) >> k;
  return static_cast<std::int32_t>(wide < 0 ? -r : r);
}

std::vector<std::int32_t> shift_and_round(std::span<const std::int32_t> v, int k) {
  std::vector<std::int32_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = shift_and_round(v[i], k);
  return out;
}

AccTensor32 shift_scaled(const AccTensor32& t, int k) {
  return AccTensor32(t.shape, shift_and_round(t.data, k), t.scale + ScaleExp::shift(k));
}

Saturated saturate_to_8(const AccTensor32& t, Signedness sign) {
  Saturated out{QTensor8(t.shape, sign, t.scale), 0};
  const auto lo = QTensor8::min_value(sign);
  const auto hi = QTensor8::max_value(sign);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto v = t.data[i];
    const auto c = std::clamp(v, lo, hi);
    if (c != v) ++out.clamped;
    out.tensor.set(i, c);
  }
  return out;
}

namespace {

template <typename A, typename W>
void dense_kernel(std::span<const A> a, std::span<const W> w, std::size_t b, std::size_t n,
                  std::size_t m, std::vector<std::int32_t>& out, MacCounters& counters) {
  for (std::size_t i = 0; i < b; ++i) {
    std::int32_t* acc = out.data() + i * m;
    for (std::size_t k = 0; k < n; ++k) {
      const std::int32_t av = a[i * n + k];
      const W* row = w.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += av * std::int32_t(row[j]);
    }
  }
  counters.total_macs += static_cast<std::uint64_t>(b) * n * m;
}

template <typename A, typename W>
void matmul_kernel(std::span<const A> a, std::span<const W> w, std::size_t b, std::size_t n,
                   std::size_t m, std::vector<std::int32_t>& out, MacCounters& counters,
                   MatmulMode mode) {
  if (mode == MatmulMode::kDense) {
    dense_kernel(a, w, b, n, m, out, counters);
    return;
  }
  std::vector<std::uint64_t> zeros_in_row(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    zeros_in_row[k] = static_cast<std::uint64_t>(
        std::count(w.begin() + k * m, w.begin() + (k + 1) * m, W{0}));
  }
  for (std::size_t i = 0; i < b; ++i) {
    std::int32_t* acc = out.data() + i * m;
    for (std::size_t k = 0; k < n; ++k) {
      const std::int32_t av = a[i * n + k];
      if (av == 0) {
        counters.skipped_macs += m;
        continue;
      }
      counters.skipped_macs += zeros_in_row[k];
      const W* row = w.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += av * std::int32_t(row[j]);
    }
  }
  counters.total_macs += static_cast<std::uint64_t>(b) * n * m;
}

template <typename A>
void dispatch_w(std::span<const A> a, const QTensor8& w, std::size_t b, std::size_t n,
                std::size_t m, std::vector<std::int32_t>& out, MacCounters& counters, MatmulMode mode) {
  if (w.is_signed()) {
    matmul_kernel(a, w.as_int8(), b, n, m, out, counters, mode);
  } else {
    matmul_kernel(a, w.as_uint8(), b, n, m, out, counters, mode);
  }
}

}  // namespace

AccTensor32 int_matmul(const QTensor8& a, const QTensor8& w, MacCounters& counters, MatmulMode mode) {
  if (a.shape().size() != 2 || w.shape().size() != 2) {
    throw std::invalid_argument("int_matmul: operands must be rank 2");
  }
  const std::size_t b = a.rows(), n = a.cols(), m = w.cols();
  if (w.rows() != n) {
    throw std::invalid_argument("int_matmul: inner dimensions differ (" + std::to_string(n) +
                                " vs " + std::to_string(w.rows()) + ")");
  }
  if (n > kMaxInnerDim) throw std::invalid_argument("int_matmul: inner dimension above 2^16");

  AccTensor32 out({b, m}, a.scale + w.scale);
  if (a.is_signed()) {
    dispatch_w(a.as_int8(), w, b, n, m, out.data, counters, mode);
  } else {
    dispatch_w(a.as_uint8(), w, b, n, m, out.data, counters, mode);
  }
  return out;
}

QTensor8 transpose(const QTensor8& t) {
  const std::size_t r = t.rows(), c = t.cols();
  QTensor8 out({c, r}, t.signedness(), t.scale);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.set(j * r + i, t[i * c + j]);
  return out;
}

AccTensor32 widen(const QTensor8& t) { return AccTensor32(t.shape(), t.values(), t.scale); }

std::vector<double> dequantize(const QTensor8& t) {
  const double s = scale_value_real(t.scale);
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] * s;
  return out;
}

std::vector<double> dequantize(const AccTensor32& t) {
  const double s = scale_value_real(t.scale);
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t.data[i] * s;
  return out;
}

}  // namespace tintin
