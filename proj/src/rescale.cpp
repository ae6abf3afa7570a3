// SPDX-License-Identifier: Apache-2.0
#include "tintin/rescale.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace tintin {

Rational Decomposition::approximation() const {
  Rational sum = 0;
  for (int e : exponents) sum += pow2(e);
  return sum;
}

Decomposition decompose(const Rational& r, int n_max) {
  if (r <= 0) throw std::domain_error("decompose: ratio must be positive");
  if (n_max < 1) throw std::domain_error("decompose: n_max must be at least 1");
  Decomposition d;
  d.n_max = n_max;
  Rational rest = r;
  int e = floor_log2(r);
  Rational c = pow2(e);
  while (static_cast<int>(d.exponents.size()) < n_max && rest > 0) {
    if (rest >= c) {
      d.exponents.push_back(e);
      rest -= c;
    }
    --e;
    c /= 2;
  }
  d.residual = rest;
  return d;
}

std::vector<std::int32_t> apply_decomposition(std::span<const std::int32_t> v,
                                              const Decomposition& d) {
  std::vector<std::int64_t> sum(v.size(), 0);
  for (int e : d.exponents) {
    for (std::size_t i = 0; i < v.size(); ++i) sum[i] += shift_and_round(v[i], -e);
  }
  std::vector<std::int32_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (sum[i] > std::numeric_limits<std::int32_t>::max() ||
        sum[i] < std::numeric_limits<std::int32_t>::min()) {
      throw std::overflow_error("apply_decomposition: sum overflows int32");
    }
    out[i] = static_cast<std::int32_t>(sum[i]);
  }
  return out;
}

ScaledData upscale_q(std::span<const std::int32_t> v, int times) {
  if (times < 0) throw std::invalid_argument("upscale_q: negative count");
  ScaledData out{{v.begin(), v.end()}, ScaleExp::make(0, times, 0)};
  for (int t = 0; t < times; ++t) {
    for (auto& q : out.data) q = shift_and_round(q, 1) + shift_and_round(q, 2);
  }
  return out;
}

ScaledData downscale_q(std::span<const std::int32_t> v, int times) {
  if (times < 0) throw std::invalid_argument("downscale_q: negative count");
  ScaledData out{{v.begin(), v.end()}, ScaleExp::make(0, 0, times)};
  for (int t = 0; t < times; ++t) {
    for (auto& q : out.data) {
      const std::int64_t next = std::int64_t{q} + shift_and_round(q, 2);
      if (next > std::numeric_limits<std::int32_t>::max() ||
          next < std::numeric_limits<std::int32_t>::min()) {
        throw std::overflow_error("downscale_q: result overflows int32");
      }
      q = static_cast<std::int32_t>(next);
    }
  }
  return out;
}

AccTensor32 upscale(const AccTensor32& t, int times) {
  auto r = upscale_q(t.data, times);
  return AccTensor32(t.shape, std::move(r.data), t.scale + r.delta);
}

AccTensor32 downscale(const AccTensor32& t, int times) {
  auto r = downscale_q(t.data, times);
  return AccTensor32(t.shape, std::move(r.data), t.scale + r.delta);
}

namespace {

AccTensor32 bring_to(const AccTensor32& t, const ScaleExp& target) {
  AccTensor32 out = shift_scaled(t, target.S - t.scale.S);
  out = upscale(out, target.U - t.scale.U);
  return downscale(out, target.D - t.scale.D);
}

}  // namespace

Aligned align_scales(const AccTensor32& q1, const AccTensor32& q2) {
  const ScaleExp common = ScaleExp::make(std::min(q1.scale.S, q2.scale.S),
                                         std::max(q1.scale.U, q2.scale.U),
                                         std::max(q1.scale.D, q2.scale.D));
  return {bring_to(q1, common), bring_to(q2, common), common};
}

int RescaleEntry::op_count() const {
  return std::abs(int(delta.S)) + int(delta.U) + int(delta.D);
}

RescaleTable build_rescale_table() {
  // (upscales, downscales) pairs with at most two operations in total
  static constexpr int kUpDown[][2] = {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {0, 2}, {1, 1}};
  RescaleTable table;
  for (const auto& ud : kUpDown) {
    for (int shift : {1, 0, -1}) {
      const ScaleExp delta = ScaleExp::make(shift, ud[0], ud[1]);
      const Rational adj = scale_value(delta);
      if (adj <= Rational(1, 2) || adj >= 2) continue;
      const bool seen = std::any_of(table.entries.begin(), table.entries.end(),
                                    [&](const RescaleEntry& e) { return e.adjustment() == adj; });
      if (!seen) table.entries.push_back({1 / adj, delta});
    }
  }
  std::sort(table.entries.begin(), table.entries.end(),
            [](const RescaleEntry& a, const RescaleEntry& b) { return a.q_ratio < b.q_ratio; });
  return table;
}

const RescaleTable& default_rescale_table() {
  static const RescaleTable table = build_rescale_table();
  return table;
}

namespace {

// max(x, 1/x): orders candidates by |log x| without leaving the rationals.
Rational log_distance(const Rational& x) { return x >= 1 ? x : 1 / x; }

}  // namespace

RescaleChoice choose_rescale(const Rational& target_ratio, const RescaleTable& table) {
  if (target_ratio <= 0) throw std::domain_error("choose_rescale: ratio must be positive");
  if (table.entries.empty()) throw std::invalid_argument("choose_rescale: empty table");
  bool have = false;
  RescaleChoice best;
  Rational best_dist;
  int best_ops = 0;
  for (const auto& entry : table.entries) {
    const Rational adj = entry.adjustment();
    const int k0 = floor_log2(target_ratio / adj);
    for (int k : {k0, k0 + 1}) {
      RescaleChoice c;
      c.entry = entry;
      c.extra_shift = k;
      c.delta = entry.delta + ScaleExp::shift(k);
      c.adjustment = adj * pow2(k);
      const Rational dist = log_distance(c.adjustment / target_ratio);
      const int ops = std::abs(int(c.delta.S)) + c.delta.U + c.delta.D;
      // equal deltas reached from different entries: keep the smaller extra shift
      const bool better =
          !have || dist < best_dist ||
          (dist == best_dist &&
           (ops < best_ops ||
            (ops == best_ops && (c.adjustment < best.adjustment ||
                                 (c.adjustment == best.adjustment && std::abs(k) < std::abs(best.extra_shift))))));
      if (better) {
        have = true;
        best = c;
        best_dist = dist;
        best_ops = ops;
      }
    }
  }
  return best;
}

AccTensor32 apply_rescale(const AccTensor32& t, const ScaleExp& delta) {
  AccTensor32 out = delta.S < 0 ? shift_scaled(t, delta.S) : t;
  out = upscale(out, delta.U);
  out = downscale(out, delta.D);
  return delta.S > 0 ? shift_scaled(out, delta.S) : out;
}

AccTensor32 rescale_to_nearest(const AccTensor32& t, const Rational& target_ratio,
                               const RescaleTable& table) {
  return apply_rescale(t, choose_rescale(target_ratio, table).delta);
}

}  // namespace tintin
