// SPDX-License-Identifier: Apache-2.0
#include "tintin/optimizer.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tintin {

namespace {

// Headroom left on the aligned weight: 7 bits shifted left by at most this.
constexpr int kMaxWeightShift = 23;
constexpr std::int32_t kMaxWeight = 127;
// Gradient width before a non-power-of-two rescale.
constexpr int kGradientWorkBits = 20;

bool all_zero(const AccTensor32& t) {
  return std::all_of(t.data.begin(), t.data.end(), [](std::int32_t v) { return v == 0; });
}

// Moves the gradient's U and D onto the weight's. Missing upscales and
// downscales are applied directly; any excess cannot be undone by those
// operations, so it is folded into the data with a binary decomposition of
// (4/3)^dU * (4/5)^dD, dropping the excess from the exponent.
AccTensor32 match_compound_exponents(AccTensor32 g, const ScaleExp& w) {
  if (g.scale.U == w.U && g.scale.D == w.D) return g;
  // Work at kGradientWorkBits: wide enough for the rounding, narrow enough
  // that (4/3)^U and 5/4 factors stay inside int32.
  const int bits = effective_bitwidth(g);
  int shift = bits - kGradientWorkBits;
  shift = shift > 0 ? std::min(shift, 127 - g.scale.S) : std::max(shift, -(g.scale.S + 120));
  if (shift != 0) g = shift_scaled(g, shift);

  const int excess_u = std::max(g.scale.U - w.U, 0);
  const int excess_d = std::max(g.scale.D - w.D, 0);
  if (excess_u > 0 || excess_d > 0) {
    const ScaleExp excess = ScaleExp::make(0, excess_u, excess_d);
    const Decomposition d = decompose(scale_value(excess));
    g = AccTensor32(g.shape, apply_decomposition(g.data, d), g.scale - excess);
  }
  g = upscale(g, w.U - g.scale.U);
  return downscale(g, w.D - g.scale.D);
}

}  // namespace

void UpdateConfig::validate() const {
  if (m < 1 || m > 6) throw std::invalid_argument("update factor m must be in [1, 6]");
  if (table == nullptr || table->entries.empty()) {
    throw std::invalid_argument("update config needs a rescale table");
  }
}

UpdateReport update_weights(LinearLayer& layer, const AccTensor32& g32, const UpdateConfig& cfg) {
  cfg.validate();
  const QTensor8& w = layer.weights();
  if (g32.shape != w.shape()) throw std::invalid_argument("update: gradient shape mismatch");

  UpdateReport rep;
  rep.old_scale = w.scale;
  if (all_zero(g32)) {
    rep.zero_gradient = true;
    rep.aligned_scale = rep.new_scale = w.scale;
    layer.clear_cache();
    return rep;
  }

  // Weights at 32 bits with exactly 7 magnitude bits (exact left shift).
  AccTensor32 w32 = widen(w);
  const int stored_bits = effective_bitwidth(w32);
  if (stored_bits > 0 && stored_bits < 7) w32 = shift_scaled(w32, stored_bits - 7);

  AccTensor32 g = match_compound_exponents(g32, w32.scale);
  if (w32.scale.S - g.scale.S > kMaxWeightShift) {
    g = shift_scaled(g, w32.scale.S - g.scale.S - kMaxWeightShift);
  }

  // Scale alignment; U and D already agree, so only S moves.
  const ScaleExp common = ScaleExp::make(std::min(w32.scale.S, g.scale.S), w32.scale.U, w32.scale.D);
  rep.aligned_scale = common;
  AccTensor32 w_al = shift_scaled(w32, common.S - w32.scale.S);
  const int g_lift = g.scale.S - common.S;  // pending exact left shift of g
  const int g_bits = effective_bitwidth(g);

  rep.weight_bits = effective_bitwidth(w_al);
  rep.grad_bits = g_bits == 0 ? 0 : g_bits + g_lift;
  rep.target_bits = std::max(rep.weight_bits - cfg.m, 1);

  // shift_and_round(g << lift, b_g* - b) == shift_and_round(g, bits(g) - b),
  // which never materializes the lifted gradient.
  AccTensor32 upd(g.shape, common);
  if (rep.grad_bits > rep.target_bits) {
    upd.data = shift_and_round(g.data, g_bits - rep.target_bits);
    const std::int32_t cap = (std::int32_t{1} << rep.target_bits) - 1;
    for (auto& v : upd.data) {
      if (std::abs(v) > cap) {
        v = v < 0 ? -cap : cap;
        ++rep.grad_clamped;
      }
    }
  } else {
    upd.data = shift_and_round(g.data, -g_lift);
  }

  AccTensor32 w_new(w_al.shape, common);
  for (std::size_t i = 0; i < w_new.size(); ++i) {
    w_new.data[i] = w_al.data[i] - upd.data[i];
    rep.max_update = std::max(rep.max_update, std::abs(upd.data[i]));
  }
  rep.aligned_weights = std::move(w_al);
  rep.applied_update = std::move(upd);

  // Back toward the pre-update weight scale, then down to 7 magnitude bits
  // if the update grew the range.
  rep.rescale = choose_rescale(scale_value(rep.old_scale - common), *cfg.table);
  w_new = apply_rescale(w_new, rep.rescale.delta);
  rep.final_shift = std::max(effective_bitwidth(w_new) - 7, 0);
  w_new = shift_scaled(w_new, rep.final_shift);
  // a rounding carry can reach 128; stored weights stay within 7 bits
  for (auto& v : w_new.data) {
    if (std::abs(v) > kMaxWeight) {
      v = v < 0 ? -kMaxWeight : kMaxWeight;
      ++rep.weight_clamped;
    }
  }
  Saturated sat = saturate_to_8(w_new, Signedness::kSigned);
  rep.new_scale = sat.tensor.scale;
  layer.set_weights(std::move(sat.tensor));
  return rep;
}

BoundCheck update_step_magnitude_bound(const AccTensor32& aligned_weights,
                                       const AccTensor32& applied_update, int m) {
  BoundCheck c;
  for (auto v : applied_update.data) c.max_update = std::max<std::int64_t>(c.max_update, std::abs(std::int64_t{v}));
  const int exponent = effective_bitwidth(aligned_weights) - m;
  // 2^exponent for a possibly negative exponent; compare max < 2^e exactly
  c.limit = exponent >= 0 ? (std::int64_t{1} << exponent) : 0;
  c.ok = exponent >= 0 ? c.max_update < c.limit : c.max_update == 0;
  if (!c.ok) {
    std::ostringstream os;
    os << "update magnitude " << c.max_update << " not below 2^" << exponent
       << " (aligned weight bits " << effective_bitwidth(aligned_weights) << ", m=" << m << ")";
    c.message = os.str();
  }
  return c;
}

}  // namespace tintin
