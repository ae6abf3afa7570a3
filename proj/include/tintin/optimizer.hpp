// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_OPTIMIZER_HPP_
#define TINTIN_OPTIMIZER_HPP_

#include <cstddef>
#include <string>

#include "tintin/inttensor.hpp"
#include "tintin/layers.hpp"
#include "tintin/rescale.hpp"

namespace tintin {

inline constexpr int kDefaultUpdateFactor = 4;

struct UpdateConfig {
  int m = kDefaultUpdateFactor;  // bit gap between aligned weight and update
  const RescaleTable* table = &default_rescale_table();

  void validate() const;
};

struct UpdateReport {
  bool zero_gradient = false;
  ScaleExp old_scale;
  ScaleExp aligned_scale;  // common scale of weight and update
  ScaleExp new_scale;
  int weight_bits = 0;     // b_w*, aligned weight
  int grad_bits = 0;       // b_g*, aligned gradient
  int target_bits = 0;     // b
  int max_update = 0;      // max |applied update|
  std::size_t grad_clamped = 0;   // rounding carries saturated to 2^b - 1
  std::size_t weight_clamped = 0; // final int8 saturation
  RescaleChoice rescale;
  int final_shift = 0;
  AccTensor32 aligned_weights;  // before the subtraction
  AccTensor32 applied_update;   // g', at aligned_scale
};

// Integer weight update: align weight and gradient, shift the gradient to
// b_w* - m bits, subtract, rescale toward the previous weight scale and
// round back to 7 magnitude bits. Drops the layer's forward cache.
UpdateReport update_weights(LinearLayer& layer, const AccTensor32& g32, const UpdateConfig& cfg);

struct BoundCheck {
  bool ok = true;
  std::int64_t max_update = 0;
  std::int64_t limit = 0;  // 2^(b_w* - m)
  std::string message;
};

// max|g'| < 2^(b_w* - m) on an aligned weight/update pair.
BoundCheck update_step_magnitude_bound(const AccTensor32& aligned_weights,
                                       const AccTensor32& applied_update, int m);

}  // namespace tintin

#endif  // TINTIN_OPTIMIZER_HPP_
