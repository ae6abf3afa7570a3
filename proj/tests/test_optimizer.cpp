// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "support/checks.hpp"
#include "tintin/optimizer.hpp"

namespace tintin {
namespace {

LinearLayer make_layer(std::vector<std::int32_t> w, ScaleExp e = {}) {
  const std::size_t n = w.size();
  return LinearLayer(QTensor8::from_values({n, 1}, w, Signedness::kSigned, e), Activation::kIdentity);
}

AccTensor32 make_grad(std::vector<std::int32_t> g, ScaleExp e = {}) {
  const std::size_t n = g.size();
  return AccTensor32(Shape{n, 1}, std::move(g), e);
}

TEST(Update, HandTrace) {
  LinearLayer layer = make_layer({64});
  const UpdateReport r = update_weights(layer, make_grad({32}), UpdateConfig{4});
  EXPECT_EQ(r.weight_bits, 7);
  EXPECT_EQ(r.grad_bits, 6);
  EXPECT_EQ(r.target_bits, 3);
  EXPECT_EQ(r.applied_update.data, (std::vector<std::int32_t>{4}));
  EXPECT_EQ(layer.weights().values(), (std::vector<std::int32_t>{60}));
  EXPECT_EQ(layer.weights().scale, ScaleExp{});
  const BoundCheck b = update_step_magnitude_bound(r.aligned_weights, r.applied_update, 4);
  EXPECT_TRUE(b.ok);
  EXPECT_EQ(b.max_update, 4);
  EXPECT_EQ(b.limit, 8);
}

TEST(Update, SmallGradientIsNotAmplified) {
  LinearLayer layer = make_layer({100, -50});
  const UpdateReport r = update_weights(layer, make_grad({1, -2}), UpdateConfig{4});
  EXPECT_EQ(r.applied_update.data, (std::vector<std::int32_t>{1, -2}));
  EXPECT_EQ(layer.weights().values(), (std::vector<std::int32_t>{99, -48}));
}

TEST(Update, NarrowWeightsWidenedForTheStep) {
  LinearLayer layer = make_layer({3, -1}, ScaleExp::make(2, 0, 0));
  const UpdateReport r = update_weights(layer, make_grad({1, 0}, ScaleExp::make(-10, 0, 0)), UpdateConfig{4});
  // [3] -> [96] at S=-3 for the update, then aligned to the gradient's S=-10;
  // the result is rescaled back to the stored S=2
  EXPECT_EQ(r.aligned_scale, ScaleExp::make(-10, 0, 0));
  EXPECT_EQ(r.weight_bits, 14);
  EXPECT_EQ(layer.weights().scale, ScaleExp::make(2, 0, 0));
  // 3 * 2^2 - tiny step, still about 12 in real units
  const auto real = dequantize(layer.weights());
  EXPECT_NEAR(real[0], 12.0, 0.2);
  EXPECT_NEAR(real[1], -4.0, 0.1);
}

TEST(Update, ZeroGradientIsNoOp) {
  LinearLayer layer = make_layer({17, -90}, ScaleExp::make(-3, 1, 0));
  const UpdateReport r = update_weights(layer, make_grad({0, 0}, ScaleExp::make(-9, 0, 0)), UpdateConfig{4});
  EXPECT_TRUE(r.zero_gradient);
  EXPECT_EQ(layer.weights().values(), (std::vector<std::int32_t>{17, -90}));
  EXPECT_EQ(layer.weights().scale, ScaleExp::make(-3, 1, 0));
}

TEST(Update, ExcessCompoundExponentsFolded) {
  LinearLayer layer = make_layer({80, -40}, ScaleExp::make(-6, 0, 0));
  const UpdateReport r = update_weights(layer, make_grad({3000, 1000}, ScaleExp::make(-20, 3, 2)), UpdateConfig{3});
  EXPECT_EQ(r.aligned_scale.U, 0);
  EXPECT_EQ(r.aligned_scale.D, 0);
  EXPECT_LE(effective_bitwidth(layer.weights()), 7);
  EXPECT_TRUE(update_step_magnitude_bound(r.aligned_weights, r.applied_update, 3).ok);
}

TEST(Update, WideGradientDoesNotOverflow) {
  LinearLayer layer = make_layer({127, -127}, ScaleExp::make(-4, 2, 1));
  const std::int32_t big = (std::int32_t{1} << 30) + 12345;
  const UpdateReport r = update_weights(layer, make_grad({big, -big}, ScaleExp::make(-30, 4, 4)), UpdateConfig{6});
  EXPECT_LE(effective_bitwidth(layer.weights()), 7);
  EXPECT_TRUE(update_step_magnitude_bound(r.aligned_weights, r.applied_update, 6).ok);
}

TEST(Update, LargeStepSaturatesToBound) {
  LinearLayer layer = make_layer({127});
  const UpdateReport r = update_weights(layer, make_grad({127}, ScaleExp::make(20, 0, 0)), UpdateConfig{2});
  // b = 5, so the applied step is at most 31
  EXPECT_EQ(r.target_bits, 5);
  EXPECT_LE(r.max_update, 31);
  EXPECT_LE(effective_bitwidth(layer.weights()), 7);
}

// All-zero weights have no magnitude to bound the step by; the update still
// produces 7-bit weights with a 1-bit step.
TEST(Update, AllZeroWeightsTakeOneBitStep) {
  LinearLayer layer = make_layer({0, 0});
  const UpdateReport r = update_weights(layer, make_grad({5, -9}), UpdateConfig{4});
  EXPECT_EQ(r.target_bits, 1);
  EXPECT_LE(r.max_update, 1);
  EXPECT_LE(effective_bitwidth(layer.weights()), 7);
}

TEST(Update, RejectsBadInput) {
  LinearLayer layer = make_layer({1, 2});
  EXPECT_THROW(update_weights(layer, make_grad({1}), UpdateConfig{4}), std::invalid_argument);
  EXPECT_THROW(update_weights(layer, make_grad({1, 1}), UpdateConfig{0}), std::invalid_argument);
  EXPECT_THROW(update_weights(layer, make_grad({1, 1}), UpdateConfig{7}), std::invalid_argument);
}

TEST(Update, DropsForwardCache) {
  LinearLayer layer = make_layer({1});
  MacCounters c;
  forward(layer, QTensor8::from_values({1, 1}, std::vector<std::int32_t>{1}, Signedness::kUnsigned), c);
  ASSERT_TRUE(layer.has_cache());
  update_weights(layer, make_grad({1}), UpdateConfig{4});
  EXPECT_FALSE(layer.has_cache());
}

TEST(Update, FactorSixBound) {
  LinearLayer layer = make_layer({127, -100, 64});
  const UpdateReport r = update_weights(layer, make_grad({30000, -20000, 5}, ScaleExp::make(-8, 0, 0)), UpdateConfig{6});
  // aligned weights carry 7 + 8 bits, so the step stays below 2^9
  EXPECT_EQ(r.weight_bits, 15);
  EXPECT_LT(r.max_update, 1 << 9);
  EXPECT_TRUE(update_step_magnitude_bound(r.aligned_weights, r.applied_update, 6).ok);
}

// Roundings: two per upscale, one per downscale, one per right shift.
TEST(Update, NewWeightsMatchAlignedDifference) {
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<int> w(-127, 127), g(-50000, 50000), s(-12, 0), ud(0, 2), mm(2, 6);
  int checked = 0;
  for (int t = 0; t < 2000; ++t) {
    LinearLayer layer = make_layer({w(rng), w(rng), 127}, ScaleExp::make(s(rng), ud(rng), ud(rng)));
    const UpdateReport r = update_weights(layer, make_grad({g(rng), g(rng), g(rng)}, ScaleExp::make(s(rng) - 10, ud(rng), ud(rng))),
                                          UpdateConfig{mm(rng)});
    if (r.zero_gradient || r.weight_clamped > 0) continue;
    const ScaleExp d = r.rescale.delta;
    const int roundings = 2 * d.U + d.D + (d.S > 0 ? 1 : 0) + (r.final_shift > 0 ? 1 : 0);
    const double unit = scale_value_real(layer.weights().scale);
    const auto after = dequantize(layer.weights());
    const double s_al = scale_value_real(r.aligned_scale);
    for (std::size_t i = 0; i < after.size(); ++i) {
      const double want = double(r.aligned_weights.data[i] - r.applied_update.data[i]) * s_al;
      ASSERT_LE(std::abs(after[i] - want), roundings * unit + 1e-9 * std::abs(want)) << "case " << t;
    }
    ++checked;
  }
  EXPECT_GT(checked, 1500);
}

TEST(Update, FuzzContract) {
  const auto r = testing::check_update_fuzz(2000, 31);
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

}  // namespace
}  // namespace tintin
