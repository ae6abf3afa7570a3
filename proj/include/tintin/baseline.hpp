// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_BASELINE_HPP_
#define TINTIN_BASELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tintin/int_model.hpp"
#include "tintin/layers.hpp"

namespace tintin {

// Floating-point reference network with the integer model's architecture
// (no biases, ReLU on every layer but the last).
struct FpModel {
  ModelSpec spec;
  std::vector<std::vector<double>> weights;   // layer l: [widths[l] x widths[l+1]]
  std::vector<std::vector<double>> velocity;  // momentum buffers
  double lr = 0.1;
  double momentum = 0.0;

  // Glorot-uniform init drawn from the same seeds as the integer model.
  static FpModel init(const ModelSpec& spec, double lr, double momentum);
};

// Output of the network, [rows x widths.back()].
std::vector<double> fp_forward(const FpModel& model, const BatchView& batch);

struct FpGradients {
  std::vector<std::vector<double>> grads;  // d(mean batch loss)/dW
  double loss = 0.0;
  std::size_t correct = 0;
};

// MSE (target = input, mean over output elements) or softmax cross-entropy.
FpGradients fp_gradients(const FpModel& model, const BatchView& batch);

// v <- mu*v + g, w <- w - (lr/b) * v with g the batch-summed gradient.
// Returns the pre-update loss.
FpGradients fp_train_step(FpModel& model, const BatchView& batch);

double fp_loss(const FpModel& model, const BatchView& batch);

struct MemoryEstimate {
  std::size_t params_bytes = 0;
  std::size_t activations_bytes = 0;
  std::size_t dynamic_bytes = 0;
  std::size_t total_bytes = 0;
};

// Parameters and cached layer outputs at element_bytes each, plus int32/fp32
// scratch for the largest weight and the largest batched activation.
MemoryEstimate estimate_memory(const ModelSpec& spec, std::size_t batch, std::size_t element_bytes);

// Naive triple loop in 64-bit, [b x n] * [n x m].
std::vector<std::int64_t> oracle_matmul(std::span<const std::int64_t> a, std::span<const std::int64_t> w,
                                        std::size_t b, std::size_t n, std::size_t m);
std::vector<std::int64_t> oracle_matmul(const QTensor8& a, const QTensor8& w);

}  // namespace tintin

#endif  // TINTIN_BASELINE_HPP_
