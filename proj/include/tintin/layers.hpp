// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_LAYERS_HPP_
#define TINTIN_LAYERS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tintin/inttensor.hpp"

namespace tintin {

enum class Activation : std::uint8_t { kRelu, kIdentity };
enum class LossKind : std::uint8_t { kMse, kClassification };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

// Dense architecture: widths = {in, hidden..., out}. Every layer uses ReLU
// except the last, which is linear.
struct ModelSpec {
  std::vector<std::size_t> widths;
  LossKind loss = LossKind::kMse;
  int m = 4;
  std::size_t batch = 32;
  std::uint64_t seed = 1;

  std::size_t num_layers() const { return widths.size() < 2 ? 0 : widths.size() - 1; }
  Activation activation(std::size_t layer) const {
    return layer + 1 == num_layers() ? Activation::kIdentity : Activation::kRelu;
  }
  // Throws std::invalid_argument on an inconsistent spec.
  void validate() const;
};

// Weight matrix [in x out] in int8 plus the state cached for backprop.
class LinearLayer {
 public:
  LinearLayer(QTensor8 weights, Activation act);

  std::size_t in_dim() const { return weights_.rows(); }
  std::size_t out_dim() const { return weights_.cols(); }
  Activation activation() const { return act_; }
  const QTensor8& weights() const { return weights_; }

  // Replaces the weights (signed, same shape) and drops the cache.
  void set_weights(QTensor8 w);

  bool has_cache() const { return cached_input_.has_value(); }
  const QTensor8& cached_input() const { return cached_input_.value(); }
  const std::vector<bool>& relu_mask() const { return relu_mask_; }
  void clear_cache();

  // Forward pass without touching the cache.
  QTensor8 infer(const QTensor8& a_in, MacCounters& counters,
                 std::vector<bool>* mask_out = nullptr) const;

 private:
  friend QTensor8 forward(LinearLayer&, const QTensor8&, MacCounters&);

  QTensor8 weights_;
  Activation act_;
  std::optional<QTensor8> cached_input_;
  std::vector<bool> relu_mask_;
};

// Symmetric 8-bit quantization at the compound scale nearest (in log space)
// to max|x| / (2^t - 1), t = 7 signed or 8 unsigned; data is clamped to
// [-127, 127] or [0, 255]. All-zero input gives scale (0,0,0). Throws std::invalid_argument on non-finite input.
QTensor8 quantize_input(std::span<const double> x, Shape shape, Signedness sign);

// Compound exponent nearest to `target` over S in [-32,32], U and D in [0,4].
ScaleExp nearest_compound_scale(double target);

// int matmul, ReLU in int32, then a right shift down to 8 bits (uint8 after
// ReLU, int8 for the linear output layer). Caches the input and ReLU mask.
QTensor8 forward(LinearLayer& layer, const QTensor8& a_in, MacCounters& counters);

struct BackwardResult {
  AccTensor32 grad;       // [in x out], scale s_e * s_a
  AccTensor32 error_out;  // [b x in], scale s_e * s_w; empty if not propagated
  std::size_t clamped = 0;
};

// Truncates the incoming error to int8, masks it with the ReLU derivative and
// forms the weight gradient and the error for the previous layer.
// Throws std::logic_error if no forward cache is present.
BackwardResult backward(const LinearLayer& layer, const AccTensor32& e32_in,
                        MacCounters& counters, bool propagate = true);

struct LossGrad {
  AccTensor32 error;
  double loss = 0.0;   // logging only
  std::size_t correct = 0;  // classification only
};

// Error a_out - target at a shared scale; loss is the mean dequantized
// squared difference. The 2/b factor of the MSE gradient is dropped.
LossGrad mse_loss_grad(const QTensor8& a_out, const QTensor8& target);

// Error a_out - onehot, where the one-hot magnitude is 2^(bitwidth(a_out)-1)
// at a_out's scale. Loss is softmax cross-entropy of the dequantized logits.
LossGrad class_loss_grad(const QTensor8& a_out, std::span<const int> labels);

// Index of the largest element in each row, lowest index on ties.
std::vector<std::size_t> argmax_rows(const QTensor8& logits);

// Glorot-uniform real weights [n x m], deterministic in seed.
std::vector<double> glorot_uniform(std::size_t n, std::size_t m, std::uint64_t seed);

// glorot_uniform quantized with quantize_input(signed).
QTensor8 init_weights(std::size_t n, std::size_t m, std::uint64_t seed);

// Seed used for layer `layer` of a model seeded with `seed`.
std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer);

}  // namespace tintin

#endif  // TINTIN_LAYERS_HPP_
