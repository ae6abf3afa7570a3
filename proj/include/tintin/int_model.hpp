// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_INT_MODEL_HPP_
#define TINTIN_INT_MODEL_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "tintin/layers.hpp"
#include "tintin/optimizer.hpp"

namespace tintin {

// A row-major batch of real inputs. Labels are only read for classification.
struct BatchView {
  std::span<const double> x;
  std::size_t rows = 0;
  std::span<const int> labels;
};

struct StepStats {
  double loss = 0.0;
  std::size_t correct = 0;
  MacCounters forward;
  MacCounters backward;
  std::size_t clamped = 0;  // error + update + weight saturations
};

// Stack of integer linear layers trained end to end with integer updates.
class IntModel {
 public:
  IntModel(ModelSpec spec, Signedness input_sign);
  IntModel(ModelSpec spec, Signedness input_sign, std::vector<LinearLayer> layers);

  const ModelSpec& spec() const { return spec_; }
  Signedness input_sign() const { return input_sign_; }
  std::vector<LinearLayer>& layers() { return layers_; }
  const std::vector<LinearLayer>& layers() const { return layers_; }

  QTensor8 quantize(const BatchView& batch) const;

  // Quantized forward pass without caching.
  QTensor8 predict(const BatchView& batch, MacCounters& counters) const;

  // Loss of the current weights on a batch, no update.
  double evaluate_loss(const BatchView& batch) const;

  // Forward, loss error, backward and update of every layer.
  StepStats train_step(const BatchView& batch, const UpdateConfig& cfg);

 private:
  ModelSpec spec_;
  Signedness input_sign_;
  std::vector<LinearLayer> layers_;
};

}  // namespace tintin

#endif  // TINTIN_INT_MODEL_HPP_
