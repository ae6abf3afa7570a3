// SPDX-License-Identifier: Apache-2.0
#include "tintin/int_model.hpp"

#include <stdexcept>

namespace tintin {

IntModel::IntModel(ModelSpec spec, Signedness input_sign)
    : spec_(std::move(spec)), input_sign_(input_sign) {
  spec_.validate();
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    layers_.emplace_back(init_weights(spec_.widths[l], spec_.widths[l + 1], layer_seed(spec_.seed, l)),
                         spec_.activation(l));
  }
}

IntModel::IntModel(ModelSpec spec, Signedness input_sign, std::vector<LinearLayer> layers)
    : spec_(std::move(spec)), input_sign_(input_sign), layers_(std::move(layers)) {
  spec_.validate();
  if (layers_.size() != spec_.num_layers()) throw std::invalid_argument("layer count mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].in_dim() != spec_.widths[l] || layers_[l].out_dim() != spec_.widths[l + 1]) {
      throw std::invalid_argument("layer " + std::to_string(l) + " shape does not match the model spec");
    }
  }
}

QTensor8 IntModel::quantize(const BatchView& batch) const {
  return quantize_input(batch.x, {batch.rows, spec_.widths.front()}, input_sign_);
}

QTensor8 IntModel::predict(const BatchView& batch, MacCounters& counters) const {
  QTensor8 a = quantize(batch);
  for (const auto& layer : layers_) a = layer.infer(a, counters);
  return a;
}

double IntModel::evaluate_loss(const BatchView& batch) const {
  MacCounters unused;
  const QTensor8 input = quantize(batch);
  QTensor8 a = input;
  for (const auto& layer : layers_) a = layer.infer(a, unused);
  return spec_.loss == LossKind::kMse ? mse_loss_grad(a, input).loss
                                      : class_loss_grad(a, batch.labels).loss;
}

StepStats IntModel::train_step(const BatchView& batch, const UpdateConfig& cfg) {
  StepStats st;
  const QTensor8 input = quantize(batch);
  QTensor8 a = input;
  for (auto& layer : layers_) a = forward(layer, a, st.forward);

  LossGrad lg = spec_.loss == LossKind::kMse ? mse_loss_grad(a, input)
                                             : class_loss_grad(a, batch.labels);
  st.loss = lg.loss;
  st.correct = lg.correct;

  AccTensor32 err = std::move(lg.error);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    BackwardResult br = backward(layers_[l], err, st.backward, l > 0);
    st.clamped += br.clamped;
    const UpdateReport rep = update_weights(layers_[l], br.grad, cfg);
    st.clamped += rep.grad_clamped + rep.weight_clamped;
    err = std::move(br.error_out);
  }
  return st;
}

}  // namespace tintin
