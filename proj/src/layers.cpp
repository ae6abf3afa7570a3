// SPDX-License-Identifier: Apache-2.0
#include "tintin/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "tintin/rescale.hpp"

namespace tintin {

std::string to_string(LossKind k) { return k == LossKind::kMse ? "mse" : "classification"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "classification") return LossKind::kClassification;
  throw std::invalid_argument("unknown loss kind '" + s + "'");
}

void ModelSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("model needs at least two widths");
  for (auto w : widths) {
    if (w == 0) throw std::invalid_argument("layer widths must be positive");
  }
  if (m < 1 || m > 6) throw std::invalid_argument("update factor m must be in [1, 6]");
  if (batch == 0) throw std::invalid_argument("batch size must be positive");
}

LinearLayer::LinearLayer(QTensor8 weights, Activation act) : act_(act) {
  set_weights(std::move(weights));
}

void LinearLayer::set_weights(QTensor8 w) {
  if (!w.is_signed() || w.shape().size() != 2) {
    throw std::invalid_argument("layer weights must be a signed rank-2 tensor");
  }
  if (!weights_.shape().empty() && w.shape() != weights_.shape()) {
    throw std::invalid_argument("layer weights cannot change shape");
  }
  weights_ = std::move(w);
  clear_cache();
}

void LinearLayer::clear_cache() {
  cached_input_.reset();
  relu_mask_.clear();
}

QTensor8 LinearLayer::infer(const QTensor8& a_in, MacCounters& counters,
                            std::vector<bool>* mask_out) const {
  if (a_in.shape().size() != 2 || a_in.cols() != in_dim()) {
    throw std::invalid_argument("forward: input width does not match layer");
  }
  AccTensor32 y = int_matmul(a_in, weights_, counters);
  Signedness out_sign = Signedness::kSigned;
  int target_bits = 7;
  if (act_ == Activation::kRelu) {
    out_sign = Signedness::kUnsigned;
    target_bits = 8;
    if (mask_out) mask_out->assign(y.size(), false);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.data[i] > 0) {
        if (mask_out) (*mask_out)[i] = true;
      } else {
        y.data[i] = 0;
      }
    }
  }
  const int sr = std::max(effective_bitwidth(y) - target_bits, 0);
  // rounding may carry into bit 9 (uint8) / 8 (int8); saturate clamps it
  return saturate_to_8(shift_scaled(y, sr), out_sign).tensor;
}

QTensor8 forward(LinearLayer& layer, const QTensor8& a_in, MacCounters& counters) {
  std::vector<bool> mask;
  QTensor8 out = layer.infer(a_in, counters, &mask);
  layer.cached_input_ = a_in;
  layer.relu_mask_ = std::move(mask);
  return out;
}

BackwardResult backward(const LinearLayer& layer, const AccTensor32& e32_in,
                        MacCounters& counters, bool propagate) {
  if (!layer.has_cache()) throw std::logic_error("backward: no forward cache");
  const QTensor8& a_in = layer.cached_input();
  if (e32_in.shape != Shape{a_in.rows(), layer.out_dim()}) {
    throw std::invalid_argument("backward: error shape does not match forward output");
  }
  const int k = std::max(effective_bitwidth(e32_in) - 7, 0);
  Saturated e8 = saturate_to_8(shift_scaled(e32_in, k), Signedness::kSigned);
  if (layer.activation() == Activation::kRelu) {
    const auto& mask = layer.relu_mask();
    for (std::size_t i = 0; i < e8.tensor.size(); ++i) {
      if (!mask[i]) e8.tensor.set(i, 0);
    }
  }
  BackwardResult r;
  r.clamped = e8.clamped;
  r.grad = int_matmul(transpose(a_in), e8.tensor, counters);
  if (propagate) r.error_out = int_matmul(e8.tensor, transpose(layer.weights()), counters);
  return r;
}

namespace {

std::int32_t checked_sub(std::int32_t a, std::int32_t b) {
  const std::int64_t d = std::int64_t{a} - b;
  if (d > std::numeric_limits<std::int32_t>::max() ||
      d < std::numeric_limits<std::int32_t>::min()) {
    throw std::overflow_error("loss error overflows int32");
  }
  return static_cast<std::int32_t>(d);
}

}  // namespace

LossGrad mse_loss_grad(const QTensor8& a_out, const QTensor8& target) {
  if (a_out.shape() != target.shape()) throw std::invalid_argument("mse: shape mismatch");
  const Aligned al = align_scales(widen(a_out), widen(target));
  LossGrad r;
  r.error = AccTensor32(a_out.shape(), al.common);
  for (std::size_t i = 0; i < r.error.size(); ++i) {
    r.error.data[i] = checked_sub(al.first.data[i], al.second.data[i]);
  }
  const double s = scale_value_real(al.common);
  double sum = 0.0;
  for (auto e : r.error.data) sum += (e * s) * (e * s);
  r.loss = r.error.size() == 0 ? 0.0 : sum / double(r.error.size());
  return r;
}

std::vector<std::size_t> argmax_rows(const QTensor8& logits) {
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t j = 1; j < logits.cols(); ++j) {
      if (logits.at(i, j) > logits.at(i, out[i])) out[i] = j;
    }
  }
  return out;
}

LossGrad class_loss_grad(const QTensor8& a_out, std::span<const int> labels) {
  const std::size_t b = a_out.rows(), c = a_out.cols();
  if (labels.size() != b) throw std::invalid_argument("class loss: label count mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::out_of_range("class loss: label " + std::to_string(y) + " out of range");
    }
  }
  const std::int32_t hot = std::int32_t{1} << (std::max(effective_bitwidth(a_out), 1) - 1);
  LossGrad r;
  r.error = widen(a_out);
  const auto pred = argmax_rows(a_out);
  const double s = scale_value_real(a_out.scale);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    r.error.data[i * c + labels[i]] -= hot;
    if (pred[i] == static_cast<std::size_t>(labels[i])) ++r.correct;
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) zmax = std::max(zmax, a_out.at(i, j) * s);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(a_out.at(i, j) * s - zmax);
    loss += std::log(denom) - (a_out.at(i, labels[i]) * s - zmax);
  }
  r.loss = b == 0 ? 0.0 : loss / double(b);
  return r;
}

ScaleExp nearest_compound_scale(double target) {
  static const double kLn2 = std::log(2.0);
  static const double kLnU = std::log(4.0 / 3.0);
  static const double kLnR = std::log(0.8);
  const double goal = std::log(target);
  ScaleExp best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int u = 0; u <= 4; ++u) {
    for (int d = 0; d <= 4; ++d) {
      for (int s = -32; s <= 32; ++s) {
        const double dist = std::abs(s * kLn2 + u * kLnU + d * kLnR - goal);
        if (dist < best_dist) {
          best_dist = dist;
          best = ScaleExp::make(s, u, d);
        }
      }
    }
  }
  return best;
}

QTensor8 quantize_input(std::span<const double> x, Shape shape, Signedness sign) {
  if (x.size() != shape_size(shape)) throw std::invalid_argument("quantize: size mismatch");
  double max_abs = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite input");
    max_abs = std::max(max_abs, std::abs(v));
  }
  QTensor8 q(std::move(shape), sign);
  if (max_abs == 0.0) return q;
  const int levels = sign == Signedness::kSigned ? 127 : 255;
  q.scale = nearest_compound_scale(max_abs / levels);
  const double s = scale_value_real(q.scale);
  // symmetric range, so signed data keeps 7 magnitude bits
  const double lo = sign == Signedness::kSigned ? -levels : 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::round(x[i] / s);
    q.set(i, static_cast<std::int32_t>(std::clamp(r, lo, double(levels))));
  }
  return q;
}

std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer) {
  return seed * 0x9E3779B97F4A7C15ULL + layer + 1;
}

std::vector<double> glorot_uniform(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n == 0 || m == 0) throw std::invalid_argument("glorot_uniform: empty shape");
  const double limit = std::sqrt(6.0 / double(n + m));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(n * m);
  for (auto& v : w) v = dist(rng);
  return w;
}

QTensor8 init_weights(std::size_t n, std::size_t m, std::uint64_t seed) {
  const auto w = glorot_uniform(n, m, seed);
  return quantize_input(w, {n, m}, Signedness::kSigned);
}

}  // namespace tintin
