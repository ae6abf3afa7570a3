// SPDX-License-Identifier: Apache-2.0
#include "tintin/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tintin {

FpModel FpModel::init(const ModelSpec& spec, double lr, double momentum) {
  spec.validate();
  FpModel m;
  m.spec = spec;
  m.lr = lr;
  m.momentum = momentum;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    m.weights.push_back(glorot_uniform(spec.widths[l], spec.widths[l + 1], layer_seed(spec.seed, l)));
    m.velocity.emplace_back(m.weights.back().size(), 0.0);
  }
  return m;
}

namespace {

void check_batch(const FpModel& model, const BatchView& batch) {
  if (model.weights.size() != model.spec.num_layers()) {
    throw std::invalid_argument("fp model: weights do not match the model spec");
  }
  if (batch.x.size() != batch.rows * model.spec.widths.front()) {
    throw std::invalid_argument("fp model: batch shape mismatch");
  }
}

// out[b x m] = in[b x n] * w[n x m]
std::vector<double> matmul(std::span<const double> in, std::span<const double> w, std::size_t b,
                           std::size_t n, std::size_t m) {
  std::vector<double> out(b * m, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double a = in[i * n + k];
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += a * w[k * m + j];
    }
  return out;
}

// activations[0] is the input; activations[l+1] the output of layer l
std::vector<std::vector<double>> forward_all(const FpModel& model, const BatchView& batch) {
  check_batch(model, batch);
  std::vector<std::vector<double>> acts;
  acts.emplace_back(batch.x.begin(), batch.x.end());
  const auto& widths = model.spec.widths;
  for (std::size_t l = 0; l < model.spec.num_layers(); ++l) {
    auto y = matmul(acts.back(), model.weights[l], batch.rows, widths[l], widths[l + 1]);
    if (model.spec.activation(l) == Activation::kRelu) {
      for (auto& v : y) v = std::max(v, 0.0);
    }
    acts.push_back(std::move(y));
  }
  return acts;
}

}  // namespace

std::vector<double> fp_forward(const FpModel& model, const BatchView& batch) {
  return forward_all(model, batch).back();
}

FpGradients fp_gradients(const FpModel& model, const BatchView& batch) {
  const auto acts = forward_all(model, batch);
  const auto& widths = model.spec.widths;
  const std::size_t b = batch.rows, out_w = widths.back();
  const auto& y = acts.back();

  FpGradients r;
  // delta = d(mean loss)/d(output)
  std::vector<double> delta(y.size(), 0.0);
  if (model.spec.loss == LossKind::kMse) {
    if (out_w != widths.front()) throw std::invalid_argument("fp mse: output width must equal input");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - batch.x[i];
      sum += d * d;
      delta[i] = 2.0 * d / double(y.size());
    }
    r.loss = sum / double(y.size());
  } else {
    if (batch.labels.size() != b) throw std::invalid_argument("fp classification: labels missing");
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double* z = y.data() + i * out_w;
      const int label = batch.labels[i];
      if (label < 0 || static_cast<std::size_t>(label) >= out_w) {
        throw std::out_of_range("fp classification: label out of range");
      }
      const double zmax = *std::max_element(z, z + out_w);
      double denom = 0.0;
      for (std::size_t j = 0; j < out_w; ++j) denom += std::exp(z[j] - zmax);
      loss += std::log(denom) - (z[label] - zmax);
      std::size_t best = 0;
      for (std::size_t j = 0; j < out_w; ++j) {
        delta[i * out_w + j] = std::exp(z[j] - zmax) / denom / double(b);
        if (z[j] > z[best]) best = j;
      }
      delta[i * out_w + label] -= 1.0 / double(b);
      if (best == static_cast<std::size_t>(label)) ++r.correct;
    }
    r.loss = loss / double(b);
  }

  r.grads.resize(model.spec.num_layers());
  for (std::size_t l = model.spec.num_layers(); l-- > 0;) {
    const std::size_t n = widths[l], m = widths[l + 1];
    if (model.spec.activation(l) == Activation::kRelu) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (acts[l + 1][i] <= 0.0) delta[i] = 0.0;
      }
    }
    auto& g = r.grads[l];
    g.assign(n * m, 0.0);
    const auto& in = acts[l];
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double a = in[i * n + k];
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) g[k * m + j] += a * delta[i * m + j];
      }
    if (l == 0) break;
    std::vector<double> prev(b * n, 0.0);
    const auto& w = model.weights[l];
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += delta[i * m + j] * w[k * m + j];
        prev[i * n + k] = s;
      }
    delta = std::move(prev);
  }
  return r;
}

FpGradients fp_train_step(FpModel& model, const BatchView& batch) {
  FpGradients r = fp_gradients(model, batch);
  const double b = double(batch.rows);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    auto& w = model.weights[l];
    auto& v = model.velocity[l];
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = model.momentum * v[i] + r.grads[l][i] * b;  // batch-summed gradient
      w[i] -= model.lr / b * v[i];
    }
  }
  return r;
}

double fp_loss(const FpModel& model, const BatchView& batch) {
  const auto y = fp_forward(model, batch);
  if (model.spec.loss == LossKind::kMse) {
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += (y[i] - batch.x[i]) * (y[i] - batch.x[i]);
    return y.empty() ? 0.0 : sum / double(y.size());
  }
  const std::size_t c = model.spec.widths.back();
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.rows; ++i) {
    const double* z = y.data() + i * c;
    const double zmax = *std::max_element(z, z + c);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(z[j] - zmax);
    loss += std::log(denom) - (z[batch.labels[i]] - zmax);
  }
  return batch.rows == 0 ? 0.0 : loss / double(batch.rows);
}

MemoryEstimate estimate_memory(const ModelSpec& spec, std::size_t batch, std::size_t element_bytes) {
  MemoryEstimate e;
  std::size_t max_weight = 0, max_act = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t w = spec.widths[l] * spec.widths[l + 1];
    const std::size_t a = batch * spec.widths[l + 1];
    e.params_bytes += w * element_bytes;
    e.activations_bytes += a * element_bytes;
    max_weight = std::max(max_weight, w);
    max_act = std::max(max_act, a);
  }
  e.dynamic_bytes = (max_weight + max_act) * 4;
  e.total_bytes = e.params_bytes + e.activations_bytes + e.dynamic_bytes;
  return e;
}

std::vector<std::int64_t> oracle_matmul(std::span<const std::int64_t> a, std::span<const std::int64_t> w,
                                        std::size_t b, std::size_t n, std::size_t m) {
  if (a.size() != b * n || w.size() != n * m) throw std::invalid_argument("oracle_matmul: bad dims");
  std::vector<std::int64_t> out(b * m, 0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      std::int64_t s = 0;
      for (std::size_t k = 0; k < n; ++k) s += a[i * n + k] * w[k * m + j];
      out[i * m + j] = s;
    }
  return out;
}

std::vector<std::int64_t> oracle_matmul(const QTensor8& a, const QTensor8& w) {
  if (a.cols() != w.rows()) throw std::invalid_argument("oracle_matmul: inner dims differ");
  const auto av = a.values();
  const auto wv = w.values();
  const std::vector<std::int64_t> a64(av.begin(), av.end()), w64(wv.begin(), wv.end());
  return oracle_matmul(a64, w64, a.rows(), a.cols(), w.cols());
}

}  // namespace tintin
