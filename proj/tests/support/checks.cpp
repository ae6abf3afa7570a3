// SPDX-License-Identifier: Apache-2.0
#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "tintin/baseline.hpp"
#include "tintin/optimizer.hpp"
#include "tintin/rescale.hpp"

namespace tintin::testing {

namespace {

QTensor8 random_q(std::mt19937_64& rng, std::size_t r, std::size_t c, Signedness s, double zero_p) {
  std::bernoulli_distribution zero(zero_p);
  std::uniform_int_distribution<int> val(QTensor8::min_value(s), QTensor8::max_value(s));
  std::vector<std::int32_t> v(r * c);
  for (auto& x : v) x = zero(rng) ? 0 : val(rng);
  return QTensor8::from_values({r, c}, v, s);
}

std::vector<std::int32_t> random_ints(std::mt19937_64& rng, std::size_t n, int bits) {
  const std::int32_t hi = bits >= 31 ? std::numeric_limits<std::int32_t>::max() : (std::int32_t{1} << bits) - 1;
  std::uniform_int_distribution<std::int32_t> d(-hi, hi);
  std::vector<std::int32_t> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Rational abs_r(const Rational& r) { return r < 0 ? Rational(-r) : r; }

void note_failure(PropertyResult& r, const std::string& what) {
  if (r.failures++ == 0) r.first_failure = what;
}

}  // namespace

PropertyResult check_matmul_oracle(std::size_t cases, std::uint64_t seed) {
  PropertyResult res;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 32);
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t b = dim(rng), n = dim(rng), m = dim(rng);
    const auto sa = t % 2 ? Signedness::kSigned : Signedness::kUnsigned;
    const auto a = random_q(rng, b, n, sa, double(t % 5) * 0.2);
    const auto w = random_q(rng, n, m, Signedness::kSigned, double(t % 3) * 0.3);
    MacCounters skip_c, dense_c;
    const auto y = int_matmul(a, w, skip_c);
    const auto dense = int_matmul(a, w, dense_c, MatmulMode::kDense);
    const auto ref = oracle_matmul(a, w);
    ++res.cases;
    bool ok = y.data == dense.data && y.scale == a.scale + w.scale;
    for (std::size_t i = 0; ok && i < ref.size(); ++i) ok = ref[i] == y.data[i];
    if (!ok) {
      std::ostringstream os;
      os << "case " << t << " (" << b << "x" << n << " * " << n << "x" << m << ")";
      note_failure(res, os.str());
    }
  }
  return res;
}

PropertyResult check_rescale_drift(std::size_t cases, std::uint64_t seed) {
  PropertyResult res;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 8), bits(0, 22), sdist(-20, 20), ud(0, 3), op(0, 2), rs(1, 3),
      seq_len(1, 6), ls(1, 4);
  std::bernoulli_distribution prefix(0.3);
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t n = static_cast<std::size_t>(len(rng));
    const int b = bits(rng);
    AccTensor32 v0({n}, random_ints(rng, n, b), ScaleExp::make(sdist(rng), ud(rng), ud(rng)));
    AccTensor32 v = v0;
    int steps = seq_len(rng);
    int roundings = 0;
    if (prefix(rng) && steps > 1) {
      v = shift_scaled(v, -ls(rng));  // exact: no rounding
      --steps;
    }
    for (int s = 0; s < steps; ++s) {
      switch (op(rng)) {
        case 0:
          v = shift_scaled(v, rs(rng));
          roundings += 1;
          break;
        case 1:
          v = upscale(v, 1);  // two rounded shifts
          roundings += 2;
          break;
        default:
          v = downscale(v, 1);
          roundings += 1;
          break;
      }
    }
    // drift in units of the final scale: |v' - v0 * s(e0)/s(e')|
    const Rational ratio = scale_value(v0.scale) / scale_value(v.scale);
    Rational worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, abs_r(Rational(v.data[i]) - Rational(v0.data[i]) * ratio));
    }
    ++res.cases;
    const double frac = roundings ? static_cast<double>(worst / roundings) : (worst == 0 ? 0.0 : 1e9);
    res.worst = std::max(res.worst, frac);
    if (worst > roundings) {
      std::ostringstream os;
      os << "case " << t << ": drift " << to_string(worst) << " units > " << roundings << " roundings";
      note_failure(res, os.str());
    }
  }
  return res;
}

PropertyResult check_decomposition(std::size_t cases, std::uint64_t seed) {
  PropertyResult res;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> num(1, 1'000'000);
  std::uniform_int_distribution<int> terms(1, 6);
  const Rational lo = pow2(-8), hi = pow2(8);
  while (res.cases < cases) {
    const Rational r(num(rng), num(rng));
    if (!(r > lo && r < hi)) continue;
    const int n_max = res.cases % 2 ? kDefaultDecompositionTerms : terms(rng);
    const Decomposition d = decompose(r, n_max);
    ++res.cases;
    const auto& e = d.exponents;
    bool ok = !e.empty() && static_cast<int>(e.size()) <= n_max && e.front() == floor_log2(r);
    for (std::size_t i = 1; ok && i < e.size(); ++i) ok = e[i] < e[i - 1];
    ok = ok && d.approximation() <= r && d.residual == r - d.approximation() && d.residual >= 0;
    // greedy: each term leaves less than itself
    ok = ok && d.residual < pow2(e.back());
    if (ok && static_cast<int>(e.size()) < n_max) ok = d.residual == 0;
    if (ok) {
      // apply_decomposition: |result - v * sum 2^e| <= terms / 2
      const auto v = random_ints(rng, 4, 20);
      const auto out = apply_decomposition(v, d);
      for (std::size_t i = 0; ok && i < v.size(); ++i) {
        ok = abs_r(Rational(out[i]) - Rational(v[i]) * d.approximation()) <= Rational(e.size(), 2);
      }
    }
    if (!ok) note_failure(res, "ratio " + to_string(r) + ", n_max " + std::to_string(n_max));
  }
  return res;
}

PropertyResult check_update_fuzz(std::size_t cases, std::uint64_t seed) {
  PropertyResult res;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  std::uniform_int_distribution<int> wbits(1, 7), gbits(1, 31), ws(-14, 2), gs(-40, 10), ud(0, 4);
  std::bernoulli_distribution sparse(0.3);
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t n = dim(rng), m = dim(rng);
    const int cfg_m = 2 + static_cast<int>(t % 5);
    const int wb = wbits(rng);
    auto wv = random_ints(rng, n * m, wb);
    wv[0] = (std::int32_t{1} << (wb - 1)) * (t % 2 ? 1 : -1);  // nonzero weights of exactly wb bits
    const QTensor8 w0 = QTensor8::from_values({n, m}, wv, Signedness::kSigned, ScaleExp::make(ws(rng), ud(rng), ud(rng)));
    LinearLayer layer(w0, Activation::kRelu);

    AccTensor32 g({n, m}, ScaleExp::make(gs(rng), ud(rng), ud(rng)));
    const bool zero = t % 10 == 0;
    if (!zero) {
      g.data = random_ints(rng, n * m, gbits(rng));
      for (auto& x : g.data) {
        if (sparse(rng)) x = 0;
      }
      g.data[0] = g.data[0] == 0 ? 1 : g.data[0];
    }
    UpdateConfig cfg;
    cfg.m = cfg_m;
    ++res.cases;
    std::ostringstream why;
    try {
      const UpdateReport rep = update_weights(layer, g, cfg);
      const QTensor8& w1 = layer.weights();
      if (zero) {
        if (!(w1 == w0) || !rep.zero_gradient) why << "zero gradient changed the weights";
      } else {
        if (effective_bitwidth(w1) > 7) why << "stored weights have " << effective_bitwidth(w1) << " bits";
        const BoundCheck bc = update_step_magnitude_bound(rep.aligned_weights, rep.applied_update, cfg_m);
        if (!bc.ok) why << bc.message;
        if (bc.limit > 0) res.worst = std::max(res.worst, double(bc.max_update) / double(bc.limit));
      }
    } catch (const std::exception& e) {
      why << "threw " << e.what();
    }
    if (!why.str().empty()) note_failure(res, "case " + std::to_string(t) + ": " + why.str());
  }
  return res;
}

namespace {

// 0.5 * sum((relu(x w1) w2 - t)^2) in doubles.
double toy_loss(const std::vector<double>& x, const std::vector<double>& w1, const std::vector<double>& w2,
                const std::vector<double>& t, std::size_t b) {
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double h[3];
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += x[i * 4 + k] * w1[k * 3 + j];
      h[j] = std::max(s, 0.0);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      double y = 0.0;
      for (std::size_t k = 0; k < 3; ++k) y += h[k] * w2[k * 2 + j];
      loss += 0.5 * (y - t[i * 2 + j]) * (y - t[i * 2 + j]);
    }
  }
  return loss;
}

}  // namespace

SignAgreement check_gradient_signs(std::size_t nets, std::uint64_t seed) {
  SignAgreement out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  constexpr std::size_t b = 8;
  for (std::size_t net = 0; net < nets; ++net) {
    LinearLayer l1(init_weights(4, 3, rng()), Activation::kRelu);
    LinearLayer l2(init_weights(3, 2, rng()), Activation::kIdentity);
    std::vector<double> xr(b * 4), tr(b * 2);
    for (auto& v : xr) v = unit(rng);
    for (auto& v : tr) v = unit(rng);
    const QTensor8 x = quantize_input(xr, {b, 4}, Signedness::kSigned);
    const QTensor8 t = quantize_input(tr, {b, 2}, Signedness::kSigned);

    MacCounters c;
    const QTensor8 h = forward(l1, x, c);
    const QTensor8 y = forward(l2, h, c);
    const LossGrad lg = mse_loss_grad(y, t);
    const BackwardResult g2 = backward(l2, lg.error, c, true);
    const BackwardResult g1 = backward(l1, g2.error_out, c, false);

    const auto xd = dequantize(x), td = dequantize(t);
    std::vector<std::vector<double>> w = {dequantize(l1.weights()), dequantize(l2.weights())};
    const std::vector<double> gi[2] = {dequantize(g1.grad), dequantize(g2.grad)};
    const double floor_[2] = {scale_value_real(g1.grad.scale), scale_value_real(g2.grad.scale)};
    for (int l = 0; l < 2; ++l) {
      for (std::size_t i = 0; i < w[l].size(); ++i) {
        const double keep = w[l][i];
        const double step = 1e-6 * std::max(std::abs(keep), 1e-3);
        w[l][i] = keep + step;
        const double up = toy_loss(xd, w[0], w[1], td, b);
        w[l][i] = keep - step;
        const double down = toy_loss(xd, w[0], w[1], td, b);
        w[l][i] = keep;
        const double fd = (up - down) / (2 * step);
        if (std::abs(fd) <= floor_[l]) continue;
        ++out.compared;
        if ((fd > 0 && gi[l][i] > 0) || (fd < 0 && gi[l][i] < 0)) ++out.agree;
      }
    }
  }
  return out;
}

MacCounters recount_eval_macs(const IntModel& model, const ExperimentData& data, std::size_t chunk) {
  MacCounters total;
  std::vector<const Dataset*> splits;
  if (data.test.rows > 0) splits.push_back(&data.test);
  if (data.test_normal.rows > 0) splits.push_back(&data.test_normal);
  if (data.test_anomaly.rows > 0) splits.push_back(&data.test_anomaly);
  for (const Dataset* d : splits) {
    for (std::size_t start = 0; start < d->rows; start += chunk) {
      std::vector<std::size_t> rows(std::min(chunk, d->rows - start));
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = start + i;
      const Batch batch = gather(*d, rows);
      QTensor8 a = model.quantize(batch.view());
      for (const auto& layer : model.layers()) {
        const QTensor8& w = layer.weights();
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t k = 0; k < a.cols(); ++k)
            for (std::size_t j = 0; j < w.cols(); ++j) {
              ++total.total_macs;
              if (a.at(i, k) == 0 || w.at(k, j) == 0) ++total.skipped_macs;
            }
        MacCounters unused;
        a = layer.infer(a, unused);
      }
    }
  }
  return total;
}

}  // namespace tintin::testing
