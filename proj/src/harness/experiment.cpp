// SPDX-License-Identifier: Apache-2.0
#include "tintin/harness/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tintin/baseline.hpp"

namespace tintin {

namespace {

std::vector<CsvColumn> parse_columns(const std::string& spec) {
  std::vector<CsvColumn> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = spec.find(',', start);
    std::string item = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    CsvColumn c;
    if (!item.empty() && std::all_of(item.begin(), item.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      c.index = std::stoul(item);
    } else {
      c.name = item;
    }
    out.push_back(c);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

ExperimentData load_data(const RunConfig& cfg) {
  ExperimentData d;
  switch (cfg.dataset) {
    case DatasetKind::kSynth: {
      SynthParams p;
      p.n_normal = cfg.synth_train;
      p.n_anomaly = cfg.synth_test;
      p.window = cfg.window;
      p.noise = cfg.synth_noise;
      p.seed = cfg.seed;
      auto s = synth_vibration(p);
      d.train = std::move(s.train);
      d.test_normal = std::move(s.test_normal);
      d.test_anomaly = std::move(s.test_anomaly);
      break;
    }
    case DatasetKind::kCsv: {
      const auto cols = parse_columns(cfg.csv_columns);
      auto train = load_csv_series(cfg.csv_train, cfg.window, cfg.csv_stride, cols);
      d.train = std::move(train.data);
      d.test_normal =
          load_csv_series(cfg.csv_test_normal, cfg.window, cfg.csv_stride, cols, &train.range).data;
      d.test_anomaly = load_csv_series(cfg.csv_test_anomaly, cfg.window, cfg.csv_stride, cols, &train.range,
                                       WindowLabel::kAnomaly)
                           .data;
      break;
    }
    case DatasetKind::kMnist: {
      auto m = load_mnist(cfg.mnist_dir, cfg.mnist_train, cfg.mnist_test);
      d.train = std::move(m.train);
      d.test = std::move(m.test);
      break;
    }
  }
  if (d.train.rows == 0) throw DataError("training split is empty");
  return d;
}

BatchSampler::BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
  if (n == 0) throw std::invalid_argument("BatchSampler: empty dataset");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> BatchSampler::next(std::size_t batch) {
  std::vector<std::size_t> out;
  out.reserve(batch);
  while (out.size() < batch) {
    if (pos_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

Batch gather(const Dataset& d, const std::vector<std::size_t>& rows) {
  Batch b;
  b.rows = rows.size();
  b.x.reserve(rows.size() * d.cols);
  for (std::size_t r : rows) {
    if (r >= d.rows) throw std::out_of_range("gather: row out of range");
    b.x.insert(b.x.end(), d.row(r), d.row(r) + d.cols);
    if (!d.labels.empty()) b.labels.push_back(d.labels[r]);
  }
  return b;
}

Batch whole(const Dataset& d) {
  std::vector<std::size_t> rows(d.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return gather(d, rows);
}

namespace {

double softmax_xent(const double* z, std::size_t c, int label) {
  const double zmax = *std::max_element(z, z + c);
  double denom = 0.0;
  for (std::size_t j = 0; j < c; ++j) denom += std::exp(z[j] - zmax);
  return std::log(denom) - (z[label] - zmax);
}

std::size_t argmax(const double* z, std::size_t c) {
  return static_cast<std::size_t>(std::max_element(z, z + c) - z);
}

// Dense MAC count of one forward pass over `rows`.
std::uint64_t nominal_forward_macs(const ModelSpec& spec, std::size_t rows) {
  std::uint64_t macs = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) macs += std::uint64_t{rows} * spec.widths[l] * spec.widths[l + 1];
  return macs;
}

// Weight gradients for every layer plus error propagation below layer 0.
std::uint64_t nominal_backward_macs(const ModelSpec& spec, std::size_t rows) {
  std::uint64_t macs = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::uint64_t one = std::uint64_t{rows} * spec.widths[l] * spec.widths[l + 1];
    macs += l == 0 ? one : 2 * one;
  }
  return macs;
}

// Scores real outputs against a batch into `r`.
void score(const std::vector<double>& out, const BatchView& batch, const ModelSpec& spec, EvalResult& r) {
  const std::size_t c = spec.widths.back();
  if (spec.loss == LossKind::kMse) {
    for (std::size_t i = 0; i < out.size(); ++i) r.loss += (out[i] - batch.x[i]) * (out[i] - batch.x[i]);
    return;
  }
  for (std::size_t i = 0; i < batch.rows; ++i) {
    const double* z = out.data() + i * c;
    if (batch.labels[i] < 0 || static_cast<std::size_t>(batch.labels[i]) >= c) {
      throw std::out_of_range("label out of range");
    }
    r.loss += softmax_xent(z, c, batch.labels[i]);
    if (argmax(z, c) == static_cast<std::size_t>(batch.labels[i])) ++r.correct;
  }
}

void finish(EvalResult& r, const ModelSpec& spec) {
  if (r.rows == 0) return;
  r.loss /= spec.loss == LossKind::kMse ? double(r.rows * spec.widths.back()) : double(r.rows);
}

constexpr const char* kWeightsFormat = "tintin-weights";
constexpr int kWeightsVersion = 1;

class IntTrainer final : public Trainer {
 public:
  IntTrainer(IntModel model, int m) : model_(std::move(model)) { cfg_.m = m; }

  TrainResult step(const BatchView& batch) override {
    const StepStats st = model_.train_step(batch, cfg_);
    return {st.loss, st.forward, st.backward, st.clamped};
  }

  EvalResult evaluate(const BatchView& batch) const override {
    EvalResult r;
    r.rows = batch.rows;
    if (batch.rows == 0) return r;
    const QTensor8 out = model_.predict(batch, r.macs);
    // argmax on the integers keeps ties identical to training accuracy
    const std::vector<double> real = dequantize(out);
    score(real, batch, model_.spec(), r);
    if (model_.spec().loss == LossKind::kClassification) {
      const auto am = argmax_rows(out);
      r.correct = 0;
      for (std::size_t i = 0; i < am.size(); ++i) r.correct += am[i] == static_cast<std::size_t>(batch.labels[i]);
    }
    finish(r, model_.spec());
    return r;
  }

  std::vector<ScaleExp> scales() const override {
    std::vector<ScaleExp> s;
    for (const auto& l : model_.layers()) s.push_back(l.weights().scale);
    return s;
  }

  nlohmann::json weights_json() const override {
    nlohmann::json j;
    j["format"] = kWeightsFormat;
    j["version"] = kWeightsVersion;
    j["backend"] = "int";
    j["widths"] = model_.spec().widths;
    for (const auto& l : model_.layers()) {
      const auto& w = l.weights();
      j["layers"].push_back({{"rows", w.rows()},
                             {"cols", w.cols()},
                             {"scale", {w.scale.S, w.scale.U, w.scale.D}},
                             {"values", w.values()}});
    }
    return j;
  }

  const IntModel& model() const { return model_; }

 private:
  IntModel model_;
  UpdateConfig cfg_;
};

class FpTrainer final : public Trainer {
 public:
  explicit FpTrainer(FpModel model) : model_(std::move(model)) {}

  TrainResult step(const BatchView& batch) override {
    TrainResult r;
    r.loss = fp_train_step(model_, batch).loss;
    r.forward.total_macs = nominal_forward_macs(model_.spec, batch.rows);
    r.backward.total_macs = nominal_backward_macs(model_.spec, batch.rows);
    return r;
  }

  EvalResult evaluate(const BatchView& batch) const override {
    EvalResult r;
    r.rows = batch.rows;
    if (batch.rows == 0) return r;
    r.macs.total_macs = nominal_forward_macs(model_.spec, batch.rows);
    score(fp_forward(model_, batch), batch, model_.spec, r);
    finish(r, model_.spec);
    return r;
  }

  std::vector<ScaleExp> scales() const override { return {}; }

  nlohmann::json weights_json() const override {
    nlohmann::json j;
    j["format"] = kWeightsFormat;
    j["version"] = kWeightsVersion;
    j["backend"] = "fp";
    j["widths"] = model_.spec.widths;
    for (std::size_t l = 0; l < model_.weights.size(); ++l) {
      j["layers"].push_back({{"rows", model_.spec.widths[l]},
                             {"cols", model_.spec.widths[l + 1]},
                             {"values", model_.weights[l]}});
    }
    return j;
  }

 private:
  FpModel model_;
};

Signedness input_sign_for(const RunConfig& cfg) {
  // MNIST pixels are non-negative; series are normalized to [-1, 1]
  return cfg.dataset == DatasetKind::kMnist ? Signedness::kUnsigned : Signedness::kSigned;
}

}  // namespace

std::unique_ptr<Trainer> make_trainer(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.backend == BackendKind::kInt) {
    return std::make_unique<IntTrainer>(IntModel(cfg.model_spec(), input_sign_for(cfg)), cfg.m);
  }
  return std::make_unique<FpTrainer>(FpModel::init(cfg.model_spec(), cfg.lr, cfg.effective_momentum()));
}

std::unique_ptr<Trainer> load_trainer(const RunConfig& cfg, const std::filesystem::path& path) {
  cfg.validate();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weights file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const auto fail = [&](const std::string& why) { return DataError(path.string() + ": " + why); };
  try {
    if (j.value("format", "") != kWeightsFormat || j.value("version", 0) != kWeightsVersion) {
      throw fail("not a version-1 weights file");
    }
    if (j.at("widths").get<std::vector<std::size_t>>() != cfg.widths) throw fail("widths differ from the config");
    const bool int_file = j.at("backend").get<std::string>() == "int";
    if (int_file != (cfg.backend == BackendKind::kInt)) throw fail("weights were written by another backend");
    const auto& layers = j.at("layers");
    const ModelSpec spec = cfg.model_spec();
    if (layers.size() != spec.num_layers()) throw fail("layer count differs from the config");

    if (int_file) {
      std::vector<LinearLayer> ll;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& e = layers[l];
        const auto sc = e.at("scale").get<std::vector<int>>();
        if (sc.size() != 3) throw fail("scale must be [S, U, D]");
        const auto values = e.at("values").get<std::vector<std::int32_t>>();
        QTensor8 w = QTensor8::from_values({e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>()},
                                           values, Signedness::kSigned, ScaleExp::make(sc[0], sc[1], sc[2]));
        ll.emplace_back(std::move(w), spec.activation(l));
      }
      return std::make_unique<IntTrainer>(IntModel(spec, input_sign_for(cfg), std::move(ll)), cfg.m);
    }
    FpModel m = FpModel::init(spec, cfg.lr, cfg.effective_momentum());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto values = layers[l].at("values").get<std::vector<double>>();
      if (values.size() != m.weights[l].size()) throw fail("layer " + std::to_string(l) + " has the wrong size");
      m.weights[l] = std::move(values);
    }
    return std::make_unique<FpTrainer>(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  } catch (const std::out_of_range& e) {
    throw fail(e.what());
  }
}

void save_weights(const Trainer& trainer, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write weights file " + path.string());
  out << trainer.weights_json().dump() << '\n';
}

const IntModel* int_model_of(const Trainer& trainer) {
  const auto* t = dynamic_cast<const IntTrainer*>(&trainer);
  return t ? &t->model() : nullptr;
}

nlohmann::ordered_json MetricsRecord::to_json() const {
  nlohmann::ordered_json j;
  j["iteration"] = iteration;
  j["train_loss"] = train_loss;
  if (eval_normal_mse) j["eval_normal_mse"] = *eval_normal_mse;
  if (eval_anomaly_mse) j["eval_anomaly_mse"] = *eval_anomaly_mse;
  if (eval_accuracy) j["eval_accuracy"] = *eval_accuracy;
  j["train_fwd_macs"] = train_forward.total_macs;
  j["train_fwd_skipped"] = train_forward.skipped_macs;
  j["train_bwd_macs"] = train_backward.total_macs;
  j["train_bwd_skipped"] = train_backward.skipped_macs;
  j["eval_macs"] = eval.total_macs;
  j["eval_skipped"] = eval.skipped_macs;
  j["clamp_count"] = clamp_count;
  if (wall_ms) j["wall_ms"] = *wall_ms;
  j["scales"] = nlohmann::ordered_json::array();
  for (const auto& s : scales) j["scales"].push_back({s.S, s.U, s.D});
  return j;
}

namespace {

// Fixed, unshuffled chunks of one batch size each.
EvalResult evaluate_split(const Trainer& trainer, const Dataset& d, std::size_t chunk) {
  EvalResult total;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < d.rows; start += chunk) {
    std::vector<std::size_t> rows(std::min(chunk, d.rows - start));
    std::iota(rows.begin(), rows.end(), start);
    const Batch b = gather(d, rows);
    const EvalResult r = trainer.evaluate(b.view());
    loss_sum += r.loss * double(r.rows);
    total.correct += r.correct;
    total.rows += r.rows;
    total.macs += r.macs;
  }
  total.loss = total.rows ? loss_sum / double(total.rows) : 0.0;
  return total;
}

}  // namespace

MetricsRecord evaluate_model(const Trainer& trainer, const ExperimentData& data, const RunConfig& cfg) {
  MetricsRecord rec;
  if (cfg.dataset == DatasetKind::kMnist) {
    const EvalResult r = evaluate_split(trainer, data.test, cfg.batch);
    rec.eval_accuracy = r.accuracy();
    rec.eval = r.macs;
  } else {
    const EvalResult n = evaluate_split(trainer, data.test_normal, cfg.batch);
    const EvalResult a = evaluate_split(trainer, data.test_anomaly, cfg.batch);
    rec.eval_normal_mse = n.loss;
    rec.eval_anomaly_mse = a.loss;
    rec.eval = n.macs;
    rec.eval += a.macs;
  }
  rec.scales = trainer.scales();
  return rec;
}

RunSummary run_experiment(const RunConfig& cfg, std::ostream* metrics) {
  cfg.validate();
  const ExperimentData data = load_data(cfg);
  RunSummary summary;
  summary.trainer = make_trainer(cfg);
  Trainer& trainer = *summary.trainer;

  std::ofstream file;
  if (!metrics && !cfg.output.empty()) {
    file.open(cfg.output);
    if (!file) throw DataError("cannot write metrics file " + cfg.output);
    metrics = &file;
  }

  const auto t0 = std::chrono::steady_clock::now();
  BatchSampler sampler(data.train.rows, cfg.seed);
  MacCounters fwd, bwd;
  std::uint64_t clamps = 0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  const auto emit = [&](std::size_t iteration, double train_loss) {
    MetricsRecord rec = evaluate_model(trainer, data, cfg);
    rec.iteration = iteration;
    rec.train_loss = train_loss;
    rec.train_forward = fwd;
    rec.train_backward = bwd;
    rec.clamp_count = clamps;
    if (cfg.record_wall_clock) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    if (metrics) *metrics << rec.to_json().dump() << '\n';
    summary.records.push_back(std::move(rec));
  };

  Batch batch = gather(data.train, sampler.next(cfg.batch));
  emit(0, trainer.evaluate(batch.view()).loss);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    if (it > 1) batch = gather(data.train, sampler.next(cfg.batch));
    const TrainResult r = trainer.step(batch.view());
    fwd += r.forward;
    bwd += r.backward;
    clamps += r.clamped;
    loss_sum += r.loss;
    ++loss_count;
    if (it % cfg.eval_every == 0 || it == cfg.iterations) {
      emit(it, loss_sum / double(loss_count));
      loss_sum = 0.0;
      loss_count = 0;
    }
  }
  if (metrics) metrics->flush();
  if (!cfg.weights_out.empty()) save_weights(trainer, cfg.weights_out);
  return summary;
}

}  // namespace tintin
