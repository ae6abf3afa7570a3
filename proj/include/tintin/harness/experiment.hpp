// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_HARNESS_EXPERIMENT_HPP_
#define TINTIN_HARNESS_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tintin/harness/config.hpp"
#include "tintin/harness/datasets.hpp"
#include "tintin/int_model.hpp"

namespace tintin {

// Train split plus fixed evaluation splits. Series datasets fill
// test_normal/test_anomaly, MNIST fills test.
struct ExperimentData {
  Dataset train;
  Dataset test_normal;
  Dataset test_anomaly;
  Dataset test;
};

ExperimentData load_data(const RunConfig& cfg);

// Epoch-wise shuffled indices; an epoch is reshuffled when exhausted.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t batch);

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

// Owned rows of a dataset, viewable as a BatchView.
struct Batch {
  std::vector<double> x;
  std::vector<int> labels;
  std::size_t rows = 0;

  BatchView view() const { return {x, rows, labels}; }
};

Batch gather(const Dataset& d, const std::vector<std::size_t>& rows);
Batch whole(const Dataset& d);

struct EvalResult {
  double loss = 0.0;         // MSE against the real input, or mean cross-entropy
  std::size_t correct = 0;   // classification only
  std::size_t rows = 0;
  MacCounters macs;          // forward pass

  double accuracy() const { return rows ? double(correct) / double(rows) : 0.0; }
};

struct TrainResult {
  double loss = 0.0;  // pre-update batch loss
  MacCounters forward;
  MacCounters backward;
  std::size_t clamped = 0;
};

// One training backend behind a common interface.
class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual TrainResult step(const BatchView& batch) = 0;
  virtual EvalResult evaluate(const BatchView& batch) const = 0;
  // Per-layer weight scales; empty for the fp backends.
  virtual std::vector<ScaleExp> scales() const = 0;
  virtual nlohmann::json weights_json() const = 0;
};

// Fresh model for cfg.backend.
std::unique_ptr<Trainer> make_trainer(const RunConfig& cfg);
// Model restored from a weights file written by save_weights.
std::unique_ptr<Trainer> load_trainer(const RunConfig& cfg, const std::filesystem::path& weights);
void save_weights(const Trainer& trainer, const std::filesystem::path& path);

// The integer model inside an int trainer, nullptr otherwise.
const IntModel* int_model_of(const Trainer& trainer);

// One line of the metrics file. Field order in JSON:
//   iteration, train_loss, eval_normal_mse, eval_anomaly_mse, eval_accuracy,
//   train_fwd_macs, train_fwd_skipped, train_bwd_macs, train_bwd_skipped,
//   eval_macs, eval_skipped, clamp_count, wall_ms, scales
// Eval fields that do not apply to the dataset and wall_ms (unless
// record_wall_clock) are omitted. MAC and clamp counts are cumulative over
// training; train_loss is the mean batch loss since the previous record
// (iteration 0: loss of the first batch before any update).
struct MetricsRecord {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  std::optional<double> eval_normal_mse;
  std::optional<double> eval_anomaly_mse;
  std::optional<double> eval_accuracy;
  MacCounters train_forward;
  MacCounters train_backward;
  MacCounters eval;
  std::uint64_t clamp_count = 0;
  std::optional<double> wall_ms;
  std::vector<ScaleExp> scales;

  nlohmann::ordered_json to_json() const;
};

struct RunSummary {
  std::vector<MetricsRecord> records;
  std::unique_ptr<Trainer> trainer;  // final model
};

// Trains per cfg, evaluating at iteration 0, every eval_every iterations and
// at the end. Records are streamed to `metrics` when non-null, else to
// cfg.output when set. Validates cfg before loading data.
RunSummary run_experiment(const RunConfig& cfg, std::ostream* metrics = nullptr);

// Same evaluation as the metrics records, on a given model.
MetricsRecord evaluate_model(const Trainer& trainer, const ExperimentData& data, const RunConfig& cfg);

}  // namespace tintin

#endif  // TINTIN_HARNESS_EXPERIMENT_HPP_
