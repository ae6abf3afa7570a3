// SPDX-License-Identifier: Apache-2.0
#include "tintin/harness/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <future>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tintin/baseline.hpp"
#include "tintin/harness/config.hpp"
#include "tintin/harness/experiment.hpp"
#include "tintin/rescale.hpp"

namespace tintin {

namespace {

namespace fs = std::filesystem;

// Missing or invalid config files are usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig read_config(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path);
  try {
    RunConfig cfg = load_config(path);
    resolve_paths(cfg, fs::absolute(path).parent_path());
    cfg.validate();
    return cfg;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

std::string with_suffix(const std::string& path, const std::string& tag) {
  if (path.empty()) return path;
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + "." + tag + p.extension().string())).string();
}

std::string summarize(const RunConfig& cfg, const MetricsRecord& last) {
  std::ostringstream s;
  s << "backend=" << to_string(cfg.backend);
  if (cfg.backend == BackendKind::kInt) s << " m=" << cfg.m;
  s << " iterations=" << last.iteration << " train_loss=" << last.train_loss;
  if (last.eval_accuracy) s << " test_accuracy=" << *last.eval_accuracy;
  if (last.eval_normal_mse && last.eval_anomaly_mse) {
    s << " normal_mse=" << *last.eval_normal_mse << " anomaly_mse=" << *last.eval_anomaly_mse;
    if (*last.eval_anomaly_mse > 0.0) s << " ratio=" << *last.eval_normal_mse / *last.eval_anomaly_mse;
  }
  if (last.eval.total_macs > 0) s << " eval_skipped_fraction=" << last.eval.skipped_fraction();
  return s.str();
}

int cmd_train(const std::string& config_path, const std::vector<int>& sweep, unsigned jobs, std::ostream& out) {
  const RunConfig base = read_config(config_path);
  if (sweep.empty()) {
    const RunSummary r = run_experiment(base);
    out << summarize(base, r.records.back()) << '\n';
    return kExitOk;
  }
  if (base.backend != BackendKind::kInt) throw UsageError("--m-sweep needs backend = int");
  std::vector<RunConfig> runs;
  for (int m : sweep) {
    RunConfig c = base;
    c.m = m;
    c.output = with_suffix(base.output, "m" + std::to_string(m));
    c.weights_out = with_suffix(base.weights_out, "m" + std::to_string(m));
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    runs.push_back(std::move(c));
  }
  // each run owns its model, counters and output file
  std::vector<std::string> lines(runs.size());
  const std::size_t width = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < runs.size(); start += width) {
    std::vector<std::future<std::string>> pending;
    for (std::size_t i = start; i < std::min(runs.size(), start + width); ++i) {
      pending.push_back(std::async(std::launch::async, [&runs, i] {
        return summarize(runs[i], run_experiment(runs[i]).records.back());
      }));
    }
    for (std::size_t i = 0; i < pending.size(); ++i) lines[start + i] = pending[i].get();
  }
  for (const auto& l : lines) out << l << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& weights, std::ostream& out) {
  const RunConfig cfg = read_config(config_path);
  if (!fs::is_regular_file(weights)) throw UsageError("weights file not found: " + weights);
  const auto trainer = load_trainer(cfg, weights);
  const ExperimentData data = load_data(cfg);
  out << evaluate_model(*trainer, data, cfg).to_json().dump() << '\n';
  return kExitOk;
}

int cmd_estimate(const std::string& config_path, std::ostream& out) {
  const RunConfig cfg = read_config(config_path);
  const ModelSpec spec = cfg.model_spec();
  const MemoryEstimate i8 = estimate_memory(spec, cfg.batch, 1);
  const MemoryEstimate f32 = estimate_memory(spec, cfg.batch, 4);
  const auto row = [&](const char* name, const MemoryEstimate& e) {
    out << name << " params=" << e.params_bytes << " activations=" << e.activations_bytes
        << " dynamic=" << e.dynamic_bytes << " total=" << e.total_bytes << '\n';
  };
  row("int8", i8);
  row("fp32", f32);
  out << "ratio=" << double(i8.total_bytes) / double(f32.total_bytes) << '\n';
  return kExitOk;
}

int cmd_table(std::ostream& out) {
  const RescaleTable& t = default_rescale_table();
  out << "# q_ratio  adjustment  delta(S,U,D)  ops\n";
  for (const auto& e : t.entries) {
    out << to_string(e.q_ratio) << "  " << to_string(e.adjustment()) << "  " << e.delta.str() << "  "
        << e.op_count() << '\n';
  }
  out << t.entries.size() << " entries\n";
  return kExitOk;
}

int cmd_bench(std::size_t n, std::size_t reps, std::ostream& out) {
  if (n == 0 || n > kMaxInnerDim) throw UsageError("--size must be in [1, 65536]");
  if (reps == 0) throw UsageError("--reps must be positive");
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dist(-128, 127);
  std::vector<std::int32_t> av(n * n), wv(n * n);
  for (auto& v : av) v = dist(rng);
  for (auto& v : wv) v = dist(rng);
  const QTensor8 a = QTensor8::from_values({n, n}, av, Signedness::kSigned);
  const QTensor8 w = QTensor8::from_values({n, n}, wv, Signedness::kSigned);
  const std::vector<float> af(av.begin(), av.end()), wf(wv.begin(), wv.end());

  using clock = std::chrono::steady_clock;
  std::int64_t sink = 0;
  auto t0 = clock::now();
  for (std::size_t r = 0; r < reps; ++r) {
    MacCounters c;
    sink += int_matmul(a, w, c).data[0];
  }
  const double int_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / double(reps);

  std::vector<float> y(n * n);
  t0 = clock::now();
  for (std::size_t r = 0; r < reps; ++r) {
    std::fill(y.begin(), y.end(), 0.0f);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const float x = af[i * n + k];
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] += x * wf[k * n + j];
      }
    sink += static_cast<std::int64_t>(y[0]);
  }
  const double fp_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / double(reps);

  out << "size=" << n << " reps=" << reps << '\n';
  out << "int8 matmul (int32 acc): " << int_ms << " ms/rep\n";
  out << "fp32 matmul: " << fp_ms << " ms/rep\n";
  out << "checksum=" << sink << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Integer-only neural network training"};
  app.require_subcommand(1);

  std::string config, weights;
  std::vector<int> sweep;
  unsigned jobs = 1;
  std::size_t size = 64, reps = 10;

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("config", config, "Config file")->required();
  train->add_option("--m-sweep", sweep, "Train once per update factor m (int backend)")->delimiter(',');
  train->add_option("--jobs", jobs, "Concurrent runs for --m-sweep")->check(CLI::Range(1u, 64u));

  auto* eval = app.add_subcommand("eval", "Evaluate saved weights on the config's test splits");
  eval->add_option("config", config, "Config file")->required();
  eval->add_option("weights", weights, "Weights file")->required();

  auto* mem = app.add_subcommand("estimate-mem", "Estimate int8 and fp32 training memory");
  mem->add_option("config", config, "Config file")->required();

  auto* table = app.add_subcommand("table", "Print the rescale table");

  auto* bench = app.add_subcommand("bench-matmul", "Time int8 and fp32 matrix multiplication");
  bench->add_option("--size", size, "Square matrix size");
  bench->add_option("--reps", reps, "Repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(config, sweep, jobs, out);
    if (*eval) return cmd_eval(config, weights, out);
    if (*mem) return cmd_estimate(config, out);
    if (*table) return cmd_table(out);
    if (*bench) return cmd_bench(size, reps, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace tintin
