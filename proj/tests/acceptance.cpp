// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Thresholds and sizes are fixed; do not tune them here.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "support/checks.hpp"
#include "tintin/baseline.hpp"
#include "tintin/harness/experiment.hpp"
#include "tintin/rescale.hpp"

#ifndef TINTIN_TEST_DATA_DIR
#error "TINTIN_TEST_DATA_DIR must point at tests/data"
#endif

namespace {

using namespace tintin;
using tintin::testing::PropertyResult;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Anomaly-detection run shared by criteria 6, 7, 9 and 11.
RunConfig autoencoder_config(std::uint64_t seed) {
  RunConfig c;
  c.backend = BackendKind::kInt;
  c.dataset = DatasetKind::kSynth;
  c.widths = {32, 24, 16, 24, 32};
  c.loss = LossKind::kMse;
  c.m = 4;
  c.batch = 32;
  c.iterations = 500;
  c.eval_every = 10;
  c.seed = seed;
  return c;
}

RunConfig mnist_config(int m) {
  RunConfig c;
  c.backend = BackendKind::kInt;
  c.dataset = DatasetKind::kMnist;
  c.widths = {784, 64, 10};
  c.loss = LossKind::kClassification;
  c.m = m;
  c.batch = 128;
  c.iterations = 300;
  c.eval_every = 50;
  c.seed = 1;
  c.mnist_dir = std::string(TINTIN_TEST_DATA_DIR) + "/mnist";
  c.mnist_train = 2000;
  c.mnist_test = 500;
  return c;
}

std::string describe(const PropertyResult& r) {
  std::ostringstream os;
  os << r.cases << " cases, " << r.failures << " failures";
  if (r.worst > 0) os << ", worst " << r.worst << " of bound";
  if (!r.first_failure.empty()) os << "; first: " << r.first_failure;
  return os.str();
}

Outcome with_limit(Outcome o, double seconds, double limit) {
  std::ostringstream os;
  os << o.detail << " [" << seconds << " s, limit " << limit << " s]";
  o.detail = os.str();
  o.pass = o.pass && seconds < limit;
  return o;
}

Outcome c1_matmul() {
  const PropertyResult r = tintin::testing::check_matmul_oracle(1000, 1);
  return {r.ok(), describe(r)};
}

Outcome c2_rescale_drift() {
  const PropertyResult r = tintin::testing::check_rescale_drift(10000, 2);
  return {r.ok(), describe(r)};
}

Outcome c3_decompose() {
  const Decomposition d = decompose(Rational(5, 6), 3);
  const bool example = d.exponents == std::vector<int>{-1, -2, -4};
  const PropertyResult r = tintin::testing::check_decomposition(10000, 3);
  return {example && r.ok(), std::string("5/6 -> [-1,-2,-4] ") + (example ? "ok" : "WRONG") + "; " + describe(r)};
}

Outcome c4_update_contract() {
  const PropertyResult r = tintin::testing::check_update_fuzz(10000, 4);
  return {r.ok(), describe(r)};
}

Outcome c5_gradient_signs() {
  const auto s = tintin::testing::check_gradient_signs(200, 5);
  std::ostringstream os;
  os << s.agree << "/" << s.compared << " coordinates agree (" << 100.0 * s.fraction() << "%, need >= 95%)";
  return {s.compared >= 100 && s.fraction() >= 0.95, os.str()};
}

struct AutoencoderRun {
  RunSummary summary;
  ExperimentData data;
};

AutoencoderRun& seed1_run() {
  static AutoencoderRun run = [] {
    AutoencoderRun r;
    const RunConfig cfg = autoencoder_config(1);
    r.summary = run_experiment(cfg);
    r.data = load_data(cfg);
    return r;
  }();
  return run;
}

Outcome c6_anomaly() {
  const MetricsRecord& last = seed1_run().summary.records.back();
  const double normal = *last.eval_normal_mse, anomaly = *last.eval_anomaly_mse;
  const double ratio = normal / anomaly;
  std::ostringstream os;
  os << "iteration " << last.iteration << ": normal MSE " << normal << ", anomaly MSE " << anomaly << ", ratio "
     << ratio << " (need < 1 and <= 0.8)";
  return {last.iteration <= 500 && normal < anomaly && ratio <= 0.8, os.str()};
}

Outcome c7_early_loss() {
  int wins = 0;
  std::ostringstream os;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = autoencoder_config(seed);
    cfg.iterations = 50;
    cfg.eval_every = 1;  // the record at 50 holds that iteration's batch loss
    const double int_loss = run_experiment(cfg).records.back().train_loss;
    cfg.backend = BackendKind::kFp;
    cfg.lr = 0.1;
    const double fp_loss = run_experiment(cfg).records.back().train_loss;
    wins += int_loss < fp_loss;
    os << (seed > 1 ? "; " : "") << "seed " << seed << " int " << int_loss << " fp " << fp_loss;
  }
  os << " -> " << wins << "/5 seeds (need >= 4)";
  return {wins >= 4, os.str()};
}

Outcome c8_mnist() {
  const double acc4 = *run_experiment(mnist_config(4)).records.back().eval_accuracy;
  const double acc2 = *run_experiment(mnist_config(2)).records.back().eval_accuracy;
  std::ostringstream os;
  os << "m=4 accuracy " << 100 * acc4 << "% (need >= 85%), m=2 accuracy " << 100 * acc2
     << "% (need <= m=4 - 1 point)";
  return {acc4 >= 0.85 && acc2 <= acc4 - 0.01, os.str()};
}

Outcome c9_mac_skip() {
  AutoencoderRun& run = seed1_run();
  const MetricsRecord& last = run.summary.records.back();
  const IntModel* model = int_model_of(*run.summary.trainer);
  const MacCounters recount = tintin::testing::recount_eval_macs(*model, run.data, autoencoder_config(1).batch);
  std::ostringstream os;
  os << "forward skipped " << last.eval.skipped_macs << "/" << last.eval.total_macs << " = "
     << 100 * last.eval.skipped_fraction() << "% (need > 30%); recount " << recount.skipped_macs << "/"
     << recount.total_macs;
  const bool match = recount.total_macs == last.eval.total_macs && recount.skipped_macs == last.eval.skipped_macs;
  return {match && last.eval.skipped_fraction() > 0.30, os.str()};
}

Outcome c10_memory() {
  ModelSpec spec;
  spec.widths = {32, 24, 16, 24, 32};
  const MemoryEstimate i8 = estimate_memory(spec, 32, 1);
  const MemoryEstimate f32 = estimate_memory(spec, 32, 4);
  // params 32*24+24*16+16*24+24*32 = 2304, activations 32*(24+16+24+32) = 3072,
  // dynamic (768 + 32*32) * 4 = 7168
  const bool exact = i8.params_bytes == 2304 && i8.activations_bytes == 3072 && i8.dynamic_bytes == 7168 &&
                     i8.total_bytes == 12544 && f32.params_bytes == 9216 && f32.activations_bytes == 12288 &&
                     f32.dynamic_bytes == 7168 && f32.total_bytes == 28672;
  const double ratio = double(i8.total_bytes) / double(f32.total_bytes);
  std::ostringstream os;
  os << "int8 " << i8.total_bytes << " B, fp32 " << f32.total_bytes << " B, ratio " << ratio
     << (exact ? " (hand values match)" : " (hand values DIFFER)");
  return {exact && ratio >= 0.25 && ratio <= 0.5, os.str()};
}

Outcome c11_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "tintin_acceptance";
  std::filesystem::create_directories(dir);
  std::string contents[2];
  for (int i = 0; i < 2; ++i) {
    RunConfig cfg = autoencoder_config(1);
    cfg.output = (dir / ("metrics_" + std::to_string(i) + ".jsonl")).string();
    run_experiment(cfg);
    std::ifstream in(cfg.output, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    contents[i] = ss.str();
  }
  std::filesystem::remove_all(dir);
  const bool same = !contents[0].empty() && contents[0] == contents[1];
  return {same, std::to_string(contents[0].size()) + " bytes per run, " + (same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double limit_s;
  };
  const std::vector<Criterion> criteria = {
      {"C1 arithmetic oracle equivalence", c1_matmul, 10},
      {"C2 rescale value preservation", c2_rescale_drift, 30},
      {"C3 decomposition fidelity", c3_decompose, 1e9},
      {"C4 weight-update contract", c4_update_contract, 30},
      {"C5 gradient sign sanity", c5_gradient_signs, 1e9},
      {"C6 anomaly-detection outcome", c6_anomaly, 120},
      {"C7 early loss vs fp baseline", c7_early_loss, 1e9},
      {"C8 MNIST subset", c8_mnist, 300},
      {"C9 MAC-skip accounting", c9_mac_skip, 1e9},
      {"C10 memory estimator", c10_memory, 1e9},
      {"C11 determinism", c11_determinism, 1e9},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s < 1e8) o = with_limit(o, s, c.limit_s);
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
