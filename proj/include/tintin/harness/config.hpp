// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_HARNESS_CONFIG_HPP_
#define TINTIN_HARNESS_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tintin/layers.hpp"

namespace tintin {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BackendKind { kInt, kFp, kFpMomentum };
enum class DatasetKind { kSynth, kCsv, kMnist };

std::string to_string(BackendKind b);
std::string to_string(DatasetKind d);

inline constexpr int kConfigVersion = 1;

// Flat `key = value` run description. Fields for other backends or datasets
// keep their defaults and are ignored.
struct RunConfig {
  BackendKind backend = BackendKind::kInt;
  DatasetKind dataset = DatasetKind::kSynth;
  std::vector<std::size_t> widths{32, 24, 16, 24, 32};
  LossKind loss = LossKind::kMse;

  int m = 4;                // int
  double lr = 0.1;          // fp, fp-m
  double momentum = 0.8;    // fp-m only; fp runs without momentum

  std::size_t batch = 32;
  std::size_t iterations = 500;
  std::size_t eval_every = 10;
  std::uint64_t seed = 1;

  std::string output;       // metrics file, empty: none
  std::string weights_out;  // final weights, empty: none
  bool record_wall_clock = false;

  // synth
  std::size_t synth_train = 1024;
  std::size_t synth_test = 256;
  double synth_noise = 0.05;
  std::size_t window = 32;  // synth and csv, in time steps

  // csv
  std::string csv_train;
  std::string csv_test_normal;
  std::string csv_test_anomaly;
  std::string csv_columns = "0";  // comma-separated indices or header names
  std::size_t csv_stride = 1;

  // mnist
  std::string mnist_dir;
  std::size_t mnist_train = 2000;
  std::size_t mnist_test = 500;

  ModelSpec model_spec() const;
  double effective_momentum() const { return backend == BackendKind::kFpMomentum ? momentum : 0.0; }
  std::size_t csv_channel_count() const;

  // Throws ConfigError.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

// Relative paths inside the text stay as written; see resolve_paths.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);

// Makes data and output paths relative to `base` absolute.
void resolve_paths(RunConfig& cfg, const std::filesystem::path& base);

}  // namespace tintin

#endif  // TINTIN_HARNESS_CONFIG_HPP_
