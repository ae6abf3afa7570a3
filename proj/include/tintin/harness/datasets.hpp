// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_HARNESS_DATASETS_HPP_
#define TINTIN_HARNESS_DATASETS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tintin {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major samples; labels are class indices (classification) or
// 0 = normal / 1 = anomaly (windowed series), possibly empty.
struct Dataset {
  std::vector<double> x;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> labels;

  const double* row(std::size_t i) const { return x.data() + i * cols; }
};

enum class WindowLabel : int { kNormal = 0, kAnomaly = 1 };

struct MinMax {
  double lo = 0.0;
  double hi = 0.0;
};

// Maps [lo, hi] onto [-1, 1]; a constant series (lo == hi) maps to 0.
double normalize(double v, const MinMax& range);

// --- CSV series ---------------------------------------------------------

struct CsvColumn {
  std::size_t index = 0;  // used when name is empty
  std::string name;       // matched against an auto-detected header row
};

// One numeric column of a CSV file. A first row that does not parse as
// numbers is taken as a header. Throws DataError naming the line on
// malformed rows.
std::vector<double> read_csv_column(const std::filesystem::path& path, const CsvColumn& column = {});

// Several columns, interleaved row-major [rows x columns.size()].
std::vector<double> read_csv_columns(const std::filesystem::path& path,
                                     const std::vector<CsvColumn>& columns);

// One value per line with full round-trip precision.
void write_csv_series(const std::filesystem::path& path, const std::vector<double>& values);

// Sliding windows of `window` time steps, `stride` steps apart, over an
// interleaved multi-channel series; each window is flattened to
// window * channels values. Throws DataError if the series is shorter than
// one window.
Dataset window_series(const std::vector<double>& series, std::size_t window, std::size_t stride,
                      WindowLabel label = WindowLabel::kNormal, std::size_t channels = 1);

struct WindowedSeries {
  Dataset data;   // normalized windows
  MinMax range;   // normalization actually applied
};

// Reads, windows and normalizes a series. `range` is the training split's
// min/max; pass nullptr to take it from this file (the training split).
WindowedSeries load_csv_series(const std::filesystem::path& path, std::size_t window,
                               std::size_t stride, const std::vector<CsvColumn>& columns = {CsvColumn{}},
                               const MinMax* range = nullptr, WindowLabel label = WindowLabel::kNormal);

// --- synthetic vibration -------------------------------------------------

struct SynthParams {
  std::size_t n_normal = 1024;   // training windows
  std::size_t n_anomaly = 256;   // test windows of each kind
  std::size_t window = 32;
  double noise = 0.05;
  std::uint64_t seed = 1;
};

// Period (in samples) of the noise-free signal.
inline constexpr std::size_t kVibrationPeriod = 64;
// Distance between consecutive window starts; coprime with the period so
// the windows cycle through every phase.
inline constexpr std::size_t kVibrationStride = 5;

struct VibrationSplits {
  Dataset train;         // normal
  Dataset test_normal;
  Dataset test_anomaly;
  MinMax range;          // from the raw training windows
};

// Two-tone vibration signal plus Gaussian noise, windowed with
// kVibrationStride; anomalies add one decaying impulse of amplitude
// 3x signal RMS at a random position. All splits are normalized with the
// training range. Deterministic in the seed.
VibrationSplits synth_vibration(const SynthParams& params);

// Noise-free signal value at integer time t (exactly periodic in t).
double vibration_signal(std::uint64_t t);

// --- MNIST ---------------------------------------------------------------

struct MnistData {
  Dataset train;
  Dataset test;
};

// Reads IDX image/label files (plain or gzip) from `dir`, using the standard
// train-*/t10k-* names with or without a .gz suffix. Pixels are scaled to
// [0, 1] and flattened to 784; the first `*_limit` items are kept.
MnistData load_mnist(const std::filesystem::path& dir, std::size_t train_limit, std::size_t test_limit);

// Single IDX pair reader, exposed for fixtures.
Dataset read_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::size_t limit);

}  // namespace tintin

#endif  // TINTIN_HARNESS_DATASETS_HPP_
