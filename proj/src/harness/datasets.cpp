// SPDX-License-Identifier: Apache-2.0
#include "tintin/harness/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace tintin {

double normalize(double v, const MinMax& range) {
  if (range.hi <= range.lo) return 0.0;
  return 2.0 * (v - range.lo) / (range.hi - range.lo) - 1.0;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

std::vector<double> read_csv_columns(const std::filesystem::path& path,
                                     const std::vector<CsvColumn>& columns) {
  if (columns.empty()) throw DataError("no CSV columns selected");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file " + path.string());
  const bool by_name = std::any_of(columns.begin(), columns.end(),
                                   [](const CsvColumn& c) { return !c.name.empty(); });
  std::vector<std::size_t> idx;
  if (!by_name) {
    for (const auto& c : columns) idx.push_back(c.index);
  }
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (first) {
      first = false;
      const bool numeric = std::all_of(fields.begin(), fields.end(),
                                       [](std::string_view f) { return parse_number(f).has_value(); });
      if (!numeric) {
        if (by_name) {
          for (const auto& c : columns) {
            if (c.name.empty()) {
              idx.push_back(c.index);
              continue;
            }
            const auto it = std::find(fields.begin(), fields.end(), c.name);
            if (it == fields.end()) {
              throw DataError(path.string() + ": no column named '" + c.name + "' in header");
            }
            idx.push_back(static_cast<std::size_t>(it - fields.begin()));
          }
        }
        continue;
      }
      if (by_name) throw DataError(path.string() + ": named column requested but the file has no header");
    }
    for (std::size_t c : idx) {
      if (c >= fields.size()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": missing column " + std::to_string(c));
      }
      const auto v = parse_number(fields[c]);
      if (!v) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed value '" +
                        std::string(fields[c]) + "'");
      }
      out.push_back(*v);
    }
  }
  return out;
}

std::vector<double> read_csv_column(const std::filesystem::path& path, const CsvColumn& column) {
  return read_csv_columns(path, {column});
}

void write_csv_series(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (double v : values) out << v << '\n';
}

Dataset window_series(const std::vector<double>& series, std::size_t window, std::size_t stride,
                      WindowLabel label, std::size_t channels) {
  if (window == 0 || stride == 0 || channels == 0) {
    throw DataError("window, stride and channel count must be positive");
  }
  if (series.size() % channels != 0) throw DataError("series length is not a multiple of the channel count");
  const std::size_t steps = series.size() / channels;
  if (steps < window) {
    throw DataError("series of length " + std::to_string(steps) + " is shorter than the window " +
                    std::to_string(window));
  }
  Dataset d;
  d.cols = window * channels;
  d.rows = (steps - window) / stride + 1;
  d.x.reserve(d.rows * d.cols);
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto first = series.begin() + static_cast<std::ptrdiff_t>(r * stride * channels);
    d.x.insert(d.x.end(), first, first + static_cast<std::ptrdiff_t>(d.cols));
  }
  d.labels.assign(d.rows, static_cast<int>(label));
  return d;
}

namespace {

MinMax range_of(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

void normalize_in_place(Dataset& d, const MinMax& range) {
  for (auto& v : d.x) v = normalize(v, range);
}

}  // namespace

WindowedSeries load_csv_series(const std::filesystem::path& path, std::size_t window,
                               std::size_t stride, const std::vector<CsvColumn>& columns,
                               const MinMax* range, WindowLabel label) {
  const auto series = read_csv_columns(path, columns);
  WindowedSeries out;
  out.data = window_series(series, window, stride, label, columns.size());
  out.range = range ? *range : range_of(series);
  normalize_in_place(out.data, out.range);
  return out;
}

double vibration_signal(std::uint64_t t) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  constexpr std::uint64_t p = kVibrationPeriod;
  // phases as integer residues so that the signal is exactly periodic
  const double a = std::sin(kTwoPi * double((3 * t) % p) / double(p));
  const double b = std::sin(kTwoPi * double((7 * t + 5) % p) / double(p));
  return 0.6 * a + 0.3 * b;
}

namespace {

constexpr double kSignalRms = 0.47434164902525688;  // sqrt(0.6^2/2 + 0.3^2/2)
constexpr std::size_t kBurstLength = 6;

std::vector<double> vibration_series(std::uint64_t t0, std::size_t length, double noise,
                                     std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> s(length);
  for (std::size_t i = 0; i < length; ++i) {
    s[i] = vibration_signal(t0 + i);
    if (noise > 0.0) s[i] += noise * gauss(rng);
  }
  return s;
}

std::size_t series_length(std::size_t windows, std::size_t window) {
  return (windows - 1) * kVibrationStride + window;
}

}  // namespace

VibrationSplits synth_vibration(const SynthParams& p) {
  if (p.n_normal == 0 || p.n_anomaly == 0 || p.window == 0) {
    throw std::invalid_argument("synth_vibration: counts and window must be positive");
  }
  std::mt19937_64 rng(p.seed);
  // disjoint time ranges for the three splits
  const std::uint64_t train_t0 = 0;
  const std::uint64_t normal_t0 = series_length(p.n_normal, p.window) + 1000;
  const std::uint64_t anomaly_t0 = normal_t0 + series_length(p.n_anomaly, p.window) + 1000;

  VibrationSplits out;
  out.train = window_series(vibration_series(train_t0, series_length(p.n_normal, p.window), p.noise, rng),
                            p.window, kVibrationStride, WindowLabel::kNormal);
  out.test_normal =
      window_series(vibration_series(normal_t0, series_length(p.n_anomaly, p.window), p.noise, rng),
                    p.window, kVibrationStride, WindowLabel::kNormal);
  out.test_anomaly =
      window_series(vibration_series(anomaly_t0, series_length(p.n_anomaly, p.window), p.noise, rng),
                    p.window, kVibrationStride, WindowLabel::kAnomaly);

  std::uniform_int_distribution<std::size_t> pos(0, p.window - 1);
  std::bernoulli_distribution negative(0.5);
  const double amplitude = 3.0 * kSignalRms;
  for (std::size_t r = 0; r < out.test_anomaly.rows; ++r) {
    const std::size_t at = pos(rng);
    const double sign = negative(rng) ? -1.0 : 1.0;
    double* w = out.test_anomaly.x.data() + r * p.window;
    for (std::size_t k = 0; k < kBurstLength && at + k < p.window; ++k) {
      w[at + k] += sign * amplitude * std::exp(-double(k) / 2.0);
    }
  }

  out.range = range_of(out.train.x);
  normalize_in_place(out.train, out.range);
  normalize_in_place(out.test_normal, out.range);
  normalize_in_place(out.test_anomaly, out.range);
  return out;
}

namespace {

class GzFile {
 public:
  explicit GzFile(const std::filesystem::path& path) : path_(path.string()) {
    f_ = gzopen(path_.c_str(), "rb");
    if (f_ == nullptr) throw DataError("cannot open " + path_);
  }
  ~GzFile() {
    if (f_) gzclose(f_);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read(void* dst, std::size_t n) {
    const int got = gzread(f_, dst, static_cast<unsigned>(n));
    if (got < 0 || static_cast<std::size_t>(got) != n) throw DataError(path_ + ": truncated file");
  }
  std::uint32_t read_be32() {
    std::array<unsigned char, 4> b{};
    read(b.data(), 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  gzFile f_ = nullptr;
};

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& name) {
  if (std::filesystem::exists(dir / name)) return dir / name;
  if (std::filesystem::exists(dir / (name + ".gz"))) return dir / (name + ".gz");
  throw DataError("missing MNIST file " + (dir / name).string() + "[.gz]");
}

}  // namespace

Dataset read_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::size_t limit) {
  GzFile img(images), lab(labels);
  if (img.read_be32() != kImagesMagic) throw DataError(img.path() + ": bad magic, expected 0x00000803");
  if (lab.read_be32() != kLabelsMagic) throw DataError(lab.path() + ": bad magic, expected 0x00000801");
  const std::uint32_t n_img = img.read_be32();
  const std::uint32_t rows = img.read_be32();
  const std::uint32_t cols = img.read_be32();
  const std::uint32_t n_lab = lab.read_be32();
  if (n_img != n_lab) {
    throw DataError("image count " + std::to_string(n_img) + " does not match label count " +
                    std::to_string(n_lab));
  }
  Dataset d;
  d.cols = std::size_t{rows} * cols;
  d.rows = std::min<std::size_t>(limit, n_img);
  std::vector<unsigned char> pixels(d.rows * d.cols), classes(d.rows);
  if (d.rows > 0) {
    img.read(pixels.data(), pixels.size());
    lab.read(classes.data(), classes.size());
  }
  d.x.resize(pixels.size());
  std::transform(pixels.begin(), pixels.end(), d.x.begin(), [](unsigned char p) { return p / 255.0; });
  d.labels.assign(classes.begin(), classes.end());
  for (int y : d.labels) {
    if (y > 9) throw DataError(lab.path() + ": label " + std::to_string(y) + " outside 0-9");
  }
  return d;
}

MnistData load_mnist(const std::filesystem::path& dir, std::size_t train_limit, std::size_t test_limit) {
  MnistData m;
  m.train = read_idx_pair(resolve(dir, "train-images-idx3-ubyte"), resolve(dir, "train-labels-idx1-ubyte"),
                          train_limit);
  m.test = read_idx_pair(resolve(dir, "t10k-images-idx3-ubyte"), resolve(dir, "t10k-labels-idx1-ubyte"),
                         test_limit);
  return m;
}

}  // namespace tintin
