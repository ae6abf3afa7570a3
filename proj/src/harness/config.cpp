// SPDX-License-Identifier: Apache-2.0
#include "tintin/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace tintin {

std::string to_string(BackendKind b) {
  switch (b) {
    case BackendKind::kInt: return "int";
    case BackendKind::kFp: return "fp";
    case BackendKind::kFpMomentum: return "fp-m";
  }
  return "?";
}

std::string to_string(DatasetKind d) {
  switch (d) {
    case DatasetKind::kSynth: return "synth";
    case DatasetKind::kCsv: return "csv";
    case DatasetKind::kMnist: return "mnist";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, at == std::string_view::npos ? at : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

template <typename T>
T parse_int(const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> emit;
};

template <typename T>
Field int_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = parse_int<T>(v); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = parse_double(v); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

// Serialization order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"backend",
       {[](RunConfig& c, const std::string& v) {
          if (v == "int") c.backend = BackendKind::kInt;
          else if (v == "fp") c.backend = BackendKind::kFp;
          else if (v == "fp-m") c.backend = BackendKind::kFpMomentum;
          else throw ConfigError("backend must be int, fp or fp-m, got '" + v + "'");
        },
        [](const RunConfig& c) { return to_string(c.backend); }}},
      {"dataset",
       {[](RunConfig& c, const std::string& v) {
          if (v == "synth") c.dataset = DatasetKind::kSynth;
          else if (v == "csv") c.dataset = DatasetKind::kCsv;
          else if (v == "mnist") c.dataset = DatasetKind::kMnist;
          else throw ConfigError("dataset must be synth, csv or mnist, got '" + v + "'");
        },
        [](const RunConfig& c) { return to_string(c.dataset); }}},
      {"widths",
       {[](RunConfig& c, const std::string& v) {
          c.widths.clear();
          for (const auto& w : split(v, ',')) c.widths.push_back(parse_int<std::size_t>(w));
        },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.widths.size(); ++i) s += (i ? "," : "") + std::to_string(c.widths[i]);
          return s;
        }}},
      {"loss",
       {[](RunConfig& c, const std::string& v) {
          try {
            c.loss = loss_kind_from_string(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
        },
        [](const RunConfig& c) { return to_string(c.loss); }}},
      {"m", int_field(&RunConfig::m)},
      {"lr", double_field(&RunConfig::lr)},
      {"momentum", double_field(&RunConfig::momentum)},
      {"batch", int_field(&RunConfig::batch)},
      {"iterations", int_field(&RunConfig::iterations)},
      {"eval_every", int_field(&RunConfig::eval_every)},
      {"seed", int_field(&RunConfig::seed)},
      {"output", string_field(&RunConfig::output)},
      {"weights_out", string_field(&RunConfig::weights_out)},
      {"record_wall_clock",
       {[](RunConfig& c, const std::string& v) { c.record_wall_clock = parse_bool(v); },
        [](const RunConfig& c) { return std::string(c.record_wall_clock ? "true" : "false"); }}},
      {"synth_train", int_field(&RunConfig::synth_train)},
      {"synth_test", int_field(&RunConfig::synth_test)},
      {"synth_noise", double_field(&RunConfig::synth_noise)},
      {"window", int_field(&RunConfig::window)},
      {"csv_train", string_field(&RunConfig::csv_train)},
      {"csv_test_normal", string_field(&RunConfig::csv_test_normal)},
      {"csv_test_anomaly", string_field(&RunConfig::csv_test_anomaly)},
      {"csv_columns", string_field(&RunConfig::csv_columns)},
      {"csv_stride", int_field(&RunConfig::csv_stride)},
      {"mnist_dir", string_field(&RunConfig::mnist_dir)},
      {"mnist_train", int_field(&RunConfig::mnist_train)},
      {"mnist_test", int_field(&RunConfig::mnist_test)},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace

ModelSpec RunConfig::model_spec() const {
  ModelSpec s;
  s.widths = widths;
  s.loss = loss;
  s.m = m;
  s.batch = batch;
  s.seed = seed;
  return s;
}

std::size_t RunConfig::csv_channel_count() const { return split(csv_columns, ',').size(); }

void RunConfig::validate() const {
  if (widths.size() < 2) throw ConfigError("widths needs at least an input and an output width");
  for (auto w : widths) {
    if (w == 0) throw ConfigError("widths must be positive");
  }
  if (batch == 0) throw ConfigError("batch must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (backend == BackendKind::kInt && (m < 1 || m > 6)) throw ConfigError("m must be in [1, 6]");
  if (backend != BackendKind::kInt && !(lr > 0.0)) throw ConfigError("lr must be positive");
  if (backend == BackendKind::kFpMomentum && !(momentum > 0.0 && momentum < 1.0)) {
    throw ConfigError("fp-m needs momentum in (0, 1)");
  }
  switch (dataset) {
    case DatasetKind::kSynth:
    case DatasetKind::kCsv: {
      if (loss != LossKind::kMse) throw ConfigError("series datasets train an autoencoder; use loss = mse");
      const std::size_t channels = dataset == DatasetKind::kCsv ? csv_channel_count() : 1;
      if (window == 0) throw ConfigError("window must be positive");
      if (widths.front() != window * channels || widths.back() != widths.front()) {
        throw ConfigError("autoencoder widths must start and end with window * channels = " +
                          std::to_string(window * channels));
      }
      if (dataset == DatasetKind::kSynth && (synth_train == 0 || synth_test == 0)) {
        throw ConfigError("synth_train and synth_test must be positive");
      }
      if (dataset == DatasetKind::kSynth && !(synth_noise >= 0.0)) throw ConfigError("synth_noise must be >= 0");
      if (dataset == DatasetKind::kCsv) {
        if (csv_train.empty() || csv_test_normal.empty() || csv_test_anomaly.empty()) {
          throw ConfigError("csv needs csv_train, csv_test_normal and csv_test_anomaly");
        }
        if (csv_stride == 0) throw ConfigError("csv_stride must be positive");
      }
      break;
    }
    case DatasetKind::kMnist:
      if (loss != LossKind::kClassification) throw ConfigError("mnist needs loss = classification");
      if (widths.front() != 784 || widths.back() != 10) throw ConfigError("mnist widths must be 784,...,10");
      if (mnist_dir.empty()) throw ConfigError("mnist needs mnist_dir");
      break;
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  bool versioned = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      if (key == "version") {
        if (parse_int<int>(value) != kConfigVersion) {
          throw ConfigError("unsupported version " + value + ", expected " + std::to_string(kConfigVersion));
        }
        versioned = true;
        continue;
      }
      const Field* f = find_field(key);
      if (!f) throw ConfigError("unknown key '" + key + "'");
      f->parse(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!versioned) throw ConfigError("missing 'version = " + std::to_string(kConfigVersion) + "'");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out = "version = " + std::to_string(kConfigVersion) + "\n";
  for (const auto& [key, f] : fields()) out += key + " = " + f.emit(cfg) + "\n";
  return out;
}

void resolve_paths(RunConfig& cfg, const std::filesystem::path& base) {
  for (std::string* p : {&cfg.output, &cfg.weights_out, &cfg.csv_train, &cfg.csv_test_normal,
                         &cfg.csv_test_anomaly, &cfg.mnist_dir}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
}

}  // namespace tintin
