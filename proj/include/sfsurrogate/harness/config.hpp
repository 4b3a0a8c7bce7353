#pragma once

#include <charconv>
#include <cstdint>
#include <initializer_list>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sfsurrogate/error.hpp"
#include "sfsurrogate/io/csv.hpp"
#include "sfsurrogate/io/digest.hpp"
#include "sfsurrogate/nn/mlp.hpp"
#include "sfsurrogate/nn/unet.hpp"

namespace sfs::harness {

enum class ModelKind { mlp, res_se_unet };
enum class Task { interpolation, extrapolation };

inline std::string to_string(ModelKind m) { return m == ModelKind::mlp ? "mlp" : "res_se_unet"; }
inline std::string to_string(Task t) {
  return t == Task::interpolation ? "interpolation" : "extrapolation";
}

struct ExperimentConfig {
  ModelKind model = ModelKind::res_se_unet;
  Task task = Task::interpolation;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::size_t epochs = 8000;
  std::size_t batch_size = 54;
  double learning_rate = 1e-3;
  double width_multiplier = 1.0;
  nn::SkipMode skip = nn::SkipMode::concat;
  nn::MlpInputMode mlp_input = nn::MlpInputMode::geo_bf_t;
  double test_ratio = 0.10;
  std::size_t bf_stride = 1;  // keep every n-th binder force level
  std::size_t eval_every = 10;
  std::filesystem::path dataset;  // empty: generate in memory
  std::filesystem::path output_dir = "run";
  unsigned workers = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (bf_stride < 1) throw ConfigError("bf_stride must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(width_multiplier > 0.0)) throw ConfigError("width_multiplier must be > 0");
    if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw ConfigError("test_ratio must lie in (0, 1)");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
  }

  /// Key/value pairs in their fixed serialization order.
  std::vector<std::pair<std::string, std::string>> entries() const {
    return {
        {"model", to_string(model)},
        {"task", to_string(task)},
        {"seed", std::to_string(seed)},
        {"split_seed", std::to_string(split_seed)},
        {"epochs", std::to_string(epochs)},
        {"batch_size", std::to_string(batch_size)},
        {"learning_rate", io::format_double(learning_rate)},
        {"width_multiplier", io::format_double(width_multiplier)},
        {"skip", skip == nn::SkipMode::concat ? "concat" : "add"},
        {"mlp_input", mlp_input == nn::MlpInputMode::geo_bf_t ? "geo_bf_t" : "radii_bf_t"},
        {"test_ratio", io::format_double(test_ratio)},
        {"bf_stride", std::to_string(bf_stride)},
        {"eval_every", std::to_string(eval_every)},
        {"dataset", dataset.string()},
        {"output_dir", output_dir.string()},
        {"workers", std::to_string(workers)},
    };
  }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : entries()) out += k + "=" + v + "\n";
    return out;
  }

  /// Digest of every setting that can change results; output_dir, workers
  /// and the dataset path are excluded.
  std::string digest() const {
    std::string s;
    for (const auto& [k, v] : entries()) {
      if (k == "output_dir" || k == "workers" || k == "dataset") continue;
      s += k + "=" + v + "\n";
    }
    return io::sha256_hex(s);
  }

  void set(const std::string& key, const std::string& value);

  static ExperimentConfig parse(const std::string& text) {
    ExperimentConfig c;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + " has no '='");
      }
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) { return parse(io::read_text(path)); }

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got \"" + v + "\"");
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v);
  } catch (const FormatError&) {
    throw ConfigError(key + ": expected a number, got \"" + v + "\"");
  }
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& v) {
  using detail::parse_real;
  using detail::parse_unsigned;
  auto choose = [&](std::initializer_list<const char*> names) {
    std::size_t i = 0;
    for (const char* n : names) {
      if (v == n) return i;
      ++i;
    }
    throw ConfigError(key + ": unknown value \"" + v + "\"");
  };
  if (key == "model") {
    model = choose({"mlp", "res_se_unet"}) == 0 ? ModelKind::mlp : ModelKind::res_se_unet;
  } else if (key == "task") {
    task = choose({"interpolation", "extrapolation"}) == 0 ? Task::interpolation : Task::extrapolation;
  } else if (key == "seed") {
    seed = parse_unsigned(key, v);
  } else if (key == "split_seed") {
    split_seed = parse_unsigned(key, v);
  } else if (key == "epochs") {
    epochs = parse_unsigned(key, v);
  } else if (key == "batch_size") {
    batch_size = parse_unsigned(key, v);
  } else if (key == "learning_rate") {
    learning_rate = parse_real(key, v);
  } else if (key == "width_multiplier") {
    width_multiplier = parse_real(key, v);
  } else if (key == "skip") {
    skip = choose({"concat", "add"}) == 0 ? nn::SkipMode::concat : nn::SkipMode::add;
  } else if (key == "mlp_input") {
    mlp_input = choose({"geo_bf_t", "radii_bf_t"}) == 0 ? nn::MlpInputMode::geo_bf_t
                                                         : nn::MlpInputMode::radii_bf_t;
  } else if (key == "test_ratio") {
    test_ratio = parse_real(key, v);
  } else if (key == "bf_stride") {
    bf_stride = parse_unsigned(key, v);
  } else if (key == "eval_every") {
    eval_every = parse_unsigned(key, v);
  } else if (key == "dataset") {
    dataset = v;
  } else if (key == "output_dir") {
    output_dir = v;
  } else if (key == "workers") {
    workers = static_cast<unsigned>(parse_unsigned(key, v));
  } else {
    throw ConfigError("unknown config key \"" + key + "\"");
  }
}

/// "small": width 1/8, 300 epochs, every 4th binder force (270 designs).
/// "full": full width, 8000 or 4000 epochs by task, all 1,080 designs.
inline ExperimentConfig preset(const std::string& name, ModelKind model, Task task) {
  ExperimentConfig c;
  c.model = model;
  c.task = task;
  if (name == "small") {
    c.width_multiplier = 0.125;
    c.epochs = 300;
    c.bf_stride = 4;
  } else if (name == "full") {
    c.width_multiplier = 1.0;
    c.epochs = task == Task::interpolation ? 8000 : 4000;
    c.bf_stride = 1;
  } else {
    throw ConfigError("unknown preset \"" + name + "\" (expected small or full)");
  }
  return c;
}

}  // namespace sfs::harness
