#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "sfsurrogate/data/dataset_io.hpp"
#include "sfsurrogate/harness/checkpoint.hpp"
#include "sfsurrogate/harness/config.hpp"
#include "sfsurrogate/harness/manifest.hpp"
#include "sfsurrogate/io/csv.hpp"
#include "sfsurrogate/io/pgm.hpp"
#include "sfsurrogate/optim/train.hpp"

namespace sfs::harness {

inline constexpr double mcmpe = 0.04;

inline constexpr const char* metrics_name = "metrics.csv";
inline constexpr const char* checkpoint_name = "checkpoint.sfsm";

/// Samples selected by the config: the dataset file if given, otherwise the
/// generated design space, thinned to every bf_stride-th binder force level.
inline std::vector<data::Sample> load_samples(const ExperimentConfig& c) {
  std::vector<data::Sample> all;
  if (!c.dataset.empty()) {
    all = io::read_dataset(c.dataset);
    std::vector<data::Sample> kept;
    for (auto& s : all) {
      if ((s.design.bf_index - 1) % c.bf_stride == 0) kept.push_back(std::move(s));
    }
    return kept;
  }
  return data::build_dataset(
      data::binder_force_subset(data::enumerate_design_space(), c.bf_stride), c.workers);
}

inline data::Split make_split(const ExperimentConfig& c, const std::vector<data::Sample>& samples) {
  return c.task == Task::interpolation
             ? data::split_interpolation(samples.size(), c.split_seed, c.test_ratio)
             : data::split_extrapolation(data::designs_of(samples), c.test_ratio);
}

/// Digest of split membership by design ordinal, so runs over the same
/// designs and split compare equal regardless of model.
inline std::string split_digest(const std::vector<data::Sample>& samples, const data::Split& split) {
  std::string s = "train";
  for (auto i : split.train) s += " " + std::to_string(samples[i].design.ordinal);
  s += "\ntest";
  for (auto i : split.test) s += " " + std::to_string(samples[i].design.ordinal);
  return io::sha256_hex(s);
}

inline std::string dataset_digest(const std::vector<data::Sample>& samples) {
  io::Sha256 h;
  for (const auto& s : samples) {
    const std::uint64_t ord = s.design.ordinal;
    h.update(&ord, sizeof ord);
    h.update(s.input.values.data(), s.input.values.size() * sizeof(double));
    h.update(s.target.values().data(), s.target.values().size() * sizeof(double));
  }
  return h.hex();
}

inline optim::TrainConfig train_config(const ExperimentConfig& c) {
  optim::TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.adam.learning_rate = c.learning_rate;
  t.seed = c.seed;
  t.eval_every = c.eval_every;
  return t;
}

inline nn::UNetConfig unet_config(const ExperimentConfig& c) {
  nn::UNetConfig u;
  u.width_multiplier = c.width_multiplier;
  u.skip = c.skip;
  return u;
}

inline nn::MlpConfig mlp_config(const ExperimentConfig& c) {
  nn::MlpConfig m;
  m.input_mode = c.mlp_input;
  return m;
}

/// Calls `fn` with a freshly constructed surrogate of the configured kind.
template <typename Fn>
decltype(auto) with_surrogate(const ExperimentConfig& c, Fn&& fn) {
  if (c.model == ModelKind::mlp) {
    optim::MlpSurrogate s(mlp_config(c));
    return fn(s);
  }
  optim::UNetSurrogate s(unet_config(c));
  return fn(s);
}

inline void write_mpe_csv(const std::filesystem::path& path, const std::vector<data::Sample>& samples,
                          const std::vector<std::size_t>& idx, const std::vector<double>& mpe) {
  io::CsvWriter w(path, {"ordinal", "geo", "bf_mpa", "t_mm", "gt_max", "pd_max", "mpe"});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = samples[idx[k]];
    w.row({std::to_string(s.design.ordinal), std::to_string(s.design.geo_index),
           io::format_double(s.design.bf), io::format_double(s.design.t),
           io::format_double(s.max_peeq), io::format_double(s.max_peeq + mpe[k]),
           io::format_double(mpe[k])});
  }
  w.close();
}

inline void write_sorted_mpe_csv(const std::filesystem::path& path, std::vector<double> mpe) {
  std::sort(mpe.begin(), mpe.end());
  io::CsvWriter w(path, {"rank", "mpe"});
  for (std::size_t k = 0; k < mpe.size(); ++k) w.row({std::to_string(k + 1), io::format_double(mpe[k])});
  w.close();
}

struct RunSummary {
  std::filesystem::path dir;
  optim::TrainResult result;
  double wall_seconds = 0.0;
};

using LogFn = std::function<void(const std::string&)>;

/// Trains one model and writes metrics.csv, mpe_{train,test}.csv, their
/// sorted variants, checkpoint.sfsm and manifest.txt into output_dir.
inline RunSummary run_experiment(const ExperimentConfig& c, const LogFn& log = {}) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  if (ec || !std::filesystem::is_directory(c.output_dir)) {
    throw IoError("cannot create output directory " + c.output_dir.string());
  }
  const auto samples = load_samples(c);
  const auto split = make_split(c, samples);
  if (log) {
    log("samples " + std::to_string(samples.size()) + ", train " + std::to_string(split.train.size()) +
        ", test " + std::to_string(split.test.size()));
  }

  RunSummary summary;
  summary.dir = c.output_dir;
  with_surrogate(c, [&](auto& s) {
    summary.result = optim::train(s, samples, split, train_config(c), [&](const optim::MetricsRecord& r) {
      if (log) {
        log("epoch " + std::to_string(r.epoch) + " train_mse " + io::format_double(r.train_mse) +
            " test_mse " + io::format_double(r.test_mse));
      }
    });
    save_checkpoint(c.output_dir / checkpoint_name, s.parameters(), summary.result.adam,
                    {c.digest(), c.epochs});
  });
  const auto& res = summary.result;

  {
    io::CsvWriter w(c.output_dir / metrics_name, {"epoch", "train_mse", "test_mse", "test_lmse"});
    for (const auto& r : res.series) {
      w.row({std::to_string(r.epoch), io::format_double(r.train_mse), io::format_double(r.test_mse),
             io::format_double(r.test_lmse)});
    }
    w.close();
  }
  write_mpe_csv(c.output_dir / "mpe_train.csv", samples, split.train, res.final_train.mpe);
  write_mpe_csv(c.output_dir / "mpe_test.csv", samples, split.test, res.final_test.mpe);
  write_sorted_mpe_csv(c.output_dir / "mpe_train_sorted.csv", res.final_train.mpe);
  write_sorted_mpe_csv(c.output_dir / "mpe_test_sorted.csv", res.final_test.mpe);

  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Manifest m;
  m.set("format", "sfsurrogate-run/1");
  for (const auto& [k, v] : c.entries()) m.set("config." + k, v);
  m.set("config_digest", c.digest());
  m.set("seed", std::to_string(c.seed));
  m.set("dataset_digest", dataset_digest(samples));
  m.set("split_digest", split_digest(samples, split));
  m.set("train_size", std::to_string(split.train.size()));
  m.set("test_size", std::to_string(split.test.size()));
  m.set("steps", std::to_string(res.steps));
  m.set("wall_seconds", io::format_double(summary.wall_seconds));
  for (const char* f : {metrics_name, "mpe_train.csv", "mpe_test.csv", "mpe_train_sorted.csv",
                        "mpe_test_sorted.csv", checkpoint_name}) {
    m.add_file(c.output_dir, f);
  }
  std::ofstream os(c.output_dir / manifest_name, std::ios::binary | std::ios::trunc);
  os << m.serialize();
  if (!os) throw IoError("failed writing manifest in " + c.output_dir.string());
  return summary;
}

/// Rebuilds the config recorded in a run's manifest.
inline ExperimentConfig config_from_manifest(const Manifest& m) {
  ExperimentConfig c;
  for (const auto& [k, v] : m.entries()) {
    if (k.rfind("config.", 0) == 0) c.set(k.substr(7), v);
  }
  c.validate();
  return c;
}

/// True when `dir` holds a finished run of exactly this config whose
/// artifacts still match their recorded digests.
inline bool completed_run_matches(const std::filesystem::path& dir, const ExperimentConfig& c) {
  if (!std::filesystem::exists(dir / manifest_name)) return false;
  try {
    const auto m = Manifest::load(dir / manifest_name);
    const auto* d = m.find("config_digest");
    return d && *d == c.digest() && verify_manifest(dir).empty();
  } catch (const Error&) {
    return false;
  }
}

/// Per-sample signed MPE column from an mpe CSV.
inline std::vector<double> read_mpe_column(const std::filesystem::path& path) {
  const auto rows = io::parse_csv(io::read_text(path));
  if (rows.empty()) throw FormatError(path.string() + " is empty");
  const auto& header = rows.front();
  const auto col = std::find(header.begin(), header.end(), "mpe") - header.begin();
  if (static_cast<std::size_t>(col) == header.size()) throw FormatError(path.string() + " has no mpe column");
  std::vector<double> out;
  for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(io::parse_double(rows[i].at(col)));
  return out;
}

struct RunStats {
  double median_abs_mpe = 0.0;
  double max_abs_mpe = 0.0;
  double fraction_within_mcmpe = 0.0;
  double final_test_lmse = 0.0;
  std::size_t count = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline RunStats mpe_stats(const std::vector<double>& mpe) {
  RunStats s;
  std::vector<double> abs_mpe;
  for (double e : mpe) abs_mpe.push_back(std::abs(e));
  s.count = abs_mpe.size();
  s.median_abs_mpe = median(abs_mpe);
  s.max_abs_mpe = *std::max_element(abs_mpe.begin(), abs_mpe.end());
  s.fraction_within_mcmpe =
      static_cast<double>(std::count_if(abs_mpe.begin(), abs_mpe.end(), [](double e) { return e <= mcmpe; })) /
      static_cast<double>(abs_mpe.size());
  return s;
}

inline std::vector<std::pair<std::size_t, double>> read_lmse_curve(const std::filesystem::path& dir) {
  const auto rows = io::parse_csv(io::read_text(dir / metrics_name));
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    out.emplace_back(std::stoul(rows[i].at(0)), io::parse_double(rows[i].at(3)));
  }
  if (out.empty()) throw FormatError((dir / metrics_name).string() + " has no rows");
  return out;
}

inline RunStats run_stats(const std::filesystem::path& dir) {
  RunStats s = mpe_stats(read_mpe_column(dir / "mpe_test.csv"));
  s.final_test_lmse = read_lmse_curve(dir).back().second;
  return s;
}

struct Comparison {
  RunStats a, b;
  double delta_median_abs_mpe = 0.0;  // a - b
  double delta_max_abs_mpe = 0.0;
  double delta_fraction_within_mcmpe = 0.0;
  double delta_final_test_lmse = 0.0;
};

/// Compares two runs evaluated on the same split. With `figure_dir` set,
/// writes sorted-MPE and LMSE curves side by side for plotting.
inline Comparison compare_runs(const std::filesystem::path& a, const std::filesystem::path& b,
                               const std::filesystem::path& figure_dir = {}) {
  const auto ma = Manifest::load(a / manifest_name);
  const auto mb = Manifest::load(b / manifest_name);
  if (ma.get("split_digest") != mb.get("split_digest") ||
      ma.get("dataset_digest") != mb.get("dataset_digest")) {
    throw ConfigError("runs " + a.string() + " and " + b.string() +
                      " were evaluated on different splits; refusing to compare");
  }
  Comparison c;
  c.a = run_stats(a);
  c.b = run_stats(b);
  c.delta_median_abs_mpe = c.a.median_abs_mpe - c.b.median_abs_mpe;
  c.delta_max_abs_mpe = c.a.max_abs_mpe - c.b.max_abs_mpe;
  c.delta_fraction_within_mcmpe = c.a.fraction_within_mcmpe - c.b.fraction_within_mcmpe;
  c.delta_final_test_lmse = c.a.final_test_lmse - c.b.final_test_lmse;

  if (!figure_dir.empty()) {
    std::filesystem::create_directories(figure_dir);
    auto ea = read_mpe_column(a / "mpe_test.csv"), eb = read_mpe_column(b / "mpe_test.csv");
    std::sort(ea.begin(), ea.end());
    std::sort(eb.begin(), eb.end());
    io::CsvWriter w(figure_dir / "sorted_mpe.csv", {"rank", "mpe_a", "mpe_b"});
    for (std::size_t k = 0; k < ea.size(); ++k) {
      w.row({std::to_string(k + 1), io::format_double(ea[k]), io::format_double(eb.at(k))});
    }
    w.close();
    const auto la = read_lmse_curve(a), lb = read_lmse_curve(b);
    io::CsvWriter l(figure_dir / "lmse.csv", {"epoch", "lmse_a", "lmse_b"});
    for (std::size_t k = 0; k < std::min(la.size(), lb.size()); ++k) {
      if (la[k].first != lb[k].first) break;
      l.row({std::to_string(la[k].first), io::format_double(la[k].second), io::format_double(lb[k].second)});
    }
    l.close();
  }
  return c;
}

struct RunEvaluation {
  ExperimentConfig config;
  std::vector<data::Sample> samples;
  data::Split split;
  optim::Evaluation test;
};

/// Reloads a finished run's checkpoint and re-evaluates its test set.
inline RunEvaluation evaluate_run(const std::filesystem::path& dir) {
  const auto m = Manifest::load(dir / manifest_name);
  RunEvaluation ev;
  ev.config = config_from_manifest(m);
  ev.samples = load_samples(ev.config);
  ev.split = make_split(ev.config, ev.samples);
  if (split_digest(ev.samples, ev.split) != m.get("split_digest")) {
    throw ConfigError("split rebuilt for " + dir.string() + " differs from the recorded one");
  }
  with_surrogate(ev.config, [&](auto& s) {
    const auto info = load_checkpoint(dir / checkpoint_name, s.parameters());
    if (info.config_digest != ev.config.digest()) {
      throw ConfigError("checkpoint in " + dir.string() + " was written for a different config");
    }
    ev.test = optim::evaluate(s, ev.samples, ev.split.test);
  });
  return ev;
}

/// Writes GT, PD and PWE images for the test samples with the smallest,
/// median and largest |MPE| (or for `ordinals` when given). GT and PD share
/// one global scale; PWE is symmetric about zero. Returns the written names.
inline std::vector<std::string> export_fields(const std::filesystem::path& run_dir,
                                              const std::filesystem::path& out_dir,
                                              std::vector<std::size_t> ordinals = {}) {
  auto ev = evaluate_run(run_dir);
  if (ev.config.model != ModelKind::res_se_unet) {
    throw ConfigError("field export needs an image surrogate run, " + run_dir.string() + " is " +
                      to_string(ev.config.model));
  }
  std::vector<std::size_t> picks;  // positions within the test set
  if (ordinals.empty()) {
    std::vector<std::size_t> order(ev.split.test.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return std::abs(ev.test.mpe[x]) < std::abs(ev.test.mpe[y]);
    });
    picks = {order.front(), order[order.size() / 2], order.back()};
  } else {
    for (auto ord : ordinals) {
      const auto it = std::find_if(ev.split.test.begin(), ev.split.test.end(),
                                   [&](std::size_t i) { return ev.samples[i].design.ordinal == ord; });
      if (it == ev.split.test.end()) throw ConfigError("ordinal " + std::to_string(ord) + " is not in the test set");
      picks.push_back(static_cast<std::size_t>(it - ev.split.test.begin()));
    }
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  const std::size_t n = data::GeometrySpec::output_grid;
  for (auto k : picks) {
    const auto& sample = ev.samples[ev.split.test[k]];
    const data::Field2D pd(n, n, ev.test.predictions[k]);
    const data::Field2D pwe(n, n, optim::pwe(sample.target.values(), pd.values()));
    const double hi = std::max(sample.target.max(), pd.max());
    const double lo = std::min(0.0, std::min(sample.target.min(), pd.min()));
    const std::string tag = std::to_string(sample.design.ordinal);
    const std::vector<std::pair<std::string, io::GrayImage>> images{
        {"gt_" + tag + ".pgm", io::to_gray(sample.target, io::Normalization::global, lo, hi)},
        {"pd_" + tag + ".pgm", io::to_gray(pd, io::Normalization::global, lo, hi)},
        {"pwe_" + tag + ".pgm", io::to_gray(pwe, io::Normalization::symmetric)}};
    for (const auto& [name, img] : images) {
      io::write_pgm(out_dir / name, img);
      written.push_back(name);
    }
  }
  return written;
}

}  // namespace sfs::harness
