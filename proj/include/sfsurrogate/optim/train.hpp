#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sfsurrogate/data/dataset.hpp"
#include "sfsurrogate/nn/mlp.hpp"
#include "sfsurrogate/nn/unet.hpp"
#include "sfsurrogate/optim/adam.hpp"
#include "sfsurrogate/optim/metrics.hpp"

namespace sfs::optim {

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 54;
  AdamOptions adam{};
  std::uint64_t seed = 0;
  std::size_t eval_every = 10;
  std::size_t eval_chunk = 16;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (eval_every < 1) throw ConfigError("evaluation cadence must be >= 1");
    if (eval_chunk < 1) throw ConfigError("evaluation chunk must be >= 1");
    if (!(adam.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  }
};

/// Metrics at one evaluation epoch. train_mse is the sample-weighted mean of
/// the epoch's minibatch losses; test metrics come from an eval-phase pass.
struct MetricsRecord {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double test_lmse = 0.0;
  std::vector<double> test_mpe;
};

struct Evaluation {
  double mse = 0.0;
  std::vector<double> mpe;                      // per sample, signed
  std::vector<std::vector<double>> predictions;  // per sample, flattened
};

struct TrainResult {
  std::vector<MetricsRecord> series;
  Evaluation final_train;
  Evaluation final_test;
  AdamState adam;
  std::size_t steps = 0;
};

/// Scalar surrogate: maps design scalars to Max. PEEQ.
class MlpSurrogate {
 public:
  explicit MlpSurrogate(nn::MlpConfig config = {}) : model_(std::move(config)) {}

  static std::vector<double> features(const data::DesignPoint& d, nn::MlpInputMode mode) {
    const double bf = data::normalized_binder_force(d.bf);
    const double t = data::normalized_thickness(d.t);
    if (mode == nn::MlpInputMode::geo_bf_t) {
      return {(static_cast<double>(d.geo_index) - 14.0) / 13.0, bf, t};
    }
    return {(d.r1 - 8.0) / 2.0, (d.r2 - 8.0) / 2.0, (d.r3 - 8.0) / 2.0, bf, t};
  }

  Tensor inputs(const std::vector<data::Sample>& samples, std::span<const std::size_t> idx) const {
    const std::size_t w = model_.config().input_width();
    std::vector<double> v;
    v.reserve(idx.size() * w);
    for (auto i : idx) {
      const auto f = features(samples[i].design, model_.config().input_mode);
      v.insert(v.end(), f.begin(), f.end());
    }
    return Tensor({idx.size(), w}, std::move(v));
  }

  Tensor targets(const std::vector<data::Sample>& samples, std::span<const std::size_t> idx) const {
    std::vector<double> v;
    v.reserve(idx.size());
    for (auto i : idx) v.push_back(samples[i].max_peeq);
    return Tensor({idx.size(), 1}, std::move(v));
  }

  Tensor forward(Tape& tape, const Tensor& x, Phase) const { return model_.forward(tape, x); }

  nn::Mlp& model() { return model_; }
  const nn::Mlp& model() const { return model_; }
  nn::ParameterSet& parameters() { return model_.parameters(); }
  void init_parameters(std::uint64_t seed) { model_.init_parameters(seed); }

 private:
  nn::Mlp model_;
};

/// Image surrogate: maps the 3-channel input stack to the 50 x 50 field.
class UNetSurrogate {
 public:
  explicit UNetSurrogate(nn::UNetConfig config = {}) : model_(std::move(config)) {}

  Tensor inputs(const std::vector<data::Sample>& samples, std::span<const std::size_t> idx) const {
    const std::size_t n = data::InputStack::size;
    std::vector<double> v;
    v.reserve(idx.size() * data::InputStack::length);
    for (auto i : idx) v.insert(v.end(), samples[i].input.values.begin(), samples[i].input.values.end());
    return Tensor({idx.size(), data::InputStack::channels, n, n}, std::move(v));
  }

  Tensor targets(const std::vector<data::Sample>& samples, std::span<const std::size_t> idx) const {
    const std::size_t n = data::GeometrySpec::output_grid;
    std::vector<double> v;
    v.reserve(idx.size() * n * n);
    for (auto i : idx) {
      const auto t = samples[i].target.values();
      v.insert(v.end(), t.begin(), t.end());
    }
    return Tensor({idx.size(), 1, n, n}, std::move(v));
  }

  Tensor forward(Tape& tape, const Tensor& x, Phase phase) const {
    return model_.forward(tape, x, phase);
  }

  nn::UNet& model() { return model_; }
  const nn::UNet& model() const { return model_; }
  nn::ParameterSet& parameters() { return model_.parameters(); }
  void init_parameters(std::uint64_t seed) { model_.init_parameters(seed); }

 private:
  nn::UNet model_;
};

/// Eval-phase pass in fixed sample order, `chunk` samples per forward.
template <typename Surrogate>
Evaluation evaluate(const Surrogate& s, const std::vector<data::Sample>& samples,
                    std::span<const std::size_t> idx, std::size_t chunk = 16) {
  Evaluation ev;
  if (idx.empty()) throw ConfigError("cannot evaluate an empty index set");
  double sq_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const auto part = idx.subspan(start, std::min(chunk, idx.size() - start));
    Tape tape(Tape::Mode::inference);
    const Tensor pred = s.forward(tape, s.inputs(samples, part), Phase::eval);
    const Tensor gt = s.targets(samples, part);
    const std::size_t w = pred.numel() / part.size();
    for (std::size_t k = 0; k < part.size(); ++k) {
      const auto pd = pred.data().subspan(k * w, w);
      const auto g = gt.data().subspan(k * w, w);
      sq_sum += mse(pd, g) * static_cast<double>(w);
      count += w;
      ev.mpe.push_back(mpe(pd, g));
      ev.predictions.emplace_back(pd.begin(), pd.end());
    }
  }
  ev.mse = sq_sum / static_cast<double>(count);
  return ev;
}

using ProgressFn = std::function<void(const MetricsRecord&)>;

/// Minibatch Adam on the MSE loss. The result is a pure function of the
/// samples, split, config and seed; the seed drives both parameter init and
/// the per-epoch shuffles.
template <typename Surrogate>
TrainResult train(Surrogate& s, const std::vector<data::Sample>& samples, const data::Split& split,
                  const TrainConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  if (split.train.empty() || split.test.empty()) throw ConfigError("train and test sets must be nonempty");
  {
    std::vector<std::size_t> a = split.train, b = split.test;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    if (!both.empty()) throw ConfigError("train and test sets overlap");
    if (a.back() >= samples.size() || b.back() >= samples.size()) {
      throw ConfigError("split index beyond the dataset");
    }
  }

  s.init_parameters(cfg.seed);
  auto& params = s.parameters();
  AdamState state = AdamState::for_parameters(params);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<std::size_t> order = split.train;
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(cfg.batch_size, order.size() - start));
      try {
        params.zero_grad();
        Tape tape;
        Tensor pred = s.forward(tape, s.inputs(samples, batch), Phase::train);
        Tensor loss = mse_loss(tape, pred, s.targets(samples, batch));
        loss_sum += loss.item() * static_cast<double>(batch.size());
        backward(loss, tape);
        adam_step(params, state, cfg.adam);
        ++result.steps;
      } catch (const NumericError& e) {
        throw NumericError(std::string("training diverged at epoch ") + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_no) + ", learning rate " +
                           std::to_string(cfg.adam.learning_rate) + ": " + e.what());
      }
    }
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      MetricsRecord rec;
      rec.epoch = epoch;
      rec.train_mse = loss_sum / static_cast<double>(order.size());
      Evaluation ev = evaluate(s, samples, split.test, cfg.eval_chunk);
      rec.test_mse = ev.mse;
      rec.test_lmse = lmse(ev.mse);
      rec.test_mpe = std::move(ev.mpe);
      if (progress) progress(rec);
      result.series.push_back(std::move(rec));
    }
  }
  result.adam = std::move(state);
  result.final_train = evaluate(s, samples, split.train, cfg.eval_chunk);
  result.final_test = evaluate(s, samples, split.test, cfg.eval_chunk);
  return result;
}

}  // namespace sfs::optim
