#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sfsurrogate/ops.hpp"
#include "sfsurrogate/tensor.hpp"

namespace sfs::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered registry of a model's trainable tensors and non-trainable buffers.
/// Registration order fixes initialization order and checkpoint layout.
class ParameterSet {
 public:
  enum class Init { he_uniform, zeros, ones };

  Tensor add(std::string name, Shape shape, Init init, std::size_t fan_in = 0) {
    Tensor t(std::move(shape), init == Init::ones ? 1.0 : 0.0, true);
    params_.push_back({std::move(name), t});
    rules_.push_back({init, fan_in});
    return t;
  }

  void add_buffer(std::string name, Tensor t) { buffers_.push_back({std::move(name), t}); }

  /// Registers the running moments of a batch-normalization layer.
  void add_batchnorm_state(const std::string& prefix, const BatchNormState& state) {
    add_buffer(prefix + ".running_mean", state.running_mean);
    add_buffer(prefix + ".running_var", state.running_var);
    add_buffer(prefix + ".batches_tracked", state.batches_tracked);
  }

  const std::vector<NamedTensor>& parameters() const { return params_; }
  const std::vector<NamedTensor>& buffers() const { return buffers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
  }

  /// He-uniform U(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases, unit
  /// gammas; running moments reset. Fully determined by `seed`.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto values = params_[i].tensor.mutable_data();
      switch (rules_[i].init) {
        case Init::he_uniform: {
          const double bound = he_bound(rules_[i].fan_in);
          std::uniform_real_distribution<double> dist(-bound, bound);
          for (double& v : values) v = dist(engine);
          break;
        }
        case Init::zeros: std::fill(values.begin(), values.end(), 0.0); break;
        case Init::ones: std::fill(values.begin(), values.end(), 1.0); break;
      }
    }
    for (auto& b : buffers_) {
      const bool is_var = b.name.ends_with(".running_var");
      auto values = b.tensor.mutable_data();
      std::fill(values.begin(), values.end(), is_var ? 1.0 : 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  std::size_t fan_in(std::size_t i) const { return rules_.at(i).fan_in; }

  static double he_bound(std::size_t fan_in) {
    return std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  }

 private:
  struct InitRule {
    Init init;
    std::size_t fan_in;
  };

  std::vector<NamedTensor> params_;
  std::vector<InitRule> rules_;
  std::vector<NamedTensor> buffers_;
};

}  // namespace sfs::nn
