#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "sfsurrogate/nn/parameters.hpp"
#include "sfsurrogate/ops.hpp"

namespace sfs::nn {

/// Scalar inputs fed to the MLP.
enum class MlpInputMode {
  geo_bf_t,         // normalized geometry index, binder force, thickness
  radii_bf_t,       // three radii, binder force, thickness
};

struct MlpConfig {
  MlpInputMode input_mode = MlpInputMode::geo_bf_t;
  std::vector<std::size_t> hidden_widths{64, 128, 256, 256, 128, 64};

  static constexpr std::size_t hidden_layers = 6;

  std::size_t input_width() const { return input_mode == MlpInputMode::geo_bf_t ? 3 : 5; }

  void validate() const {
    if (hidden_widths.size() != hidden_layers) {
      throw ConfigError("MLP must have exactly 6 hidden layers, got " +
                        std::to_string(hidden_widths.size()));
    }
    for (auto w : hidden_widths) {
      if (w < 1) throw ConfigError("MLP hidden widths must be >= 1");
    }
  }
};

/// Fully connected regressor: six linear+ReLU hidden layers and a linear
/// scalar output.
class Mlp {
 public:
  explicit Mlp(MlpConfig config = {}) : config_(std::move(config)) {
    config_.validate();
    std::size_t in = config_.input_width();
    std::vector<std::size_t> widths = config_.hidden_widths;
    widths.push_back(1);
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const std::string prefix = "mlp.fc" + std::to_string(i + 1);
      layers_.push_back({params_.add(prefix + ".weight", {widths[i], in},
                                     ParameterSet::Init::he_uniform, in),
                         params_.add(prefix + ".bias", {widths[i]}, ParameterSet::Init::zeros)});
      in = widths[i];
    }
  }

  const MlpConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  void init_parameters(std::uint64_t seed) { params_.initialize(seed); }

  /// input [B, input_width] -> [B, 1]
  Tensor forward(Tape& tape, const Tensor& input) const {
    if (input.rank() != 2 || input.dim(1) != config_.input_width()) {
      throw ShapeError("MLP expects input [B," + std::to_string(config_.input_width()) +
                       "], got " + shape_str(input.shape()));
    }
    Tensor a = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      a = linear(tape, a, layers_[i].weight, layers_[i].bias);
      if (i + 1 < layers_.size()) a = relu(tape, a);
    }
    return a;
  }

  static std::size_t expected_parameter_count(const MlpConfig& config) {
    std::size_t n = 0, in = config.input_width();
    for (auto w : config.hidden_widths) {
      n += w * in + w;
      in = w;
    }
    return n + in + 1;
  }

 private:
  struct Layer {
    Tensor weight;
    Tensor bias;
  };

  MlpConfig config_;
  ParameterSet params_;
  std::vector<Layer> layers_;
};

}  // namespace sfs::nn
