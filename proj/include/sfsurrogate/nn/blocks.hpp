#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <string>

#include "sfsurrogate/conv.hpp"
#include "sfsurrogate/nn/parameters.hpp"
#include "sfsurrogate/ops.hpp"

namespace sfs::nn {

/// Squeeze-excitation block with additive recombination: the sigmoid gate q
/// is broadcast over H x W and added to the input, v = u + e.
class SeBlock {
 public:
  static constexpr std::size_t default_reduction = 16;

  SeBlock(ParameterSet& params, const std::string& prefix, std::size_t channels,
          std::size_t reduction = default_reduction)
      : channels_(channels), hidden_(hidden_width(channels, reduction)) {
    fc1_w_ = params.add(prefix + ".fc1.weight", {hidden_, channels_},
                        ParameterSet::Init::he_uniform, channels_);
    fc1_b_ = params.add(prefix + ".fc1.bias", {hidden_}, ParameterSet::Init::zeros);
    fc2_w_ = params.add(prefix + ".fc2.weight", {channels_, hidden_},
                        ParameterSet::Init::he_uniform, hidden_);
    fc2_b_ = params.add(prefix + ".fc2.bias", {channels_}, ParameterSet::Init::zeros);
  }

  /// C / r, but never below one unit.
  static std::size_t hidden_width(std::size_t channels, std::size_t reduction) {
    if (reduction < 1) throw ConfigError("SE reduction ratio must be >= 1");
    return std::max<std::size_t>(1, channels / reduction);
  }

  static std::size_t parameter_count(std::size_t channels, std::size_t reduction) {
    const std::size_t h = hidden_width(channels, reduction);
    return h * channels + h + channels * h + channels;
  }

  Tensor forward(Tape& tape, const Tensor& u) const {
    if (u.rank() != 4 || u.dim(1) != channels_) {
      throw ShapeError("SE block expects " + std::to_string(channels_) + " channels, got " +
                       shape_str(u.shape()));
    }
    Tensor w = global_avg_pool(tape, u);
    Tensor p = relu(tape, linear(tape, w, fc1_w_, fc1_b_));
    Tensor q = sigmoid(tape, linear(tape, p, fc2_w_, fc2_b_));
    return add_channelwise(tape, u, q);
  }

  std::size_t channels() const { return channels_; }
  std::size_t hidden() const { return hidden_; }
  const Tensor& fc1_weight() const { return fc1_w_; }
  const Tensor& fc1_bias() const { return fc1_b_; }
  const Tensor& fc2_weight() const { return fc2_w_; }
  const Tensor& fc2_bias() const { return fc2_b_; }

 private:
  std::size_t channels_, hidden_;
  Tensor fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

/// conv -> batch norm, optionally followed by ReLU. Works for both regular
/// and transposed convolutions.
class ConvUnit {
 public:
  enum class Kind { conv, transpose };

  ConvUnit(ParameterSet& params, const std::string& prefix, Kind kind, std::size_t in_channels,
           std::size_t out_channels, const ConvGeometry& geom, bool batchnorm, bool activate)
      : kind_(kind),
        geom_(geom),
        in_(in_channels),
        out_(out_channels),
        activate_(activate),
        state_(batchnorm ? std::make_shared<BatchNormState>(out_channels) : nullptr) {
    geom.validate();
    const auto kk = geom.kernel[0] * geom.kernel[1];
    const Shape wshape = kind == Kind::conv ? Shape{out_channels, in_channels, geom.kernel[0],
                                                    geom.kernel[1]}
                                            : Shape{in_channels, out_channels, geom.kernel[0],
                                                    geom.kernel[1]};
    weight_ = params.add(prefix + ".weight", wshape, ParameterSet::Init::he_uniform,
                         in_channels * kk);
    bias_ = params.add(prefix + ".bias", {out_channels}, ParameterSet::Init::zeros);
    if (state_) {
      gamma_ = params.add(prefix + ".bn.gamma", {out_channels}, ParameterSet::Init::ones);
      beta_ = params.add(prefix + ".bn.beta", {out_channels}, ParameterSet::Init::zeros);
      params.add_batchnorm_state(prefix + ".bn", *state_);
    }
  }

  static std::size_t parameter_count(std::size_t in, std::size_t out, const ConvGeometry& g,
                                     bool batchnorm) {
    return in * out * g.kernel[0] * g.kernel[1] + out + (batchnorm ? 2 * out : 0);
  }

  Tensor forward(Tape& tape, const Tensor& x, Phase phase) const {
    Tensor y = kind_ == Kind::conv ? conv2d(tape, x, weight_, bias_, geom_)
                                   : conv2d_transpose(tape, x, weight_, bias_, geom_);
    if (state_) y = batchnorm2d(tape, y, gamma_, beta_, *state_, phase);
    if (activate_) y = relu(tape, y);
    return y;
  }

  std::size_t output_extent(std::size_t in, int axis) const {
    return kind_ == Kind::conv ? geom_.conv_extent(in, axis) : geom_.transpose_extent(in, axis);
  }

  const ConvGeometry& geometry() const { return geom_; }
  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  const Tensor& gamma() const { return gamma_; }
  const Tensor& beta() const { return beta_; }

 private:
  Kind kind_;
  ConvGeometry geom_;
  std::size_t in_, out_;
  bool activate_;
  std::shared_ptr<BatchNormState> state_;
  Tensor weight_, bias_, gamma_, beta_;
};

/// Two 3x3 conv-BN-ReLU stages and an SE block inside a residual connection:
/// y = x + relu(se(conv_bn_relu(conv_bn_relu(x)))).
class ResSeBlock {
 public:
  static ConvGeometry inner_geometry() { return ConvGeometry::square(3, 1, 1); }

  ResSeBlock(ParameterSet& params, const std::string& prefix, std::size_t channels,
             std::size_t reduction = SeBlock::default_reduction)
      : conv1_(params, prefix + ".conv1", ConvUnit::Kind::conv, channels, channels,
               inner_geometry(), true, true),
        conv2_(params, prefix + ".conv2", ConvUnit::Kind::conv, channels, channels,
               inner_geometry(), true, true),
        se_(params, prefix + ".se", channels, reduction) {}

  static std::size_t parameter_count(std::size_t channels, std::size_t reduction) {
    return 2 * ConvUnit::parameter_count(channels, channels, inner_geometry(), true) +
           SeBlock::parameter_count(channels, reduction);
  }

  Tensor forward(Tape& tape, const Tensor& x, Phase phase) const {
    Tensor u = conv2_.forward(tape, conv1_.forward(tape, x, phase), phase);
    Tensor v = se_.forward(tape, u);
    Tensor fv = relu(tape, v);
    if (fv.shape() != x.shape()) {
      throw ShapeError("Res-SE block changed shape " + shape_str(x.shape()) + " -> " +
                       shape_str(fv.shape()));
    }
    return add(tape, x, fv);
  }

  const ConvUnit& conv1() const { return conv1_; }
  const ConvUnit& conv2() const { return conv2_; }
  const SeBlock& se() const { return se_; }

 private:
  ConvUnit conv1_, conv2_;
  SeBlock se_;
};

}  // namespace sfs::nn
