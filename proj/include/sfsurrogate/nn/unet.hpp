#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sfsurrogate/nn/blocks.hpp"

namespace sfs::nn {

enum class SkipMode { concat, add };

/// Res-SE-U-Net layout. Geometries default to the published layer table;
/// channel counts are the full-width plan scaled by `width_multiplier`.
struct UNetConfig {
  static constexpr std::size_t down_layers = 7;
  static constexpr std::size_t up_layers = 8;

  double width_multiplier = 1.0;
  SkipMode skip = SkipMode::concat;
  std::size_t res_blocks = 6;
  std::size_t se_reduction = 16;
  std::size_t input_channels = 3;
  std::size_t input_size = 199;

  std::array<ConvGeometry, down_layers> down{
      ConvGeometry::square(1, 1, 0), ConvGeometry::square(11, 2, 5),
      ConvGeometry::square(8, 2, 3), ConvGeometry::square(6, 2, 2),
      ConvGeometry::square(3, 1, 1), ConvGeometry::square(3, 2, 0),
      ConvGeometry::square(3, 1, 1)};
  std::array<ConvGeometry, up_layers> up{
      ConvGeometry::square(3, 1, 1), ConvGeometry::square(3, 1, 1),
      ConvGeometry::square(3, 1, 1), ConvGeometry::square(3, 2, 0),
      ConvGeometry::square(3, 1, 1), ConvGeometry::square(3, 1, 1),
      ConvGeometry::square(6, 2, 2), ConvGeometry::square(3, 1, 1)};

  static constexpr std::array<std::size_t, down_layers> full_down_channels{64,  128, 256, 512,
                                                                            512, 512, 512};
  static constexpr std::array<std::size_t, up_layers> full_up_channels{512, 512, 512, 256,
                                                                        256, 128, 64,  1};

  /// Spatial size after each layer; a mismatch means a mistranscribed table.
  static constexpr std::array<std::size_t, down_layers> expected_down_sizes{199, 100, 50, 25,
                                                                            25,  12,  12};
  static constexpr std::array<std::size_t, up_layers> expected_up_sizes{12, 12, 12, 25,
                                                                        25, 25, 50, 50};

  std::size_t scaled(std::size_t channels) const {
    const auto c = static_cast<std::size_t>(std::lround(static_cast<double>(channels) *
                                                        width_multiplier));
    return std::max<std::size_t>(1, c);
  }

  bool operator==(const UNetConfig&) const = default;
};

/// A skip link: the output of down layer `from` joins the input of up layer
/// `into` (both zero-based).
struct SkipLink {
  std::size_t from;
  std::size_t into;
};

/// Downscale outputs at 25 and 50 pixels feed the first upscale layers that
/// consume maps of the same size. The 100-pixel stage has no upscale
/// counterpart since the decoder stops at 50.
inline constexpr std::array<SkipLink, 2> unet_skip_links{SkipLink{4, 4}, SkipLink{2, 7}};

/// Channel plan derived from a config: outputs of every layer and the
/// inputs the upscale layers see after skip merging.
struct UNetChannelPlan {
  std::array<std::size_t, UNetConfig::down_layers> down_out{};
  std::array<std::size_t, UNetConfig::up_layers> up_in{};
  std::array<std::size_t, UNetConfig::up_layers> up_out{};

  explicit UNetChannelPlan(const UNetConfig& c) {
    for (std::size_t i = 0; i < down_out.size(); ++i) down_out[i] = c.scaled(c.full_down_channels[i]);
    for (std::size_t i = 0; i < up_out.size(); ++i) up_out[i] = c.scaled(c.full_up_channels[i]);
    up_out.back() = 1;
    if (c.skip == SkipMode::add) {
      for (const auto& s : unet_skip_links) up_out[s.into - 1] = down_out[s.from];
    }
    std::size_t in = down_out.back();
    for (std::size_t i = 0; i < up_in.size(); ++i) {
      up_in[i] = in;
      for (const auto& s : unet_skip_links) {
        if (s.into == i && c.skip == SkipMode::concat) up_in[i] += down_out[s.from];
      }
      in = up_out[i];
    }
  }
};

/// Res-SE-U-Net: 7 downscale conv-BN-ReLU layers, serial Res-SE blocks at the
/// bottleneck, and 8 transposed-conv layers with skip connections. The final
/// upscale layer is a plain linear transposed convolution.
class UNet {
 public:
  explicit UNet(UNetConfig config = {}) : config_(std::move(config)) {
    verify_shape_chain(config_);
    const UNetChannelPlan plan(config_);
    std::size_t in = config_.input_channels;
    for (std::size_t i = 0; i < UNetConfig::down_layers; ++i) {
      down_.emplace_back(params_, "down" + std::to_string(i + 1), ConvUnit::Kind::conv, in,
                         plan.down_out[i], config_.down[i], true, true);
      in = plan.down_out[i];
    }
    for (std::size_t i = 0; i < config_.res_blocks; ++i) {
      res_.emplace_back(params_, "res" + std::to_string(i + 1), in, config_.se_reduction);
    }
    for (std::size_t i = 0; i < UNetConfig::up_layers; ++i) {
      const bool last = i + 1 == UNetConfig::up_layers;
      up_.emplace_back(params_, "up" + std::to_string(i + 1), ConvUnit::Kind::transpose,
                       plan.up_in[i], plan.up_out[i], config_.up[i], !last, !last);
    }
    const std::size_t expected = expected_parameter_count(config_);
    if (params_.parameter_count() != expected) {
      throw ConfigError("UNet parameter count " + std::to_string(params_.parameter_count()) +
                        " differs from the config's " + std::to_string(expected));
    }
  }

  /// Throws ConfigError unless the geometries reproduce the expected chains.
  static void verify_shape_chain(const UNetConfig& c) {
    std::size_t s = c.input_size;
    for (std::size_t i = 0; i < UNetConfig::down_layers; ++i) {
      s = c.down[i].conv_extent(s, 0);
      if (s != UNetConfig::expected_down_sizes[i]) {
        throw ConfigError("downscale layer " + std::to_string(i + 1) + " yields " +
                          std::to_string(s) + " pixels, expected " +
                          std::to_string(UNetConfig::expected_down_sizes[i]));
      }
    }
    for (std::size_t i = 0; i < UNetConfig::up_layers; ++i) {
      s = c.up[i].transpose_extent(s, 0);
      if (s != UNetConfig::expected_up_sizes[i]) {
        throw ConfigError("upscale layer " + std::to_string(i + 1) + " yields " +
                          std::to_string(s) + " pixels, expected " +
                          std::to_string(UNetConfig::expected_up_sizes[i]));
      }
    }
    for (const auto& link : unet_skip_links) {
      if (UNetConfig::expected_down_sizes[link.from] != UNetConfig::expected_up_sizes[link.into - 1]) {
        throw ConfigError("skip link joins maps of different size");
      }
    }
  }

  static std::size_t expected_parameter_count(const UNetConfig& c) {
    const UNetChannelPlan plan(c);
    std::size_t n = 0, in = c.input_channels;
    for (std::size_t i = 0; i < UNetConfig::down_layers; ++i) {
      n += ConvUnit::parameter_count(in, plan.down_out[i], c.down[i], true);
      in = plan.down_out[i];
    }
    n += c.res_blocks * ResSeBlock::parameter_count(in, c.se_reduction);
    for (std::size_t i = 0; i < UNetConfig::up_layers; ++i) {
      n += ConvUnit::parameter_count(plan.up_in[i], plan.up_out[i], c.up[i],
                                     i + 1 < UNetConfig::up_layers);
    }
    return n;
  }

  const UNetConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  void init_parameters(std::uint64_t seed) { params_.initialize(seed); }

  /// Spatial size of every stage seen by the last forward pass, down then up.
  const std::vector<std::size_t>& last_stage_sizes() const { return stage_sizes_; }

  /// input [B, 3, 199, 199] -> [B, 1, 50, 50]
  Tensor forward(Tape& tape, const Tensor& input, Phase phase) const {
    if (input.rank() != 4 || input.dim(1) != config_.input_channels ||
        input.dim(2) != config_.input_size || input.dim(3) != config_.input_size) {
      throw ShapeError("UNet expects input [B," + std::to_string(config_.input_channels) + "," +
                       std::to_string(config_.input_size) + "," +
                       std::to_string(config_.input_size) + "], got " +
                       shape_str(input.shape()));
    }
    stage_sizes_.clear();
    std::vector<Tensor> down_out;
    Tensor x = input;
    for (std::size_t i = 0; i < down_.size(); ++i) {
      x = down_[i].forward(tape, x, phase);
      expect_stage(x, UNetConfig::expected_down_sizes[i], "downscale", i);
      down_out.push_back(x);
    }
    for (const auto& block : res_) x = block.forward(tape, x, phase);
    for (std::size_t i = 0; i < up_.size(); ++i) {
      for (const auto& link : unet_skip_links) {
        if (link.into != i) continue;
        x = config_.skip == SkipMode::concat ? concat_channels(tape, x, down_out[link.from])
                                             : add(tape, x, down_out[link.from]);
      }
      x = up_[i].forward(tape, x, phase);
      expect_stage(x, UNetConfig::expected_up_sizes[i], "upscale", i);
    }
    return x;
  }

 private:
  void expect_stage(const Tensor& t, std::size_t size, const char* where, std::size_t i) const {
    if (t.dim(2) != size || t.dim(3) != size) {
      throw ShapeError(std::string(where) + " layer " + std::to_string(i + 1) + " produced " +
                       shape_str(t.shape()) + ", expected " + std::to_string(size) + " pixels");
    }
    stage_sizes_.push_back(size);
  }

  UNetConfig config_;
  ParameterSet params_;
  std::vector<ConvUnit> down_;
  std::vector<ResSeBlock> res_;
  std::vector<ConvUnit> up_;
  mutable std::vector<std::size_t> stage_sizes_;
};

}  // namespace sfs::nn
