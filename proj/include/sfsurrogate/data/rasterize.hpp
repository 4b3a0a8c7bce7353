#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "sfsurrogate/data/design.hpp"
#include "sfsurrogate/data/footprint.hpp"
#include "sfsurrogate/data/oracle.hpp"

namespace sfs::data {

inline constexpr double sdf_clamp_mm = 20.0;

inline double normalized_binder_force(double bf) { return bf / 5.0; }
inline double normalized_thickness(double t) { return (t - 1.25) / 0.25; }

/// Three 199 x 199 input channels stored channel-major (C, H, W):
/// 0 = footprint signed distance clamped to +-20 mm and scaled to [-1, 1],
/// 1 = bf / 5, 2 = (t - 1.25) / 0.25.
struct InputStack {
  static constexpr std::size_t size = GeometrySpec::input_grid;
  static constexpr std::size_t channels = GeometrySpec::input_channels;
  static constexpr std::size_t plane = size * size;
  static constexpr std::size_t length = channels * plane;

  std::vector<double> values = std::vector<double>(length, 0.0);

  double at(std::size_t c, std::size_t r, std::size_t col) const {
    return values[c * plane + r * size + col];
  }
};

inline InputStack rasterize_inputs(const DesignPoint& design) {
  const Footprint fp({design.r1, design.r2, design.r3});
  constexpr std::size_t n = InputStack::size;
  InputStack in;
  for (std::size_t r = 0; r < n; ++r) {
    const double y = pixel_center(r, n);
    for (std::size_t c = 0; c < n; ++c) {
      const double d = std::clamp(fp.signed_distance(pixel_center(c, n), y), -sdf_clamp_mm,
                                  sdf_clamp_mm);
      in.values[r * n + c] = d / sdf_clamp_mm;
    }
  }
  std::fill_n(in.values.begin() + InputStack::plane, InputStack::plane,
              normalized_binder_force(design.bf));
  std::fill_n(in.values.begin() + 2 * InputStack::plane, InputStack::plane,
              normalized_thickness(design.t));
  return in;
}

}  // namespace sfs::data
