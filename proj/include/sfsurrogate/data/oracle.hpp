#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "sfsurrogate/data/design.hpp"
#include "sfsurrogate/data/field.hpp"
#include "sfsurrogate/data/footprint.hpp"

namespace sfs::data {

/// Closed-form stand-in for the forming simulation. A ridge of strain follows
/// the die outline and grows with binder force and thinner blanks; below
/// 1.5 MPa a decaying ripple about the outline mimics wrinkling.
struct StrainOracle {
  static constexpr double base = 0.05;
  static constexpr double ridge_amplitude = 0.45;
  static constexpr double ridge_width = 8.0;          // mm
  static constexpr double wrinkle_amplitude = 0.12;
  static constexpr double wrinkle_wavelength = 8.0;   // mm
  static constexpr double wrinkle_width = 12.0;       // mm
  static constexpr double wrinkle_cutoff = 1.5;       // MPa
  static constexpr double max_binder_force = 5.0;    // MPa

  /// Strain at signed distance d (mm) from the outline, clamped at 0.
  static double strain_at(double d, double bf, double t) {
    const double ridge = ridge_amplitude * std::exp(-(d / ridge_width) * (d / ridge_width)) *
                         std::sqrt(bf / max_binder_force) * (1.0 / t);
    const double wrinkle = wrinkle_amplitude * std::max(0.0, 1.0 - bf / wrinkle_cutoff) *
                           std::sin(2.0 * std::numbers::pi * d / wrinkle_wavelength) *
                           std::exp(-(d / wrinkle_width) * (d / wrinkle_width));
    return std::max(0.0, base + ridge + wrinkle);
  }
};

/// Pixel-center coordinate (mm) of index i on a grid of n cells across the blank.
inline double pixel_center(std::size_t i, std::size_t n) {
  return (static_cast<double>(i) + 0.5) * GeometrySpec::blank_side / static_cast<double>(n);
}

/// 50 x 50 strain field for a design.
inline Field2D oracle_strain_field(const DesignPoint& design) {
  const Footprint fp({design.r1, design.r2, design.r3});
  constexpr std::size_t n = GeometrySpec::output_grid;
  Field2D field(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = pixel_center(r, n);
    for (std::size_t c = 0; c < n; ++c) {
      const double x = pixel_center(c, n);
      field.at(r, c) = StrainOracle::strain_at(fp.signed_distance(x, y), design.bf, design.t);
    }
  }
  return field;
}

}  // namespace sfs::data
