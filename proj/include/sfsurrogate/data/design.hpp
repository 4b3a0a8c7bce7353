#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sfsurrogate/error.hpp"

namespace sfs::data {

/// Fixed geometry of the quarter-model blank and its discretizations.
struct GeometrySpec {
  static constexpr double c1 = 25.0;  // mm, relief radius at the origin corner
  static constexpr double c2 = 40.0;  // mm, footprint extent along x
  static constexpr double c3 = 40.0;  // mm, footprint extent along y
  static constexpr double blank_side = 70.0;  // mm
  static constexpr std::size_t input_grid = 199;
  static constexpr std::size_t output_grid = 50;
  static constexpr double output_pitch = 1.4;  // mm
  static constexpr std::size_t input_channels = 3;

  static constexpr double input_pitch() { return blank_side / static_cast<double>(input_grid); }
};

static_assert(GeometrySpec::output_grid * GeometrySpec::output_pitch == GeometrySpec::blank_side);

inline constexpr std::array<double, 3> radius_levels{6.0, 8.0, 10.0};
inline constexpr std::size_t geometry_count = 27;
inline constexpr std::size_t binder_force_levels = 20;
inline constexpr double binder_force_step = 0.25;  // MPa
inline constexpr std::array<double, 2> thickness_levels{1.0, 1.5};
inline constexpr std::size_t design_space_size =
    geometry_count * binder_force_levels * thickness_levels.size();

struct Radii {
  double r1, r2, r3;
  bool operator==(const Radii&) const = default;
};

/// One sample's design scalars. `ordinal` is the position in the full
/// geometry-major enumeration (geometry, then binder force, then thickness).
struct DesignPoint {
  std::size_t ordinal = 0;
  std::size_t geo_index = 1;  // 1..27
  std::size_t bf_index = 1;   // 1..20
  std::size_t t_index = 1;    // 1..2
  double r1 = 6.0, r2 = 6.0, r3 = 6.0;
  double bf = 0.25;  // MPa
  double t = 1.0;    // mm

  bool operator==(const DesignPoint&) const = default;
};

/// Base-3 decode with R3 varying fastest: 1 -> (6,6,6), 2 -> (6,6,8), 27 -> (10,10,10).
inline Radii geo_index_to_radii(std::size_t geo_index) {
  if (geo_index < 1 || geo_index > geometry_count) {
    throw ConfigError("geometry index " + std::to_string(geo_index) + " outside 1..27");
  }
  const std::size_t k = geo_index - 1;
  return {radius_levels[k / 9], radius_levels[(k / 3) % 3], radius_levels[k % 3]};
}

inline std::size_t radius_level(double r) {
  for (std::size_t i = 0; i < radius_levels.size(); ++i) {
    if (r == radius_levels[i]) return i;
  }
  throw ConfigError("radius " + std::to_string(r) + " mm is not one of 6, 8, 10");
}

inline std::size_t radii_to_geo_index(const Radii& r) {
  return 9 * radius_level(r.r1) + 3 * radius_level(r.r2) + radius_level(r.r3) + 1;
}

inline DesignPoint make_design_point(std::size_t geo_index, std::size_t bf_index,
                                     std::size_t t_index) {
  if (bf_index < 1 || bf_index > binder_force_levels || t_index < 1 ||
      t_index > thickness_levels.size()) {
    throw ConfigError("binder force or thickness index out of range");
  }
  const Radii r = geo_index_to_radii(geo_index);
  DesignPoint d;
  d.geo_index = geo_index;
  d.bf_index = bf_index;
  d.t_index = t_index;
  d.ordinal = ((geo_index - 1) * binder_force_levels + (bf_index - 1)) * thickness_levels.size() +
              (t_index - 1);
  d.r1 = r.r1;
  d.r2 = r.r2;
  d.r3 = r.r3;
  d.bf = binder_force_step * static_cast<double>(bf_index);
  d.t = thickness_levels[t_index - 1];
  return d;
}

/// Inverse of make_design_point for scalars read back from disk.
inline DesignPoint design_from_scalars(std::size_t ordinal, double r1, double r2, double r3,
                                       double bf, double t) {
  const std::size_t geo = radii_to_geo_index({r1, r2, r3});
  const double k = bf / binder_force_step;
  if (std::abs(k - std::round(k)) > 1e-9) throw FormatError("binder force off the 0.25 MPa grid");
  std::size_t t_index = 0;
  for (std::size_t i = 0; i < thickness_levels.size(); ++i) {
    if (t == thickness_levels[i]) t_index = i + 1;
  }
  if (t_index == 0) throw FormatError("thickness is neither 1.0 nor 1.5 mm");
  DesignPoint d = make_design_point(geo, static_cast<std::size_t>(std::lround(k)), t_index);
  if (d.ordinal != ordinal) throw FormatError("ordinal disagrees with design scalars");
  return d;
}

/// All 1,080 designs: geometry outermost, binder force, then thickness.
inline std::vector<DesignPoint> enumerate_design_space() {
  std::vector<DesignPoint> out;
  out.reserve(design_space_size);
  for (std::size_t g = 1; g <= geometry_count; ++g)
    for (std::size_t b = 1; b <= binder_force_levels; ++b)
      for (std::size_t t = 1; t <= thickness_levels.size(); ++t)
        out.push_back(make_design_point(g, b, t));
  return out;
}

}  // namespace sfs::data
