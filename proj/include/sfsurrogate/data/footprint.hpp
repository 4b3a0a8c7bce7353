#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfsurrogate/data/design.hpp"

namespace sfs::data {

/// Die footprint in the quarter blank: the square [0, C2] x [0, C3] with
/// fillets r2 at (C2, 0), r1 at (C2, C3) and r3 at (0, C3), minus a
/// quarter-circular relief of radius C1 about the origin.
///
/// All tests are written with sign checks and commutative arithmetic so the
/// footprint for (r1, r3, r2) is the exact diagonal mirror of (r1, r2, r3).
class Footprint {
 public:
  explicit Footprint(const Radii& r) : r_(r) {}

  const Radii& radii() const { return r_; }

  bool contains(double x, double y) const {
    constexpr double a = GeometrySpec::c2, b = GeometrySpec::c3;
    if (x < 0.0 || y < 0.0 || x > a || y > b) return false;
    if (x * x + y * y < GeometrySpec::c1 * GeometrySpec::c1) return false;
    if (outside_fillet(x, y, a - r_.r2, r_.r2, r_.r2, +1, -1)) return false;
    if (outside_fillet(x, y, a - r_.r1, b - r_.r1, r_.r1, +1, +1)) return false;
    if (outside_fillet(x, y, r_.r3, b - r_.r3, r_.r3, -1, +1)) return false;
    return true;
  }

  /// Unsigned distance to the outline, in mm.
  double outline_distance(double x, double y) const {
    constexpr double a = GeometrySpec::c2, b = GeometrySpec::c3, c1 = GeometrySpec::c1;
    double d = std::numeric_limits<double>::infinity();
    d = std::min(d, segment(x, y, c1, 0.0, a - r_.r2, 0.0));
    d = std::min(d, arc(x, y, a - r_.r2, r_.r2, r_.r2, +1, -1));
    d = std::min(d, segment(x, y, a, r_.r2, a, b - r_.r1));
    d = std::min(d, arc(x, y, a - r_.r1, b - r_.r1, r_.r1, +1, +1));
    d = std::min(d, segment(x, y, r_.r3, b, a - r_.r1, b));
    d = std::min(d, arc(x, y, r_.r3, b - r_.r3, r_.r3, -1, +1));
    d = std::min(d, segment(x, y, 0.0, c1, 0.0, b - r_.r3));
    d = std::min(d, arc(x, y, 0.0, 0.0, c1, +1, +1));
    return d;
  }

  /// Signed distance, positive outside the footprint.
  double signed_distance(double x, double y) const {
    const double d = outline_distance(x, y);
    return contains(x, y) ? -d : d;
  }

 private:
  // Fillet quarter circle about (cx, cy) bulging toward quadrant (sx, sy).
  static bool outside_fillet(double x, double y, double cx, double cy, double r, int sx, int sy) {
    const double dx = x - cx, dy = y - cy;
    if (dx * sx <= 0.0 || dy * sy <= 0.0) return false;
    return dx * dx + dy * dy > r * r;
  }

  // Axis-aligned segments only; endpoints in either order.
  static double segment(double x, double y, double x0, double y0, double x1, double y1) {
    const double cx = std::clamp(x, std::min(x0, x1), std::max(x0, x1));
    const double cy = std::clamp(y, std::min(y0, y1), std::max(y0, y1));
    const double dx = x - cx, dy = y - cy;
    return std::sqrt(dx * dx + dy * dy);
  }

  // Quarter arc of radius r about (cx, cy) spanning quadrant (sx, sy).
  static double arc(double x, double y, double cx, double cy, double r, int sx, int sy) {
    const double dx = x - cx, dy = y - cy;
    if (dx * sx >= 0.0 && dy * sy >= 0.0) return std::abs(std::sqrt(dx * dx + dy * dy) - r);
    const double ex = x - (cx + sx * r), ey = y - cy;  // endpoint on the x arm
    const double fx = x - cx, fy = y - (cy + sy * r);  // endpoint on the y arm
    return std::min(std::sqrt(ex * ex + ey * ey), std::sqrt(fx * fx + fy * fy));
  }

  Radii r_;
};

}  // namespace sfs::data
