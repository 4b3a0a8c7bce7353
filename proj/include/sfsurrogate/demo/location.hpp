#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sfsurrogate/data/field.hpp"
#include "sfsurrogate/error.hpp"

namespace sfs::demo {

/// Scalar surrogate under a linear prior: the mean of the training maxima.
inline double sbmlm_linear_predict(const std::vector<double>& train_maxima) {
  if (train_maxima.empty()) throw ConfigError("sbmlm prediction needs at least one training value");
  return std::accumulate(train_maxima.begin(), train_maxima.end(), 0.0) /
         static_cast<double>(train_maxima.size());
}

struct FieldPrediction {
  data::Field2D field;
  double max = 0.0;
};

/// Image surrogate under a linear prior: the pixel-wise mean field and its max.
inline FieldPrediction ibmlm_linear_predict(const std::vector<data::Field2D>& fields) {
  if (fields.empty()) throw ConfigError("ibmlm prediction needs at least one training field");
  data::Field2D mean(fields[0].rows(), fields[0].cols());
  for (const auto& f : fields) {
    if (!f.same_shape(mean)) throw ShapeError("ibmlm prediction: training fields differ in shape");
    for (std::size_t i = 0; i < f.size(); ++i) mean.values()[i] += f.values()[i];
  }
  const double n = static_cast<double>(fields.size());
  for (auto& v : mean.values()) v /= n;
  return {mean, mean.max()};
}

/// Two training fields for binder forces [1, 5] and [5, 1] MPa and the
/// ground truth for [3, 3].
struct DemoCase {
  std::vector<data::Field2D> training;
  std::vector<double> training_maxima;
  data::Field2D ground_truth;
  double gt_max = 0.0;
  bool synthetic = true;
};

/// Isotropic Gaussian bump of height `peak` centred on pixel (row, col).
inline data::Field2D gaussian_bump(std::size_t n, double row, double col, double peak,
                                   double sigma2) {
  data::Field2D f(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double dr = static_cast<double>(r) - row, dc = static_cast<double>(c) - col;
      f.at(r, c) = peak * std::exp(-(dr * dr + dc * dc) / (2.0 * sigma2));
    }
  }
  return f;
}

/// Constructed stand-in for the two-binder half model. Each training field
/// peaks at 0.7302 off the diagonal; the pair are transposes of each other.
/// The bump width puts the mean field's peak, 0.6838, at the midpoint
/// pixel. The ground truth peaks there at 0.6348.
inline DemoCase mirror_pair_case(std::size_t n = 50) {
  constexpr double train_peak = 0.7302, mean_peak = 0.6838, gt_peak = 0.6348;
  const double mid = static_cast<double>(n) / 2.0;
  const double off = 5.0;  // pixels along each axis
  // Each centre sits 2*off^2 squared pixels from the midpoint.
  const double sigma2 = (2.0 * off * off) / (2.0 * std::log(train_peak / mean_peak));
  DemoCase c;
  c.training.push_back(gaussian_bump(n, mid - off, mid + off, train_peak, sigma2));
  c.training.push_back(c.training[0].transposed());
  for (const auto& f : c.training) c.training_maxima.push_back(f.max());
  c.ground_truth = gaussian_bump(n, mid, mid, gt_peak, sigma2);
  c.gt_max = c.ground_truth.max();
  return c;
}

struct DemoReport {
  double gt_max = 0.0;
  double sbmlm_prediction = 0.0;
  double sbmlm_abs_error = 0.0;
  double sbmlm_rel_error = 0.0;
  double ibmlm_prediction = 0.0;
  double ibmlm_abs_error = 0.0;
  double ibmlm_rel_error = 0.0;
  data::Field2D predicted_field;
  bool synthetic = true;
};

inline DemoReport demo_report(const DemoCase& c) {
  DemoReport r;
  r.gt_max = c.gt_max;
  r.sbmlm_prediction = sbmlm_linear_predict(c.training_maxima);
  auto image = ibmlm_linear_predict(c.training);
  r.ibmlm_prediction = image.max;
  r.predicted_field = std::move(image.field);
  r.sbmlm_abs_error = std::abs(r.sbmlm_prediction - c.gt_max);
  r.ibmlm_abs_error = std::abs(r.ibmlm_prediction - c.gt_max);
  r.sbmlm_rel_error = r.sbmlm_abs_error / c.gt_max;
  r.ibmlm_rel_error = r.ibmlm_abs_error / c.gt_max;
  r.synthetic = c.synthetic;
  return r;
}

}  // namespace sfs::demo
