#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sfsurrogate/ops.hpp"

namespace sfs::optim {

/// Pixel-wise error image: ground truth minus prediction, sign kept.
inline std::vector<double> pwe(std::span<const double> gt, std::span<const double> pd) {
  if (gt.size() != pd.size()) throw ShapeError("pwe: field sizes differ");
  std::vector<double> out(gt.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gt[i] - pd[i];
  return out;
}

/// (1/n) sum (pd_i - gt_i)^2. Computed as the mean square of pwe(gt, pd), the
/// same arithmetic as the training loss.
inline double mse(std::span<const double> pd, std::span<const double> gt) {
  if (pd.size() != gt.size()) throw ShapeError("mse: sizes differ");
  if (pd.empty()) throw ShapeError("mse: empty input");
  return detail::mean_square(pwe(gt, pd));
}

/// Signed maximum plastic strain error: max(pd) - max(gt).
inline double mpe(std::span<const double> pd, std::span<const double> gt) {
  if (pd.empty() || gt.empty()) throw ShapeError("mpe: empty input");
  return *std::max_element(pd.begin(), pd.end()) - *std::max_element(gt.begin(), gt.end());
}

inline double lmse(double mse_value) { return std::log10(mse_value); }

}  // namespace sfs::optim
