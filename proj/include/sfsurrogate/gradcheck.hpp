#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "sfsurrogate/tensor.hpp"

namespace sfs {

struct GradCheckOptions {
  double step = 1e-5;
  /// One-sided slopes differing by more than this (relative to max(1, |slope|))
  /// mark a kink; such coordinates are skipped.
  double kink_tolerance = 1e-3;
};

struct SkippedCoordinate {
  std::size_t leaf;
  std::size_t index;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::vector<SkippedCoordinate> skipped;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences for every coordinate of every leaf.
///
/// `f` builds the computation on the tape it is given and may read the
/// leaves' current values; the checker perturbs leaf values in place and
/// restores them afterwards. Relative error per coordinate is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline GradCheckReport finite_diff_grad_check(const std::function<Tensor(Tape&)>& f,
                                              std::vector<Tensor> leaves,
                                              const GradCheckOptions& options = {}) {
  for (auto& leaf : leaves) {
    if (!leaf.requires_grad()) leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    if (loss.numel() != 1) {
      throw ShapeError("finite_diff_grad_check: function must be scalar-valued");
    }
    backward(loss, tape);
    for (const auto& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
  }

  auto evaluate = [&f]() {
    Tape tape(Tape::Mode::inference);
    Tensor out = f(tape);
    if (out.numel() != 1) throw ShapeError("finite_diff_grad_check: function must be scalar-valued");
    return out.item();
  };

  GradCheckReport report;
  const double h = options.step;
  const double f0 = evaluate();
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double f_plus = evaluate();
      values[i] = saved - h;
      const double f_minus = evaluate();
      values[i] = saved;

      const double forward_slope = (f_plus - f0) / h;
      const double backward_slope = (f0 - f_minus) / h;
      const double scale = std::max({1.0, std::abs(forward_slope), std::abs(backward_slope)});
      if (std::abs(forward_slope - backward_slope) > options.kink_tolerance * scale) {
        report.skipped.push_back({l, i});
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[l][i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      report.max_relative_error = std::max(report.max_relative_error, rel);
      ++report.checked;
    }
  }
  return report;
}

/// Single-tensor form: f maps the point to a scalar.
inline GradCheckReport finite_diff_grad_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& point,
    const GradCheckOptions& options = {}) {
  Tensor x = point.detached_copy();
  x.set_requires_grad(true);
  return finite_diff_grad_check([&](Tape& tape) { return f(tape, x); }, std::vector<Tensor>{x},
                                options);
}

}  // namespace sfs
