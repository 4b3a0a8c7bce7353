#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sfsurrogate/conv.hpp"
#include "sfsurrogate/tensor.hpp"

namespace sfs {

enum class Activation { relu, sigmoid };

/// Forward behaviour of batch normalization.
enum class Phase { train, eval };

namespace detail {

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

inline void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

/// Mean of squared entries, summed in index order. Shared by the MSE loss op
/// and the metric functions so both give bit-identical values.
inline double mean_square(std::span<const double> d) {
  double s = 0.0;
  for (double v : d) s += v * v;
  return s / static_cast<double>(d.size());
}

}  // namespace detail

inline Tensor activation(Tape& tape, const Tensor& x, Activation kind) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
  }
  const bool track = tape.tracks(x);
  Tensor y = Tensor::produced(kind == Activation::relu ? "relu" : "sigmoid", x.shape(),
                              std::move(out), track);
  if (track) {
    tape.record(kind == Activation::relu ? "relu" : "sigmoid", [x, y, kind]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      auto in = x.data();
      auto yv = y.data();
      if (kind == Activation::relu) {
        // derivative at exactly 0 is taken as 0
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += (in[i] > 0.0) * dy[i];
      } else {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
      }
    });
  }
  return y;
}

inline Tensor relu(Tape& tape, const Tensor& x) { return activation(tape, x, Activation::relu); }
inline Tensor sigmoid(Tape& tape, const Tensor& x) {
  return activation(tape, x, Activation::sigmoid);
}

/// output[b,j] = sum_k weight[j,k] * input[b,k] + bias[j]
inline Tensor linear(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
  detail::require_rank("linear", input, 2);
  detail::require_rank("linear", weight, 2);
  detail::require_rank("linear", bias, 1);
  const std::size_t B = input.dim(0), n = input.dim(1), m = weight.dim(0);
  if (weight.dim(1) != n) {
    throw ShapeError("linear: weight " + shape_str(weight.shape()) + " cannot consume input " +
                     shape_str(input.shape()));
  }
  if (bias.dim(0) != m) throw ShapeError("linear: bias length must equal output width");

  std::vector<double> out(B * m);
  detail::ConstMatrixMap x(input.data().data(), B, n);
  detail::ConstMatrixMap w(weight.data().data(), m, n);
  detail::MatrixMap y(out.data(), B, m);
  y.noalias() = x * w.transpose();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < m; ++j) out[b * m + j] += bias[j];

  const bool track = tape.tracks(input, weight, bias);
  Tensor result = Tensor::produced("linear", {B, m}, std::move(out), track);
  if (track) {
    tape.record("linear", [input, weight, bias, result, B, n, m]() mutable {
      detail::ConstMatrixMap dy(result.grad().data(), B, m);
      if (input.requires_grad()) {
        detail::MatrixMap dx(input.grad().data(), B, n);
        detail::ConstMatrixMap w(weight.data().data(), m, n);
        dx.noalias() += dy * w;
      }
      if (weight.requires_grad()) {
        detail::MatrixMap dw(weight.grad().data(), m, n);
        detail::ConstMatrixMap x(input.data().data(), B, n);
        dw.noalias() += dy.transpose() * x;
      }
      if (bias.requires_grad()) {
        auto db = bias.grad();
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t j = 0; j < m; ++j) db[j] += dy(b, j);
      }
    });
  }
  return result;
}

/// Per-channel spatial mean: [B,C,H,W] -> [B,C].
inline Tensor global_avg_pool(Tape& tape, const Tensor& x) {
  detail::require_rank("global_avg_pool", x, 4);
  const std::size_t B = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(B * C);
  for (std::size_t i = 0; i < B * C; ++i) {
    const double* p = x.data().data() + i * plane;
    double s = 0.0;
    for (std::size_t k = 0; k < plane; ++k) s += p[k];
    out[i] = s / static_cast<double>(plane);
  }
  const bool track = tape.tracks(x);
  Tensor y = Tensor::produced("global_avg_pool", {B, C}, std::move(out), track);
  if (track) {
    tape.record("global_avg_pool", [x, y, plane]() mutable {
      auto dy = y.grad();
      auto dx = x.grad();
      const double scale = 1.0 / static_cast<double>(plane);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const double g = dy[i] * scale;
        double* p = dx.data() + i * plane;
        for (std::size_t k = 0; k < plane; ++k) p[k] += g;
      }
    });
  }
  return y;
}

/// Channels of `a` followed by channels of `b`.
inline Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_rank("concat_channels", a, 4);
  detail::require_rank("concat_channels", b, 4);
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: batch/spatial mismatch between " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t B = a.dim(0), C1 = a.dim(1), C2 = b.dim(1), plane = a.dim(2) * a.dim(3);
  std::vector<double> out(B * (C1 + C2) * plane);
  for (std::size_t n = 0; n < B; ++n) {
    auto dst = out.begin() + static_cast<std::ptrdiff_t>(n * (C1 + C2) * plane);
    auto sa = a.data().subspan(n * C1 * plane, C1 * plane);
    auto sb = b.data().subspan(n * C2 * plane, C2 * plane);
    dst = std::copy(sa.begin(), sa.end(), dst);
    std::copy(sb.begin(), sb.end(), dst);
  }
  const bool track = tape.tracks(a, b);
  Tensor y = Tensor::produced("concat_channels", {B, C1 + C2, a.dim(2), a.dim(3)},
                              std::move(out), track);
  if (track) {
    tape.record("concat_channels", [a, b, y, B, C1, C2, plane]() mutable {
      auto dy = y.grad();
      for (std::size_t n = 0; n < B; ++n) {
        const double* src = dy.data() + n * (C1 + C2) * plane;
        if (a.requires_grad()) {
          double* da = a.grad().data() + n * C1 * plane;
          for (std::size_t i = 0; i < C1 * plane; ++i) da[i] += src[i];
        }
        if (b.requires_grad()) {
          double* db = b.grad().data() + n * C2 * plane;
          for (std::size_t i = 0; i < C2 * plane; ++i) db[i] += src[C1 * plane + i];
        }
      }
    });
  }
  return y;
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const bool track = tape.tracks(a, b);
  Tensor y = Tensor::produced("add", a.shape(), std::move(out), track);
  if (track) {
    tape.record("add", [a, b, y]() mutable {
      auto dy = y.grad();
      if (a.requires_grad()) {
        auto da = a.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
      }
    });
  }
  return y;
}

/// x [B,C,H,W] plus e [B,C] broadcast over every spatial position.
inline Tensor add_channelwise(Tape& tape, const Tensor& x, const Tensor& e) {
  detail::require_rank("add_channelwise", x, 4);
  detail::require_rank("add_channelwise", e, 2);
  if (e.dim(0) != x.dim(0) || e.dim(1) != x.dim(1)) {
    throw ShapeError("add_channelwise: " + shape_str(e.shape()) + " does not broadcast over " +
                     shape_str(x.shape()));
  }
  const std::size_t plane = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < e.numel(); ++i) {
    const double v = e[i];
    for (std::size_t k = 0; k < plane; ++k) out[i * plane + k] = x[i * plane + k] + v;
  }
  const bool track = tape.tracks(x, e);
  Tensor y = Tensor::produced("add_channelwise", x.shape(), std::move(out), track);
  if (track) {
    tape.record("add_channelwise", [x, e, y, plane]() mutable {
      auto dy = y.grad();
      if (x.requires_grad()) {
        auto dx = x.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      }
      if (e.requires_grad()) {
        auto de = e.grad();
        for (std::size_t i = 0; i < de.size(); ++i) {
          double s = 0.0;
          for (std::size_t k = 0; k < plane; ++k) s += dy[i * plane + k];
          de[i] += s;
        }
      }
    });
  }
  return y;
}

/// Elementwise product of equal-shaped tensors.
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const bool track = tape.tracks(a, b);
  Tensor y = Tensor::produced("mul", a.shape(), std::move(out), track);
  if (track) {
    tape.record("mul", [a, b, y]() mutable {
      auto dy = y.grad();
      // a and b may alias (x * x); read values before accumulating.
      if (a.requires_grad()) {
        auto da = a.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a[i];
      }
    });
  }
  return y;
}

/// sum_i weights[i] * x[i], a scalar. The weights are constants.
inline Tensor weighted_sum(Tape& tape, const Tensor& x, std::span<const double> weights) {
  if (weights.size() != x.numel()) throw ShapeError("weighted_sum: weight count mismatch");
  const double s = dot(x.data(), weights);
  const bool track = tape.tracks(x);
  Tensor y = Tensor::produced("weighted_sum", {1}, {s}, track);
  if (track) {
    std::vector<double> w(weights.begin(), weights.end());
    tape.record("weighted_sum", [x, y, w = std::move(w)]() mutable {
      const double g = y.grad()[0];
      auto dx = x.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g * w[i];
    });
  }
  return y;
}

inline Tensor sum(Tape& tape, const Tensor& x) {
  const std::vector<double> ones(x.numel(), 1.0);
  return weighted_sum(tape, x, ones);
}

/// Mean squared error against a constant target: (1/n) sum (pd_i - gt_i)^2.
inline Tensor mse_loss(Tape& tape, const Tensor& prediction, const Tensor& target) {
  detail::require_same_shape("mse_loss", prediction, target);
  std::vector<double> diff(prediction.numel());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = target[i] - prediction[i];
  const double loss = detail::mean_square(diff);
  const bool track = tape.tracks(prediction);
  Tensor y = Tensor::produced("mse_loss", {1}, {loss}, track);
  if (track) {
    tape.record("mse_loss", [prediction, y, diff = std::move(diff)]() mutable {
      const double g = y.grad()[0] * 2.0 / static_cast<double>(diff.size());
      auto dp = prediction.grad();
      for (std::size_t i = 0; i < dp.size(); ++i) dp[i] -= g * diff[i];
    });
  }
  return y;
}

/// Running moments of a batch-normalization layer. Kept as tensors so they
/// are checkpointed alongside the parameters.
struct BatchNormState {
  static constexpr double epsilon = 1e-5;
  static constexpr double momentum = 0.1;

  explicit BatchNormState(std::size_t channels = 1)
      : running_mean(Shape{channels}, 0.0),
        running_var(Shape{channels}, 1.0),
        batches_tracked(Shape{1}, 0.0) {}

  Tensor running_mean;
  Tensor running_var;
  Tensor batches_tracked;

  bool populated() const { return batches_tracked[0] > 0.0; }
};

/// Per-channel normalization over (B,H,W) followed by gamma * x + beta.
/// Train phase uses batch statistics and updates the running moments
/// (unbiased variance); eval phase uses the running moments.
inline Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                          BatchNormState& state, Phase phase) {
  detail::require_rank("batchnorm2d", x, 4);
  const std::size_t B = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != C || beta.numel() != C || state.running_mean.numel() != C) {
    throw ShapeError("batchnorm2d: per-channel parameters must have " + std::to_string(C) +
                     " entries");
  }
  const std::size_t count = B * plane;
  std::vector<double> mean(C), inv_std(C);
  if (phase == Phase::train) {
    if (count < 2) {
      throw ShapeError("batchnorm2d: train phase needs at least 2 values per channel");
    }
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t c = 0; c < C; ++c) {
      // Shifted by the first value so a constant channel gets its mean exactly.
      const double x0 = x[c * plane];
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = x.data().data() + (b * C + c) * plane;
        for (std::size_t k = 0; k < plane; ++k) s += p[k] - x0;
      }
      const double mu = x0 + s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = x.data().data() + (b * C + c) * plane;
        for (std::size_t k = 0; k < plane; ++k) ss += (p[k] - mu) * (p[k] - mu);
      }
      const double var = ss / static_cast<double>(count);
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + BatchNormState::epsilon);
      const double unbiased = ss / static_cast<double>(count - 1);
      rm[c] = (1.0 - BatchNormState::momentum) * rm[c] + BatchNormState::momentum * mu;
      rv[c] = (1.0 - BatchNormState::momentum) * rv[c] + BatchNormState::momentum * unbiased;
    }
    state.batches_tracked.mutable_data()[0] += 1.0;
  } else {
    if (!state.populated()) {
      throw StateError("batchnorm2d: eval phase before any running moments were recorded");
    }
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + BatchNormState::epsilon);
    }
  }

  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (b * C + c) * plane;
      const double g = gamma[c] * inv_std[c], mu = mean[c], be = beta[c];
      for (std::size_t k = 0; k < plane; ++k) out[off + k] = g * (x[off + k] - mu) + be;
    }
  }

  const bool track = tape.tracks(x, gamma, beta);
  Tensor y = Tensor::produced("batchnorm2d", x.shape(), std::move(out), track);
  if (track) {
    tape.record("batchnorm2d", [x, gamma, beta, y, mean = std::move(mean),
                                inv_std = std::move(inv_std), phase, B, C, plane]() mutable {
      auto dy = y.grad();
      const double n = static_cast<double>(B * plane);
      for (std::size_t c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t off = (b * C + c) * plane;
          for (std::size_t k = 0; k < plane; ++k) {
            const double xhat = (x[off + k] - mean[c]) * inv_std[c];
            sum_dy += dy[off + k];
            sum_dy_xhat += dy[off + k] * xhat;
          }
        }
        if (gamma.requires_grad()) gamma.grad()[c] += sum_dy_xhat;
        if (beta.requires_grad()) beta.grad()[c] += sum_dy;
        if (!x.requires_grad()) continue;
        auto dx = x.grad();
        const double gi = gamma[c] * inv_std[c];
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t off = (b * C + c) * plane;
          for (std::size_t k = 0; k < plane; ++k) {
            if (phase == Phase::train) {
              const double xhat = (x[off + k] - mean[c]) * inv_std[c];
              dx[off + k] += gi * (dy[off + k] - sum_dy / n - xhat * sum_dy_xhat / n);
            } else {
              dx[off + k] += gi * dy[off + k];
            }
          }
        }
      }
    });
  }
  return y;
}

}  // namespace sfs
