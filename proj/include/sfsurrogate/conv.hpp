#pragma once

#include <algorithm>
#include <array>
#include <utility>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sfsurrogate/tensor.hpp"

namespace sfs {

/// Kernel, stride and zero-padding of a 2-D convolution, in pixels.
struct ConvGeometry {
  std::array<std::size_t, 2> kernel{1, 1};
  std::array<std::size_t, 2> stride{1, 1};
  std::array<std::size_t, 2> padding{0, 0};

  static ConvGeometry square(std::size_t k, std::size_t s, std::size_t p) {
    return ConvGeometry{{k, k}, {s, s}, {p, p}};
  }

  void validate() const {
    if (kernel[0] < 1 || kernel[1] < 1 || stride[0] < 1 || stride[1] < 1) {
      throw ShapeError("convolution kernel and stride must be >= 1");
    }
  }

  /// floor((in + 2p - k) / s) + 1; throws when that is below 1.
  std::size_t conv_extent(std::size_t in, int axis) const {
    validate();
    const long span = static_cast<long>(in) + 2 * static_cast<long>(padding[axis]) -
                      static_cast<long>(kernel[axis]);
    if (span < 0) {
      throw ShapeError("convolution output extent is non-positive (in=" + std::to_string(in) +
                       ", k=" + std::to_string(kernel[axis]) + ", p=" +
                       std::to_string(padding[axis]) + ")");
    }
    return static_cast<std::size_t>(span) / stride[axis] + 1;
  }

  /// (in - 1) * s - 2p + k; throws when that is below 1.
  std::size_t transpose_extent(std::size_t in, int axis) const {
    validate();
    const long out = (static_cast<long>(in) - 1) * static_cast<long>(stride[axis]) -
                     2 * static_cast<long>(padding[axis]) + static_cast<long>(kernel[axis]);
    if (in < 1 || out < 1) {
      throw ShapeError("transposed convolution output extent is non-positive (in=" +
                       std::to_string(in) + ")");
    }
    return static_cast<std::size_t>(out);
  }

  bool operator==(const ConvGeometry&) const = default;
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Spatial bookkeeping shared by conv2d and its transpose. "image" is the
/// larger side (conv input / transposed-conv output), "grid" the side the
/// kernel is evaluated on (conv output / transposed-conv input).
struct PatchLayout {
  std::size_t channels, image_h, image_w, grid_h, grid_w;
  ConvGeometry geom;

  std::size_t rows() const { return channels * geom.kernel[0] * geom.kernel[1]; }
  std::size_t grid_size() const { return grid_h * grid_w; }

  /// Whole grid rows per tile, sized so one column block stays cache resident.
  std::size_t tile_rows() const {
    const std::size_t target = 65536 / std::max<std::size_t>(rows(), 1);
    return std::clamp<std::size_t>(target / std::max<std::size_t>(grid_w, 1), 1, grid_h);
  }
  std::size_t tile_width() const { return tile_rows() * grid_w; }
};

/// Range of grid columns whose tap (offset `shift` from the patch origin)
/// lands inside [0, extent); returns [lo, hi).
inline std::pair<long, long> valid_span(long grid, long stride, long shift, long extent) {
  // need 0 <= o*stride + shift < extent
  long lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  long hi = extent - shift <= 0 ? 0 : (extent - shift - 1) / stride + 1;
  lo = std::min(lo, grid);
  hi = std::clamp(hi, lo, grid);
  return {lo, hi};
}

/// Gathers patch columns for grid rows [first / grid_w, (first + count) / grid_w)
/// into a rows() x count row-major block. `first` and `count` are whole rows.
inline void im2col_tile(const double* image, const PatchLayout& L, std::size_t first,
                        std::size_t count, double* cols) {
  const long kh = static_cast<long>(L.geom.kernel[0]), kw = static_cast<long>(L.geom.kernel[1]);
  const long sh = static_cast<long>(L.geom.stride[0]), sw = static_cast<long>(L.geom.stride[1]);
  const long ph = static_cast<long>(L.geom.padding[0]), pw = static_cast<long>(L.geom.padding[1]);
  const long H = static_cast<long>(L.image_h), W = static_cast<long>(L.image_w);
  const long gw = static_cast<long>(L.grid_w);
  const long row0 = static_cast<long>(first) / gw, nrows = static_cast<long>(count) / gw;
  std::size_t row = 0;
  for (std::size_t c = 0; c < L.channels; ++c) {
    const double* plane = image + c * L.image_h * L.image_w;
    for (long ki = 0; ki < kh; ++ki) {
      for (long kj = 0; kj < kw; ++kj, ++row) {
        const auto [lo, hi] = valid_span(gw, sw, kj - pw, W);
        double* out = cols + row * count;
        for (long r = 0; r < nrows; ++r, out += gw) {
          const long y = (row0 + r) * sh - ph + ki;
          if (y < 0 || y >= H || lo >= hi) {
            std::fill(out, out + gw, 0.0);
            continue;
          }
          std::fill(out, out + lo, 0.0);
          const double* src = plane + y * W;
          const long shift = kj - pw;
          if (sw == 1) {
            std::copy(src + lo + shift, src + hi + shift, out + lo);
          } else {
            for (long o = lo; o < hi; ++o) out[o] = src[o * sw + shift];
          }
          std::fill(out + hi, out + gw, 0.0);
        }
      }
    }
  }
}

/// Scatter-add of a patch block back onto the image; adjoint of im2col_tile.
inline void col2im_tile(const double* cols, const PatchLayout& L, std::size_t first,
                        std::size_t count, double* image) {
  const long kh = static_cast<long>(L.geom.kernel[0]), kw = static_cast<long>(L.geom.kernel[1]);
  const long sh = static_cast<long>(L.geom.stride[0]), sw = static_cast<long>(L.geom.stride[1]);
  const long ph = static_cast<long>(L.geom.padding[0]), pw = static_cast<long>(L.geom.padding[1]);
  const long H = static_cast<long>(L.image_h), W = static_cast<long>(L.image_w);
  const long gw = static_cast<long>(L.grid_w);
  const long row0 = static_cast<long>(first) / gw, nrows = static_cast<long>(count) / gw;
  std::size_t row = 0;
  for (std::size_t c = 0; c < L.channels; ++c) {
    double* plane = image + c * L.image_h * L.image_w;
    for (long ki = 0; ki < kh; ++ki) {
      for (long kj = 0; kj < kw; ++kj, ++row) {
        const auto [lo, hi] = valid_span(gw, sw, kj - pw, W);
        const double* in = cols + row * count;
        for (long r = 0; r < nrows; ++r, in += gw) {
          const long y = (row0 + r) * sh - ph + ki;
          if (y < 0 || y >= H) continue;
          double* dst = plane + y * W;
          const long shift = kj - pw;
          for (long o = lo; o < hi; ++o) dst[o * sw + shift] += in[o];
        }
      }
    }
  }
}

template <typename Fn>
void for_each_tile(const PatchLayout& L, Fn&& fn) {
  const std::size_t rows_per_tile = L.tile_rows();
  for (std::size_t r = 0; r < L.grid_h; r += rows_per_tile) {
    const std::size_t n = std::min(rows_per_tile, L.grid_h - r);
    fn(r * L.grid_w, n * L.grid_w);
  }
}

inline void add_channel_bias(std::vector<double>& out, std::span<const double> bias,
                             std::size_t batch, std::size_t channels, std::size_t plane) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = out.data() + (b * channels + c) * plane;
      const double v = bias[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += v;
    }
  }
}

inline void accumulate_bias_grad(std::span<const double> dout, std::span<double> dbias,
                                 std::size_t batch, std::size_t channels, std::size_t plane) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* p = dout.data() + (b * channels + c) * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      dbias[c] += s;
    }
  }
}

inline void check_conv_operands(const char* op, const Tensor& input, const Tensor& weight,
                                const Tensor& bias, std::size_t weight_in_axis,
                                std::size_t weight_out_axis, const ConvGeometry& geom) {
  if (input.rank() != 4) throw ShapeError(std::string(op) + ": input must be B x C x H x W");
  if (weight.rank() != 4) throw ShapeError(std::string(op) + ": weight must have rank 4");
  if (weight.dim(weight_in_axis) != input.dim(1)) {
    throw ShapeError(std::string(op) + ": weight expects " +
                     std::to_string(weight.dim(weight_in_axis)) + " input channels, input has " +
                     std::to_string(input.dim(1)));
  }
  if (weight.dim(2) != geom.kernel[0] || weight.dim(3) != geom.kernel[1]) {
    throw ShapeError(std::string(op) + ": weight kernel extents disagree with geometry");
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(weight_out_axis)) {
    throw ShapeError(std::string(op) + ": bias length must equal output channels");
  }
}

}  // namespace detail

/// 2-D cross-correlation with zero padding.
/// input [B,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout] -> [B,Cout,H',W'].
inline Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
                     const ConvGeometry& geom) {
  detail::check_conv_operands("conv2d", input, weight, bias, 1, 0, geom);
  const std::size_t B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Cout = weight.dim(0);
  const std::size_t Ho = geom.conv_extent(H, 0), Wo = geom.conv_extent(W, 1);
  const detail::PatchLayout L{Cin, H, W, Ho, Wo, geom};
  const std::size_t K = L.rows(), P = Ho * Wo;

  std::vector<double> out(B * Cout * P, 0.0);
  std::vector<double> cols(K * L.tile_width());
  detail::ConstMatrixMap wmat(weight.data().data(), Cout, K);
  for (std::size_t b = 0; b < B; ++b) {
    const double* img = input.data().data() + b * Cin * H * W;
    detail::MatrixMap y(out.data() + b * Cout * P, Cout, P);
    detail::for_each_tile(L, [&](std::size_t first, std::size_t count) {
      detail::im2col_tile(img, L, first, count, cols.data());
      detail::ConstMatrixMap cm(cols.data(), K, count);
      y.middleCols(first, count).noalias() = wmat * cm;
    });
  }
  detail::add_channel_bias(out, bias.data(), B, Cout, P);

  const bool track = tape.tracks(input, weight, bias);
  Tensor result = Tensor::produced("conv2d", {B, Cout, Ho, Wo}, std::move(out), track);
  if (track) {
    tape.record("conv2d", [input, weight, bias, result, L]() mutable {
      const std::size_t B = input.dim(0), Cout = weight.dim(0);
      const std::size_t K = L.rows(), P = L.grid_size();
      const std::size_t image = L.channels * L.image_h * L.image_w;
      auto dy_all = result.grad();
      if (bias.requires_grad()) detail::accumulate_bias_grad(dy_all, bias.grad(), B, Cout, P);
      if (!weight.requires_grad() && !input.requires_grad()) return;
      std::vector<double> cols(K * L.tile_width());
      std::vector<double> dcols(K * L.tile_width());
      detail::ConstMatrixMap wmat(weight.data().data(), Cout, K);
      detail::RowMatrix dw = detail::RowMatrix::Zero(Cout, K);
      for (std::size_t b = 0; b < B; ++b) {
        detail::ConstMatrixMap dy(dy_all.data() + b * Cout * P, Cout, P);
        const double* img = input.data().data() + b * image;
        detail::for_each_tile(L, [&](std::size_t first, std::size_t count) {
          auto dy_tile = dy.middleCols(first, count);
          if (weight.requires_grad()) {
            detail::im2col_tile(img, L, first, count, cols.data());
            detail::ConstMatrixMap cm(cols.data(), K, count);
            dw.noalias() += dy_tile * cm.transpose();
          }
          if (input.requires_grad()) {
            detail::MatrixMap dc(dcols.data(), K, count);
            dc.noalias() = wmat.transpose() * dy_tile;
            detail::col2im_tile(dcols.data(), L, first, count, input.grad().data() + b * image);
          }
        });
      }
      if (weight.requires_grad()) {
        auto g = weight.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dw.data()[i];
      }
    });
  }
  return result;
}

/// Transposed convolution: the adjoint of conv2d's linear map for the same
/// geometry. input [B,Cin,H,W], weight [Cin,Cout,kh,kw], bias [Cout]
/// -> [B,Cout,(H-1)s-2p+k,(W-1)s-2p+k].
inline Tensor conv2d_transpose(Tape& tape, const Tensor& input, const Tensor& weight,
                               const Tensor& bias, const ConvGeometry& geom) {
  detail::check_conv_operands("conv2d_transpose", input, weight, bias, 0, 1, geom);
  const std::size_t B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Cout = weight.dim(1);
  const std::size_t Ho = geom.transpose_extent(H, 0), Wo = geom.transpose_extent(W, 1);
  const detail::PatchLayout L{Cout, Ho, Wo, H, W, geom};
  const std::size_t K = L.rows(), P = H * W, image = Cout * Ho * Wo;

  std::vector<double> out(B * image, 0.0);
  std::vector<double> cols(K * L.tile_width());
  detail::ConstMatrixMap wmat(weight.data().data(), Cin, K);
  for (std::size_t b = 0; b < B; ++b) {
    detail::ConstMatrixMap x(input.data().data() + b * Cin * P, Cin, P);
    detail::for_each_tile(L, [&](std::size_t first, std::size_t count) {
      detail::MatrixMap cm(cols.data(), K, count);
      cm.noalias() = wmat.transpose() * x.middleCols(first, count);
      detail::col2im_tile(cols.data(), L, first, count, out.data() + b * image);
    });
  }
  detail::add_channel_bias(out, bias.data(), B, Cout, Ho * Wo);

  const bool track = tape.tracks(input, weight, bias);
  Tensor result =
      Tensor::produced("conv2d_transpose", {B, Cout, Ho, Wo}, std::move(out), track);
  if (track) {
    tape.record("conv2d_transpose", [input, weight, bias, result, L]() mutable {
      const std::size_t B = input.dim(0), Cin = input.dim(1);
      const std::size_t K = L.rows(), P = L.grid_size();
      const std::size_t image = L.channels * L.image_h * L.image_w;
      auto dy_all = result.grad();
      if (bias.requires_grad()) {
        detail::accumulate_bias_grad(dy_all, bias.grad(), B, L.channels, L.image_h * L.image_w);
      }
      if (!weight.requires_grad() && !input.requires_grad()) return;
      std::vector<double> cols(K * L.tile_width());
      detail::ConstMatrixMap wmat(weight.data().data(), Cin, K);
      detail::RowMatrix dw = detail::RowMatrix::Zero(Cin, K);
      for (std::size_t b = 0; b < B; ++b) {
        detail::ConstMatrixMap x(input.data().data() + b * Cin * P, Cin, P);
        detail::for_each_tile(L, [&](std::size_t first, std::size_t count) {
          detail::im2col_tile(dy_all.data() + b * image, L, first, count, cols.data());
          detail::ConstMatrixMap cm(cols.data(), K, count);
          if (input.requires_grad()) {
            detail::MatrixMap dx(input.grad().data() + b * Cin * P, Cin, P);
            dx.middleCols(first, count).noalias() += wmat * cm;
          }
          if (weight.requires_grad()) {
            dw.noalias() += x.middleCols(first, count) * cm.transpose();
          }
        });
      }
      if (weight.requires_grad()) {
        auto g = weight.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dw.data()[i];
      }
    });
  }
  return result;
}

}  // namespace sfs
