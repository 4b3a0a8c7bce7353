#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "sfsurrogate/error.hpp"

namespace sfs::data {

/// Row-major single-channel image. Row index grows along y, column along x.
class Field2D {
 public:
  Field2D() = default;
  Field2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Field2D(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw ShapeError("Field2D: value count mismatch");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }

  /// Reflection across the main diagonal (x <-> y).
  Field2D transposed() const {
    Field2D t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t.at(c, r) = at(r, c);
    return t;
  }

  bool same_shape(const Field2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Field2D&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> values_;
};

}  // namespace sfs::data
