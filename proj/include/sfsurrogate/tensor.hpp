#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sfsurrogate/error.hpp"

namespace sfs {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is how
/// the tape's backward rules reach the tensors they were recorded with.
/// Values are written only at construction, by recorded operations, and by
/// the optimizer.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
      : storage_(std::make_shared<Storage>()) {
    validate_shape(shape);
    storage_->values.assign(shape_numel(shape), fill);
    storage_->shape = std::move(shape);
    check_all_finite("Tensor");
    set_requires_grad(requires_grad);
  }

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : storage_(std::make_shared<Storage>()) {
    validate_shape(shape);
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("tensor of shape " + shape_str(shape) + " given " +
                       std::to_string(values.size()) + " values");
    }
    storage_->shape = std::move(shape);
    storage_->values = std::move(values);
    check_all_finite("Tensor");
    set_requires_grad(requires_grad);
  }

  /// Result of an operation; non-finite values are reported against `op`.
  static Tensor produced(std::string_view op, Shape shape, std::vector<double> values,
                         bool requires_grad) {
    Tensor t;
    t.storage_ = std::make_shared<Storage>();
    validate_shape(shape);
    if (shape_numel(shape) != values.size()) {
      throw ShapeError(std::string(op) + ": internal size mismatch");
    }
    t.storage_->shape = std::move(shape);
    t.storage_->values = std::move(values);
    t.check_all_finite(op);
    t.set_requires_grad(requires_grad);
    return t;
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(Shape{1}, v, requires_grad);
  }

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t numel() const { return storage_->values.size(); }

  std::span<const double> data() const { return storage_->values; }
  /// Direct write access for optimizers, initializers and perturbation checks.
  std::span<double> mutable_data() { return storage_->values; }
  double item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return storage_->values[0];
  }
  double operator[](std::size_t i) const { return storage_->values[i]; }

  bool requires_grad() const noexcept { return storage_ && storage_->requires_grad; }
  void set_requires_grad(bool on) {
    storage_->requires_grad = on;
    if (on) {
      storage_->grad.assign(numel(), 0.0);
    } else {
      storage_->grad.clear();
      storage_->grad.shrink_to_fit();
    }
  }
  /// Gradient buffer. Writable through const handles: backward rules hold
  /// const copies of their inputs and accumulate into them.
  std::span<double> grad() const { return storage_->grad; }
  void zero_grad() const { std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0); }

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

  /// Deep copy without gradient or tape linkage.
  Tensor detached_copy() const {
    Tensor t;
    t.storage_ = std::make_shared<Storage>();
    t.storage_->shape = storage_->shape;
    t.storage_->values = storage_->values;
    return t;
  }

  void check_all_finite(std::string_view where) const {
    for (double v : storage_->values) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string(where) + " produced a non-finite value");
      }
    }
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
    for (auto e : shape) {
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
  }

  std::shared_ptr<Storage> storage_;
};

/// Ordered record of executed operations with their backward rules.
///
/// Operations append themselves only while the tape is recording and at least
/// one input needs a gradient, so entries are always in execution (and hence
/// topological) order.
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record && !consumed_; }
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::string_view op_name(std::size_t i) const { return entries_.at(i).name; }

  void record(std::string_view name, std::function<void()> backward_rule) {
    if (consumed_) throw StateError("cannot record on a consumed tape");
    entries_.push_back({std::string(name), std::move(backward_rule)});
  }

  /// True when an op with these inputs should produce a grad-tracking output.
  template <typename... Ts>
  bool tracks(const Ts&... inputs) const {
    return recording() && (inputs.requires_grad() || ...);
  }

  friend void backward(Tensor& loss, Tape& tape);

 private:
  struct Entry {
    std::string name;
    std::function<void()> backward_rule;
  };

  Mode mode_;
  bool consumed_ = false;
  std::vector<Entry> entries_;
};

/// Reverse sweep over the tape. Gradients accumulate into every tensor that
/// requires one; callers zero parameter gradients between steps.
inline void backward(Tensor& loss, Tape& tape) {
  if (tape.consumed_) throw StateError("tape already consumed by a previous backward pass");
  if (loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) throw StateError("loss does not depend on any tracked tensor");
  loss.grad()[0] += 1.0;
  tape.consumed_ = true;
  for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) {
    it->backward_rule();
  }
  // Release captured activations.
  tape.entries_.clear();
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot of mismatched lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace sfs
