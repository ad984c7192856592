#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace isac::ad {

/// Row-major 2-D shape. Vectors are n x 1 or 1 x n, scalars 1 x 1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

using Buffer = std::shared_ptr<const std::vector<double>>;

class Tape;

/// Dense real array. A tensor is either a constant (no tape) or a node on a
/// Tape, in which case operations consuming it are recorded for backward.
/// Values are immutable once created and shared between copies.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor constant(Shape shape, Buffer values);
  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return shape_.size(); }

  std::span<const double> values() const noexcept;
  const Buffer& buffer() const noexcept { return values_; }
  double operator()(std::size_t r, std::size_t c) const {
    return (*values_)[r * shape_.cols + c];
  }
  /// Value of a 1 x 1 tensor.
  double item() const;

  bool tracked() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::optional<std::size_t> node() const noexcept;

  /// Same values, detached from any tape.
  Tensor detached() const { return Tensor(shape_, values_, nullptr, 0); }

 private:
  friend class Tape;
  Tensor(Shape shape, Buffer values, Tape* tape, std::size_t node)
      : shape_(shape), values_(std::move(values)), tape_(tape), node_(node) {}

  Shape shape_;
  Buffer values_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Records operations in execution order and runs reverse-mode accumulation.
/// Tensors hold a raw pointer back to their tape, so a Tape must outlive every
/// tensor recorded on it and is neither copyable nor movable.
class Tape {
 public:
  /// Receives d(loss)/d(output) and accumulates into the inputs' gradients.
  using BackwardFn = std::function<void(std::span<const double>, Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf node whose gradient is tracked. The buffer is aliased, not copied.
  Tensor variable(Shape shape, Buffer values);
  Tensor variable(Shape shape, std::vector<double> values);

  /// Appends an operation result. `inputs` are the node ids the backward rule
  /// writes to; they must all precede the new node.
  Tensor record(Shape shape, std::vector<double> values,
                std::vector<std::size_t> inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and visits recorded nodes once each in reverse
  /// order. Gradients from any earlier backward call are discarded.
  void backward(const Tensor& loss);

  /// Gradient of the last backward() loss with respect to `t`; zeros when `t`
  /// did not influence the loss.
  std::vector<double> grad(const Tensor& t) const;

  /// Mutable gradient accumulator of a node, zero-initialised on first use.
  std::span<double> grad_buffer(std::size_t node);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const std::size_t> inputs_of(std::size_t node) const {
    return nodes_.at(node).inputs;
  }

 private:
  struct Node {
    Shape shape;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
};

}  // namespace isac::ad
