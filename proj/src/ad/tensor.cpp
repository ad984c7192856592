#include "isac/ad/tensor.hpp"

#include <stdexcept>

namespace isac::ad {

std::string to_string(const Shape& shape) {
  return "(" + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + ")";
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return constant(shape, std::make_shared<const std::vector<double>>(std::move(values)));
}

Tensor Tensor::constant(Shape shape, Buffer values) {
  if (!values || values->size() != shape.size()) {
    throw std::invalid_argument("Tensor::constant: " + std::to_string(values ? values->size() : 0) +
                                " values for shape " + to_string(shape));
  }
  return Tensor(shape, std::move(values), nullptr, 0);
}

Tensor Tensor::scalar(double value) { return constant({1, 1}, std::vector<double>{value}); }

Tensor Tensor::zeros(Shape shape) { return constant(shape, std::vector<double>(shape.size(), 0.0)); }

std::span<const double> Tensor::values() const noexcept {
  if (!values_) return {};
  return {values_->data(), values_->size()};
}

double Tensor::item() const {
  if (shape_.rows != 1 || shape_.cols != 1) {
    throw std::invalid_argument("Tensor::item: shape " + to_string(shape_) + " is not 1x1");
  }
  return (*values_)[0];
}

std::optional<std::size_t> Tensor::node() const noexcept {
  if (tape_ == nullptr) return std::nullopt;
  return node_;
}

Tensor Tape::variable(Shape shape, Buffer values) {
  if (!values || values->size() != shape.size()) {
    throw std::invalid_argument("Tape::variable: buffer does not match shape " + to_string(shape));
  }
  nodes_.push_back(Node{shape, {}, {}, {}});
  return Tensor(shape, std::move(values), this, nodes_.size() - 1);
}

Tensor Tape::variable(Shape shape, std::vector<double> values) {
  return variable(shape, std::make_shared<const std::vector<double>>(std::move(values)));
}

Tensor Tape::record(Shape shape, std::vector<double> values, std::vector<std::size_t> inputs,
                    BackwardFn backward) {
  const std::size_t id = nodes_.size();
  for (std::size_t in : inputs) {
    if (in >= id) throw std::logic_error("Tape::record: input node does not precede output");
  }
  nodes_.push_back(Node{shape, std::move(inputs), std::move(backward), {}});
  return Tensor(shape, std::make_shared<const std::vector<double>>(std::move(values)), this, id);
}

std::span<double> Tape::grad_buffer(std::size_t node) {
  Node& n = nodes_.at(node);
  if (n.grad.empty()) n.grad.assign(n.shape.size(), 0.0);
  return n.grad;
}

void Tape::backward(const Tensor& loss) {
  if (loss.shape().rows != 1 || loss.shape().cols != 1) {
    throw std::invalid_argument("Tape::backward: loss must be scalar, got " +
                                to_string(loss.shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!loss.tracked()) return;
  if (loss.tape() != this) throw std::invalid_argument("Tape::backward: loss recorded on another tape");

  const std::size_t root = *loss.node();
  grad_buffer(root)[0] = 1.0;
  for (std::size_t id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(std::span<const double>(n.grad), *this);
  }
}

std::vector<double> Tape::grad(const Tensor& t) const {
  if (!t.tracked()) return std::vector<double>(t.size(), 0.0);
  if (t.tape() != this) throw std::invalid_argument("Tape::grad: tensor recorded on another tape");
  const Node& n = nodes_[*t.node()];
  if (n.grad.empty()) return std::vector<double>(t.size(), 0.0);
  return n.grad;
}

}  // namespace isac::ad
