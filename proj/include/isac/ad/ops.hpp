#pragma once

#include <cstddef>
#include <span>

#include "isac/ad/tensor.hpp"

// Differentiable operations. Every op is recorded on the tape of its tracked
// inputs (all tracked inputs must share one tape); when no input is tracked
// the result is a plain constant. Shape or domain violations throw
// std::invalid_argument / std::domain_error naming the op.
namespace isac::ad {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Element-wise binary ops broadcast a dimension of size 1 against the other
// operand (e.g. (n x m) + (1 x m), (n x m) * (n x 1), anything with 1 x 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor shift(const Tensor& a, double offset);
Tensor neg(const Tensor& a);

Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);

/// Reductions. axis 0 collapses rows (result 1 x cols), axis 1 collapses
/// columns (result rows x 1).
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);

/// Numerically stable softmax along `axis` (max subtracted first). Entries
/// equal to -inf receive probability 0.
Tensor softmax(const Tensor& a, int axis);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

}  // namespace isac::ad
