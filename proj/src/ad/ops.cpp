#include "isac/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isac::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                              to_string(b));
}

Tape* common_tape(const char* op, std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (tape != nullptr && t->tape() != tape) {
      throw std::invalid_argument(std::string(op) + ": inputs recorded on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

// Builds the result tensor, recording it when any input is tracked.
Tensor finish(const char* op, Shape shape, std::vector<double> values,
              std::initializer_list<const Tensor*> inputs, Tape::BackwardFn backward) {
  Tape* tape = common_tape(op, inputs);
  if (tape == nullptr) return Tensor::constant(shape, std::move(values));
  std::vector<std::size_t> ids;
  for (const Tensor* t : inputs) {
    if (t->tracked()) ids.push_back(*t->node());
  }
  return tape->record(shape, std::move(values), std::move(ids), std::move(backward));
}

void require_nonempty(const char* op, const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument(std::string(op) + ": empty tensor");
}

std::size_t bcast_index(const Shape& s, std::size_t r, std::size_t c) {
  return (s.rows == 1 ? 0 : r) * s.cols + (s.cols == 1 ? 0 : c);
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    shape_error(op, a, b);
  };
  return {dim(a.rows, b.rows), dim(a.cols, b.cols)};
}

// Element-wise binary op with broadcasting. `fwd(a, b)` gives the value,
// `dfa(a, b, out)` / `dfb(a, b, out)` the partial derivatives.
template <class Fwd, class Da, class Db>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Da dfa, Db dfb) {
  require_nonempty(op, a);
  require_nonempty(op, b);
  const Shape out = broadcast_shape(op, a.shape(), b.shape());
  std::vector<double> values(out.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      values[r * out.cols + c] = fwd(av[bcast_index(a.shape(), r, c)], bv[bcast_index(b.shape(), r, c)]);
    }
  }
  auto out_values = values;
  return finish(op, out, std::move(values), {&a, &b},
                [a, b, out, out_values = std::move(out_values), dfa, dfb](std::span<const double> g,
                                                                          Tape& tape) {
                  const auto av = a.values();
                  const auto bv = b.values();
                  std::span<double> ga, gb;
                  if (a.tracked()) ga = tape.grad_buffer(*a.node());
                  if (b.tracked()) gb = tape.grad_buffer(*b.node());
                  for (std::size_t r = 0; r < out.rows; ++r) {
                    for (std::size_t c = 0; c < out.cols; ++c) {
                      const std::size_t o = r * out.cols + c;
                      const std::size_t ia = bcast_index(a.shape(), r, c);
                      const std::size_t ib = bcast_index(b.shape(), r, c);
                      if (!ga.empty()) ga[ia] += g[o] * dfa(av[ia], bv[ib], out_values[o]);
                      if (!gb.empty()) gb[ib] += g[o] * dfb(av[ia], bv[ib], out_values[o]);
                    }
                  }
                });
}

// Element-wise unary op; `df(x, y)` is dy/dx given input x and output y.
template <class Fwd, class Df>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Df df) {
  std::vector<double> values(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = fwd(av[i]);
  Buffer saved = std::make_shared<const std::vector<double>>(values);
  return finish(op, a.shape(), std::move(values), {&a},
                [a, saved, df](std::span<const double> g, Tape& tape) {
                  auto ga = tape.grad_buffer(*a.node());
                  const auto av = a.values();
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * df(av[i], (*saved)[i]);
                });
}

void check_axis(const char* op, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument(std::string(op) + ": axis must be 0 or 1");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows() || a.size() == 0 || b.size() == 0) shape_error("matmul", a.shape(), b.shape());
  const Shape out{a.rows(), b.cols()};
  std::vector<double> values(out.size());
  MutMap(values.data(), static_cast<Eigen::Index>(out.rows), static_cast<Eigen::Index>(out.cols))
      .noalias() = as_matrix(a) * as_matrix(b);
  return finish("matmul", out, std::move(values), {&a, &b},
                [a, b](std::span<const double> g, Tape& tape) {
                  ConstMap gm(g.data(), static_cast<Eigen::Index>(a.rows()),
                              static_cast<Eigen::Index>(b.cols()));
                  if (a.tracked()) {
                    auto ga = tape.grad_buffer(*a.node());
                    MutMap(ga.data(), static_cast<Eigen::Index>(a.rows()),
                           static_cast<Eigen::Index>(a.cols()))
                        .noalias() += gm * as_matrix(b).transpose();
                  }
                  if (b.tracked()) {
                    auto gb = tape.grad_buffer(*b.node());
                    MutMap(gb.data(), static_cast<Eigen::Index>(b.rows()),
                           static_cast<Eigen::Index>(b.cols()))
                        .noalias() += as_matrix(a).transpose() * gm;
                  }
                });
}

Tensor transpose(const Tensor& a) {
  const Shape out{a.cols(), a.rows()};
  std::vector<double> values(out.size());
  const auto av = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) values[c * a.rows() + r] = av[r * a.cols() + c];
  }
  return finish("transpose", out, std::move(values), {&a}, [a](std::span<const double> g, Tape& tape) {
    auto ga = tape.grad_buffer(*a.node());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) ga[r * a.cols() + c] += g[c * a.rows() + r];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.values()) {
    if (y == 0.0) throw std::domain_error("div: division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor shift(const Tensor& a, double offset) {
  return unary(
      "shift", a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.values()) {
    if (x < 0.0) throw std::domain_error("sqrt: negative input " + std::to_string(x));
  }
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    // NaN passes through so callers can report where it came from.
    if (x <= 0.0) throw std::domain_error("log: non-positive input " + std::to_string(x));
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.values()) total += x;
  return finish("sum", {1, 1}, {total}, {&a}, [a](std::span<const double> g, Tape& tape) {
    auto ga = tape.grad_buffer(*a.node());
    for (double& x : ga) x += g[0];
  });
}

Tensor sum(const Tensor& a, int axis) {
  check_axis("sum", axis);
  const Shape out = axis == 0 ? Shape{1, a.cols()} : Shape{a.rows(), 1};
  std::vector<double> values(out.size(), 0.0);
  const auto av = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) values[axis == 0 ? c : r] += av[r * a.cols() + c];
  }
  return finish("sum", out, std::move(values), {&a}, [a, axis](std::span<const double> g, Tape& tape) {
    auto ga = tape.grad_buffer(*a.node());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) ga[r * a.cols() + c] += g[axis == 0 ? c : r];
    }
  });
}

Tensor mean(const Tensor& a) {
  require_nonempty("mean", a);
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean(const Tensor& a, int axis) {
  require_nonempty("mean", a);
  check_axis("mean", axis);
  const double n = static_cast<double>(axis == 0 ? a.rows() : a.cols());
  return scale(sum(a, axis), 1.0 / n);
}

Tensor softmax(const Tensor& a, int axis) {
  check_axis("softmax", axis);
  require_nonempty("softmax", a);
  const std::size_t lanes = axis == 1 ? a.rows() : a.cols();
  const std::size_t len = axis == 1 ? a.cols() : a.rows();
  auto at = [&](std::size_t lane, std::size_t k) {
    return axis == 1 ? lane * a.cols() + k : k * a.cols() + lane;
  };
  const auto av = a.values();
  std::vector<double> values(a.size());
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    double peak = -std::numeric_limits<double>::infinity();
    bool diverged = false;
    for (std::size_t k = 0; k < len; ++k) {
      const double v = av[at(lane, k)];
      diverged = diverged || std::isnan(v) || v == std::numeric_limits<double>::infinity();
      peak = std::max(peak, v);
    }
    if (diverged) {
      // NaN or +inf scores come from a diverged model; let the NaN reach the loss.
      for (std::size_t k = 0; k < len; ++k) values[at(lane, k)] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (!std::isfinite(peak)) throw std::domain_error("softmax: lane without a finite entry");
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(av[at(lane, k)] - peak);
      values[at(lane, k)] = e;
      total += e;
    }
    for (std::size_t k = 0; k < len; ++k) values[at(lane, k)] /= total;
  }
  Buffer saved = std::make_shared<const std::vector<double>>(values);
  const Shape shape = a.shape();
  return finish("softmax", shape, std::move(values), {&a},
                [a, saved, axis, lanes, len](std::span<const double> g, Tape& tape) {
                  auto ga = tape.grad_buffer(*a.node());
                  const auto& y = *saved;
                  const std::size_t cols = a.cols();
                  for (std::size_t lane = 0; lane < lanes; ++lane) {
                    auto at = [&](std::size_t k) { return axis == 1 ? lane * cols + k : k * cols + lane; };
                    double dot = 0.0;
                    for (std::size_t k = 0; k < len; ++k) dot += g[at(k)] * y[at(k)];
                    for (std::size_t k = 0; k < len; ++k) ga[at(k)] += y[at(k)] * (g[at(k)] - dot);
                  }
                });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  check_axis("concat", axis);
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape out = parts[0].shape();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (axis == 0) {
      if (s.cols != out.cols) shape_error("concat", out, s);
      out.rows += s.rows;
    } else {
      if (s.rows != out.rows) shape_error("concat", out, s);
      out.cols += s.cols;
    }
  }
  std::vector<double> values(out.size());
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(offset);
    const auto tv = t.values();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        const std::size_t o = axis == 0 ? (offset + r) * out.cols + c : r * out.cols + offset + c;
        values[o] = tv[r * t.cols() + c];
      }
    }
    offset += axis == 0 ? t.rows() : t.cols();
  }

  Tape* tape = nullptr;
  std::vector<std::size_t> ids;
  for (const Tensor& t : parts) {
    if (!t.tracked()) continue;
    if (tape != nullptr && t.tape() != tape) throw std::invalid_argument("concat: inputs on different tapes");
    tape = t.tape();
    ids.push_back(*t.node());
  }
  if (tape == nullptr) return Tensor::constant(out, std::move(values));
  std::vector<Tensor> kept(parts.begin(), parts.end());
  return tape->record(out, std::move(values), std::move(ids),
                      [kept = std::move(kept), offsets, axis, out](std::span<const double> g, Tape& tp) {
                        for (std::size_t p = 0; p < kept.size(); ++p) {
                          const Tensor& t = kept[p];
                          if (!t.tracked()) continue;
                          auto gt = tp.grad_buffer(*t.node());
                          for (std::size_t r = 0; r < t.rows(); ++r) {
                            for (std::size_t c = 0; c < t.cols(); ++c) {
                              const std::size_t o = axis == 0 ? (offsets[p] + r) * out.cols + c
                                                              : r * out.cols + offsets[p] + c;
                              gt[r * t.cols() + c] += g[o];
                            }
                          }
                        }
                      });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.rows()) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") out of " + to_string(a.shape()));
  }
  const std::size_t cols = a.cols();
  const auto av = a.values();
  std::vector<double> values(av.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                             av.begin() + static_cast<std::ptrdiff_t>(end * cols));
  return finish("slice_rows", {end - begin, cols}, std::move(values), {&a},
                [a, begin](std::span<const double> g, Tape& tape) {
                  auto ga = tape.grad_buffer(*a.node());
                  const std::size_t off = begin * a.cols();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
                });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.cols()) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") out of " + to_string(a.shape()));
  }
  const std::size_t width = end - begin;
  const auto av = a.values();
  std::vector<double> values(a.rows() * width);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < width; ++c) values[r * width + c] = av[r * a.cols() + begin + c];
  }
  return finish("slice_cols", {a.rows(), width}, std::move(values), {&a},
                [a, begin, width](std::span<const double> g, Tape& tape) {
                  auto ga = tape.grad_buffer(*a.node());
                  for (std::size_t r = 0; r < a.rows(); ++r) {
                    for (std::size_t c = 0; c < width; ++c) ga[r * a.cols() + begin + c] += g[r * width + c];
                  }
                });
}

}  // namespace isac::ad
