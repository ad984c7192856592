#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "isac/ad/adam.hpp"
#include "isac/ad/grad_check.hpp"
#include "isac/ad/ops.hpp"

namespace isac::ad {
namespace {

using test::make_param;
using test::random_values;

TEST(Ops, ReluZeroesNegatives) {
  const Tensor y = relu(Tensor::constant({1, 3}, {-1.0, 0.0, 2.0}));
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()), (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Ops, SoftmaxOfEqualInputsIsUniform) {
  const Tensor y = softmax(Tensor::constant({1, 3}, {0.0, 0.0, 0.0}), 1);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, MatmulIdentityIsExact) {
  const Tensor eye = Tensor::constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor x = Tensor::constant({3, 4}, random_values(12, 3));
  const Tensor y = matmul(eye, x);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(y.values()[i], x.values()[i]);
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("2x3"), std::string::npos);
  }
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), std::invalid_argument);
  EXPECT_THROW(slice_cols(a, 2, 4), std::invalid_argument);
}

TEST(Ops, DomainErrors) {
  EXPECT_THROW(log(Tensor::constant({1, 2}, {1.0, 0.0})), std::domain_error);
  EXPECT_THROW(sqrt(Tensor::scalar(-1.0)), std::domain_error);
  EXPECT_THROW(div(Tensor::scalar(1.0), Tensor::scalar(0.0)), std::domain_error);
}

TEST(Ops, BroadcastingRules) {
  const Tensor m = Tensor::constant({2, 2}, {1, 2, 3, 4});
  const Tensor row = Tensor::constant({1, 2}, {10, 20});
  const Tensor col = Tensor::constant({2, 1}, {100, 200});
  const Tensor r = add(m, row);
  const Tensor c = mul(m, col);
  EXPECT_EQ(r(1, 1), 24.0);
  EXPECT_EQ(c(1, 0), 600.0);
  EXPECT_EQ(sub(m, Tensor::scalar(1.0))(0, 0), 0.0);
}

TEST(Ops, ReductionsAndShapes) {
  const Tensor m = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(sum(m).item(), 21.0);
  EXPECT_EQ(sum(m, 0).shape(), (Shape{1, 3}));
  EXPECT_EQ(sum(m, 1)(1, 0), 15.0);
  EXPECT_DOUBLE_EQ(mean(m).item(), 3.5);
  EXPECT_DOUBLE_EQ(mean(m, 0)(0, 2), 4.5);
  EXPECT_EQ(transpose(m)(2, 1), 6.0);
  const std::vector<Tensor> parts{m, m};
  EXPECT_EQ(concat(parts, 0).shape(), (Shape{4, 3}));
  EXPECT_EQ(concat(parts, 1)(1, 5), 6.0);
  EXPECT_EQ(slice_rows(m, 1, 2)(0, 0), 4.0);
}

TEST(Ops, SoftmaxSumsToOneAndIsShiftInvariant) {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> v = random_values(12, 100 + trial, -20.0, 20.0);
    const Tensor x = Tensor::constant({3, 4}, v);
    for (int axis : {0, 1}) {
      const Tensor y = softmax(x, axis);
      const Tensor s = sum(y, axis);
      for (double t : s.values()) EXPECT_NEAR(t, 1.0, 1e-12);
      const Tensor shifted = softmax(shift(x, rng.uniform(-50.0, 50.0)), axis);
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(shifted.values()[i], y.values()[i], 1e-12);
    }
  }
}

TEST(Ops, SoftmaxMaskedEntriesGetZero) {
  const double inf = std::numeric_limits<double>::infinity();
  const Tensor y = softmax(Tensor::constant({1, 3}, {0.0, -inf, 0.0}), 1);
  EXPECT_EQ(y(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  EXPECT_THROW(softmax(Tensor::constant({1, 2}, {-inf, -inf}), 1), std::domain_error);
  const Tensor bad = softmax(Tensor::constant({2, 2}, {std::nan(""), 0.0, 1.0, 2.0}), 1);
  EXPECT_TRUE(std::isnan(bad.values()[0]) && std::isnan(bad.values()[1]));
  EXPECT_TRUE(std::isfinite(bad.values()[2]));
  EXPECT_TRUE(std::isnan(softmax(Tensor::constant({1, 2}, {inf, 0.0}), 1).values()[0]));
}

TEST(Backward, SumOfSquares) {
  Tape tape;
  const Tensor x = tape.variable({1, 2}, std::vector<double>{1.0, 2.0});
  tape.backward(sum(square(x)));
  EXPECT_EQ(tape.grad(x), (std::vector<double>{2.0, 4.0}));
}

TEST(Backward, DeadReluGivesZeroGradient) {
  Tape tape;
  const Tensor w = tape.variable({1, 1}, std::vector<double>{0.7});
  tape.backward(mul(relu(Tensor::scalar(-3.0)), w));
  EXPECT_EQ(tape.grad(w), (std::vector<double>{0.0}));
}

TEST(Backward, NonScalarLossThrows) {
  Tape tape;
  const Tensor x = tape.variable({1, 2}, std::vector<double>{1.0, 2.0});
  EXPECT_THROW(tape.backward(square(x)), std::invalid_argument);
}

TEST(Backward, UntouchedLeafHasZeroGradient) {
  Tape tape;
  const Tensor x = tape.variable({1, 2}, std::vector<double>{1.0, 2.0});
  const Tensor unused = tape.variable({2, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(unused), std::vector<double>(4, 0.0));
}

TEST(Backward, FanOutAccumulates) {
  // y = x * x + 3 x, both uses of x feed back: dy/dx = 2x + 3.
  Tape tape;
  const Tensor x = tape.variable({1, 1}, std::vector<double>{1.5});
  tape.backward(add(mul(x, x), scale(x, 3.0)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 6.0);
}

TEST(Backward, VisitsInReverseRecordingOrder) {
  Tape tape;
  const Tensor x = tape.variable({1, 1}, std::vector<double>{2.0});
  const Tensor a = square(x);
  const Tensor b = mul(a, x);
  for (std::size_t n = 0; n < tape.size(); ++n) {
    for (std::size_t in : tape.inputs_of(n)) EXPECT_LT(in, n);
  }
  tape.backward(sum(add(a, b)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 2 * 2.0 + 3 * 4.0);
}

TEST(Backward, IsLinearInTheLoss) {
  const ParameterList params{make_param("w", {3, 2}, 11)};
  auto grads_of = [&](double a, double b) {
    Tape tape;
    const Tensor w = tape.variable(params[0].shape, params[0].values);
    const Tensor l1 = sum(square(w));
    const Tensor l2 = sum(relu(matmul(transpose(w), w)));
    tape.backward(add(scale(l1, a), scale(l2, b)));
    return tape.grad(w);
  };
  const auto g1 = grads_of(1.0, 0.0);
  const auto g2 = grads_of(0.0, 1.0);
  const auto g = grads_of(2.5, -0.75);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 2.5 * g1[i] - 0.75 * g2[i], 1e-12);
}

// Every op through a finite-difference oracle on random instances.
struct OpCase {
  const char* name;
  Shape shape;
  std::function<Tensor(const Tensor&)> f;
  double lo = -1.0;
  double hi = 1.0;
};

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const Tensor fixed = Tensor::constant({3, 3}, random_values(9, 5));
  const Tensor row = Tensor::constant({1, 3}, random_values(3, 6, 0.5, 1.5));
  const std::vector<OpCase> cases = {
      {"matmul_left", {2, 3}, [&](const Tensor& x) { return sum(square(matmul(x, fixed))); }},
      {"matmul_right", {3, 2}, [&](const Tensor& x) { return sum(square(matmul(fixed, x))); }},
      {"transpose", {2, 3}, [&](const Tensor& x) { return sum(mul(transpose(x), transpose(x))); }},
      {"add_broadcast", {2, 3}, [&](const Tensor& x) { return sum(square(add(x, row))); }},
      {"sub_broadcast", {1, 3}, [&](const Tensor& x) { return sum(square(sub(fixed, x))); }},
      {"mul", {2, 3}, [&](const Tensor& x) { return sum(mul(x, square(x))); }},
      {"div", {3, 3}, [&](const Tensor& x) { return sum(div(fixed, x)); }, 0.5, 2.0},
      {"div_denominator_broadcast", {3, 1}, [&](const Tensor& x) { return sum(div(fixed, x)); }, 0.5, 2.0},
      {"scale_shift_neg", {2, 2}, [&](const Tensor& x) { return sum(square(neg(shift(scale(x, 3.0), 0.5)))); }},
      {"sqrt", {2, 3}, [&](const Tensor& x) { return sum(sqrt(x)); }, 0.5, 2.0},
      {"log", {2, 3}, [&](const Tensor& x) { return sum(log(x)); }, 0.5, 2.0},
      {"relu", {3, 3}, [&](const Tensor& x) { return sum(square(relu(x))); }},
      {"sum_axis0", {3, 2}, [&](const Tensor& x) { return sum(square(sum(x, 0))); }},
      {"sum_axis1", {3, 2}, [&](const Tensor& x) { return sum(square(sum(x, 1))); }},
      {"mean_axes", {3, 2}, [&](const Tensor& x) { return add(mean(square(mean(x, 0))), mean(square(mean(x, 1)))); }},
      {"softmax_axis1", {2, 3}, [&](const Tensor& x) { return sum(mul(softmax(x, 1), slice_rows(fixed, 0, 2))); }},
      {"softmax_axis0", {3, 3}, [&](const Tensor& x) { return sum(mul(softmax(x, 0), fixed)); }},
      {"concat", {2, 3}, [&](const Tensor& x) {
         const std::vector<Tensor> p{x, square(x)};
         return add(sum(square(concat(p, 0))), sum(mul(concat(p, 1), concat(p, 1))));
       }},
      {"slices", {3, 3}, [&](const Tensor& x) {
         return add(sum(square(slice_rows(x, 1, 3))), sum(mul(slice_cols(x, 0, 2), slice_cols(x, 1, 3))));
       }},
  };
  const OpCase& c = cases.at(static_cast<std::size_t>(GetParam()) % cases.size());
  for (int trial = 0; trial < 5; ++trial) {
    ParameterList params{{c.name, c.shape,
                          std::make_shared<std::vector<double>>(
                              random_values(c.shape.size(), 1000 * GetParam() + trial, c.lo, c.hi))}};
    if (std::string(c.name) == "relu") {
      // Keep probes away from the kink.
      for (double& v : *params[0].values) v = v >= 0 ? v + 0.05 : v - 0.05;
    }
    const GradCheckReport r = grad_check([&](std::span<const Tensor> w) { return c.f(w[0]); }, params);
    EXPECT_TRUE(r.passed) << c.name << " worst relative error " << r.worst;
    EXPECT_LT(r.worst, 1e-5) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range(0, 19));

TEST(GradCheck, ConstantFunctionPasses) {
  const ParameterList params{make_param("w", {2, 2}, 4)};
  const GradCheckReport r = grad_check([](std::span<const Tensor>) { return Tensor::scalar(3.0); }, params);
  EXPECT_TRUE(r.passed);
  for (const auto& p : r.probes) {
    EXPECT_EQ(p.analytic, 0.0);
    EXPECT_LT(std::abs(p.numeric), 1e-9);
  }
}

TEST(GradCheck, LinearFunctionMatchesExactly) {
  const std::vector<double> x = random_values(4, 8);
  const ParameterList params{make_param("w", {1, 4}, 12)};
  const Tensor xt = Tensor::constant({4, 1}, x);
  const GradCheckReport r = grad_check([&](std::span<const Tensor> w) { return matmul(w[0], xt); }, params);
  ASSERT_EQ(r.probes.size(), 4u);
  for (const auto& p : r.probes) {
    EXPECT_NEAR(p.analytic, x[p.element], 1e-15);
    EXPECT_NEAR(p.numeric, x[p.element], 1e-8);
  }
}

TEST(GradCheck, TwoLayerComposite) {
  const ParameterList params{make_param("w1", {4, 5}, 21), make_param("w2", {5, 1}, 22)};
  const Tensor x = Tensor::constant({3, 4}, random_values(12, 23));
  const GradCheckReport r = grad_check(
      [&](std::span<const Tensor> w) { return sum(square(matmul(relu(matmul(x, w[0])), w[1]))); }, params);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(GradCheck, DetectsAWrongGradient) {
  // sqrt(x^2) has a true derivative; feeding a constant for one branch breaks
  // the tape gradient and must be reported.
  const ParameterList params{make_param("w", {1, 3}, 31)};
  const GradCheckReport r = grad_check(
      [&](std::span<const Tensor> w) { return sum(mul(w[0], w[0].detached())); }, params);
  EXPECT_FALSE(r.passed);
}

// f(w) = sum(log(1 + w^2)), derivative 2 w / (1 + w^2).
TEST(GradCheck, HigherOrderStencilsAndRiddersAreMoreAccurate) {
  const ParameterList params{make_param("w", {1, 4}, 51)};
  auto cube = [](std::span<const Tensor> w) { return sum(log(shift(square(w[0]), 1.0))); };
  double previous = 1.0;
  for (int order : {2, 4, 6}) {
    GradCheckOptions opt;
    opt.order = order;
    opt.step = 1e-1;
    const GradCheckReport r = grad_check(cube, params, opt);
    for (const auto& p : r.probes) {
      const double x = (*params[0].values)[p.element];
      EXPECT_NEAR(p.analytic, 2 * x / (1 + x * x), 1e-14);
    }
    EXPECT_LT(r.worst, previous / 10);
    previous = r.worst;
  }
  GradCheckOptions opt;
  opt.ridders = true;
  opt.step = 1e-2;
  EXPECT_LT(grad_check(cube, params, opt).worst, 1e-9);
  opt = {};
  opt.order = 3;
  EXPECT_THROW(grad_check(cube, params, opt), std::invalid_argument);
}

TEST(GradCheck, RiddersAvoidsANearbyKink) {
  // relu(w - 0.02) at w = 0: the kink lies inside a 0.1 step but the slope
  // at w is exactly 0.
  const ParameterList params{{"w", {1, 1}, std::make_shared<std::vector<double>>(std::vector<double>{0.0})}};
  auto f = [](std::span<const Tensor> w) { return sum(relu(shift(w[0], -0.02))); };
  GradCheckOptions opt;
  opt.ridders = true;
  opt.step = 1e-3;
  const GradCheckReport r = grad_check(f, params, opt);
  EXPECT_EQ(r.probes[0].analytic, 0.0);
  EXPECT_LT(std::abs(r.probes[0].numeric), 1e-12);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  ParameterList params{make_param("w", {2, 3}, 41)};
  const std::vector<double> before = *params[0].values;
  AdamState state = make_adam_state(params);
  adam_step(params, {std::vector<double>(6, 0.0)}, state);
  EXPECT_EQ(*params[0].values, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  ParameterList params{{"p", {1, 2}, std::make_shared<std::vector<double>>(std::vector<double>{0.0, 0.0})}};
  AdamState state = make_adam_state(params, {1e-3});
  adam_step(params, {{0.37, -5.0}}, state);
  EXPECT_NEAR((*params[0].values)[0], -1e-3, 1e-10);
  EXPECT_NEAR((*params[0].values)[1], 1e-3, 1e-10);
}

TEST(Adam, ThreeStepTrajectoryOnSquare) {
  ParameterList params{{"p", {1, 1}, std::make_shared<std::vector<double>>(std::vector<double>{1.0})}};
  AdamState state = make_adam_state(params, {0.1});
  const double expected[] = {0.90000000049999995, 0.80041222869179285, 0.70158627294603026};
  for (double e : expected) {
    const double p = (*params[0].values)[0];
    adam_step(params, {{2.0 * p}}, state);
    EXPECT_NEAR((*params[0].values)[0], e, 1e-15);
    for (double v : state.v[0]) EXPECT_GE(v, 0.0);
  }
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, NonFiniteGradientRejectedWithName) {
  ParameterList params{make_param("enc.tap", {1, 2}, 51)};
  const std::vector<double> before = *params[0].values;
  AdamState state = make_adam_state(params);
  try {
    adam_step(params, {{1.0, std::nan("")}}, state);
    FAIL() << "expected throw";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("enc.tap"), std::string::npos);
  }
  EXPECT_EQ(*params[0].values, before);
  EXPECT_EQ(state.step, 0u);
}

TEST(Adam, DeterministicAndShapeChecked) {
  ParameterList a{make_param("w", {2, 2}, 61)};
  ParameterList b = clone(a);
  AdamState sa = make_adam_state(a), sb = make_adam_state(b);
  const GradientList g{random_values(4, 62)};
  adam_step(a, g, sa);
  adam_step(b, g, sb);
  EXPECT_EQ(*a[0].values, *b[0].values);
  EXPECT_EQ(sa.m, sb.m);
  EXPECT_THROW(adam_step(a, {std::vector<double>(3, 0.0)}, sa), std::invalid_argument);
}

}  // namespace
}  // namespace isac::ad
