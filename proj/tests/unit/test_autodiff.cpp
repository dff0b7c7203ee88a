#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kdrank/autodiff/gradcheck.hpp"
#include "kdrank/autodiff/ops.hpp"
#include "kdrank/autodiff/tape.hpp"
#include "kdrank/error.hpp"
#include "kdrank/util/rng.hpp"

namespace kdrank {
namespace {

constexpr double kTol = 1e-6;

Tensor random(Shape shape, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  return normal_tensor(std::move(shape), stddev, rng);
}

// Reduces any output to a scalar with fixed random weights so every output
// element contributes a distinct gradient.
Var weighted_sum(Tape& t, const Var& y, std::uint64_t seed = 99) {
  return ops::dot(y, t.constant(random(y.shape(), seed)));
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_EQ(Tensor::matrix({{1, 2}, {3, 4}}).at(1, 0), 3.0);
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
}

TEST(Tape, SquareSumGradientIsTwiceInput) {
  Tape t;
  const Tensor x0 = Tensor::vector({1.5, -2.0, 0.25});
  const Var x = t.leaf(x0);
  const Var loss = ops::sum(ops::mul(x, x));
  t.backward(loss);
  const Tensor g = t.grad(x);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g[i], 2.0 * x0[i]);
}

TEST(Tape, BackwardOnlyOnceAndOnScalars) {
  Tape t;
  const Var x = t.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(t.backward(x), ShapeError);
  const Var s = ops::sum(x);
  t.backward(s);
  EXPECT_THROW(t.backward(s), Error);
}

TEST(Tape, InferenceModeRefusesBackward) {
  Tape t(Tape::Mode::kInference);
  const Var x = t.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_FALSE(x.requires_grad());
  EXPECT_THROW(t.backward(ops::sum(x)), Error);
}

TEST(Tape, NonFiniteValuesAreRejected) {
  Tape t;
  const Var x = t.leaf(Tensor::vector({-1.0}));
  EXPECT_THROW(ops::log(x), NonFiniteError);
  EXPECT_THROW(t.constant(Tensor::vector({std::nan("")})), NonFiniteError);
}

TEST(Tape, ParameterGradientsAccumulateAcrossUses) {
  ParameterSet params;
  params.add("w", Tensor::vector({3.0}));
  Tape t;
  const Var w = t.param(params, 0);
  EXPECT_EQ(t.param(params, 0).id(), w.id());
  t.backward(ops::sum(ops::add(ops::scale(w, 2.0), ops::scale(w, 5.0))));
  Gradients g(params.size());
  t.accumulate_param_grads(g);
  EXPECT_EQ(g[0][0], 7.0);
}

TEST(Tape, MixingTapesIsAnError) {
  Tape a, b;
  const Var x = a.leaf(Tensor::vector({1.0}));
  const Var y = b.leaf(Tensor::vector({1.0}));
  EXPECT_THROW(ops::add(x, y), Error);
}

TEST(Ops, ShapeErrorsAreReported) {
  Tape t;
  const Var a = t.leaf(random({2, 3}, 1));
  const Var b = t.leaf(random({2, 3}, 2));
  EXPECT_THROW(ops::matmul(a, b), ShapeError);
  EXPECT_THROW(ops::add(a, t.leaf(random({3, 2}, 3))), ShapeError);
  EXPECT_THROW(ops::slice_rows(a, 1, 2), ShapeError);
}

TEST(Ops, MaskedSoftmaxGivesExactZeros) {
  Tape t;
  const Var a = t.leaf(Tensor::matrix({{1.0, 2.0, 3.0}, {0.5, -1.0, 4.0}}));
  const std::vector<std::uint8_t> keep = {1, 0, 1};
  const Tensor p = ops::softmax(a, keep).value();
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(p.at(r, 1), 0.0);
    EXPECT_NEAR(p.at(r, 0) + p.at(r, 2), 1.0, 1e-15);
  }
  EXPECT_NEAR(p.at(0, 2), std::exp(3.0) / (std::exp(1.0) + std::exp(3.0)), 1e-15);
}

TEST(Ops, SoftplusIsStableForLargeInputs) {
  Tape t;
  const Tensor y = ops::softplus(t.leaf(Tensor::vector({800.0, -800.0, 0.0}))).value();
  EXPECT_EQ(y[0], 800.0);
  EXPECT_GE(y[1], 0.0);
  EXPECT_LT(y[1], 1e-300);
  EXPECT_NEAR(y[2], std::log(2.0), 1e-15);
}

TEST(Ops, CosineOfZeroRowIsZero) {
  Tape t;
  const Var a = t.leaf(Tensor::matrix({{0.0, 0.0}, {3.0, 4.0}}));
  const Var b = t.leaf(Tensor::matrix({{3.0, 4.0}}));
  const Var c = ops::cosine_matrix(a, b);
  EXPECT_EQ(c.value().at(0, 0), 0.0);
  EXPECT_NEAR(c.value().at(1, 0), 1.0, 1e-15);
  t.backward(ops::sum(c));
  const Tensor g = t.grad(a);
  EXPECT_EQ(g.at(0, 0), 0.0);
  EXPECT_EQ(g.at(0, 1), 0.0);
}

TEST(Ops, MaxAxisRoutesTiesToLowestIndex) {
  Tape t;
  const Var a = t.leaf(Tensor::matrix({{2.0, 2.0, 1.0}}));
  t.backward(ops::sum(ops::max_axis(a, 1)));
  const Tensor g = t.grad(a);
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 0.0);
}

TEST(Ops, GatherRowsAccumulatesRepeatedIndices) {
  Tape t;
  const Var table = t.leaf(random({4, 3}, 5));
  const std::vector<std::size_t> idx = {2, 0, 2};
  t.backward(ops::sum(ops::gather_rows(table, idx)));
  const Tensor g = t.grad(table);
  EXPECT_EQ(g.at(2, 1), 2.0);
  EXPECT_EQ(g.at(0, 1), 1.0);
  EXPECT_EQ(g.at(1, 1), 0.0);
  EXPECT_THROW(ops::gather_rows(table, std::vector<std::size_t>{4}), ShapeError);
}

struct OpCase {
  const char* name;
  Shape shape;
  TensorFunction fn;
  double stddev = 1.0;
};

class OpGradient : public ::testing::TestWithParam<int> {};

std::vector<OpCase> op_cases() {
  using namespace ops;
  auto other = [](Tape& t, Shape s, std::uint64_t seed) { return t.constant(random(std::move(s), seed)); };
  return {
      {"matmul_left", {3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, matmul(x, other(t, {4, 2}, 7))); }},
      {"matmul_right", {4, 2}, [=](Tape& t, const Var& x) { return weighted_sum(t, matmul(other(t, {3, 4}, 7), x)); }},
      {"matmul_bt_left", {3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, matmul_bt(x, other(t, {5, 4}, 8))); }},
      {"matmul_bt_right", {5, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, matmul_bt(other(t, {3, 4}, 8), x)); }},
      {"matmul_bt_self", {3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, matmul_bt(x, x)); }},
      {"transpose", {3, 2}, [=](Tape& t, const Var& x) { return weighted_sum(t, transpose(x)); }},
      {"add", {2, 3}, [=](Tape& t, const Var& x) { return weighted_sum(t, add(x, other(t, {2, 3}, 9))); }},
      {"add_row", {4}, [=](Tape& t, const Var& x) { return weighted_sum(t, add_row(other(t, {3, 4}, 9), x)); }},
      {"sub", {2, 3}, [=](Tape& t, const Var& x) { return weighted_sum(t, sub(other(t, {2, 3}, 9), x)); }},
      {"mul_self", {2, 3}, [=](Tape& t, const Var& x) { return weighted_sum(t, mul(x, x)); }},
      {"neg_scale_shift", {5}, [=](Tape& t, const Var& x) { return weighted_sum(t, add_scalar(scale(neg(x), 1.7), 0.3)); }},
      {"scale_by", {1}, [=](Tape& t, const Var& x) { return weighted_sum(t, scale_by(other(t, {2, 2}, 4), x)); }},
      {"exp", {6}, [=](Tape& t, const Var& x) { return weighted_sum(t, exp(x)); }, 0.5},
      {"log", {6}, [=](Tape& t, const Var& x) { return weighted_sum(t, log(add_scalar(square(x), 0.5))); }},
      {"sigmoid", {6}, [=](Tape& t, const Var& x) { return weighted_sum(t, sigmoid(x)); }},
      {"gelu", {6}, [=](Tape& t, const Var& x) { return weighted_sum(t, gelu(x)); }, 2.0},
      {"softplus", {6}, [=](Tape& t, const Var& x) { return weighted_sum(t, softplus(x)); }, 3.0},
      {"mean", {2, 3}, [=](Tape&, const Var& x) { return mean(square(x)); }},
      {"sum_axis0", {3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, sum_axis(x, 0)); }},
      {"sum_axis1", {3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, sum_axis(x, 1)); }},
      {"sum_axis_rank3", {2, 3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, sum_axis(x, 1)); }},
      {"max_axis", {3, 5}, [=](Tape& t, const Var& x) { return weighted_sum(t, max_axis(x, 1)); }},
      {"softmax", {3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, softmax(x)); }},
      {"softmax_masked", {2, 4},
       [=](Tape& t, const Var& x) {
         static const std::vector<std::uint8_t> keep = {1, 1, 0, 1};
         return weighted_sum(t, softmax(x, keep));
       }},
      {"layer_norm_input", {3, 5},
       [=](Tape& t, const Var& x) { return weighted_sum(t, layer_norm_rows(x, other(t, {5}, 2), other(t, {5}, 3))); }},
      {"layer_norm_gain", {5},
       [=](Tape& t, const Var& x) { return weighted_sum(t, layer_norm_rows(other(t, {3, 5}, 2), x, other(t, {5}, 3))); }},
      {"cosine_left", {3, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, cosine_matrix(x, other(t, {2, 4}, 6))); }},
      {"cosine_right", {2, 4}, [=](Tape& t, const Var& x) { return weighted_sum(t, cosine_matrix(other(t, {3, 4}, 6), x)); }},
      {"concat_rows", {2, 3},
       [=](Tape& t, const Var& x) {
         const Var parts[] = {x, other(t, {1, 3}, 5), x};
         return weighted_sum(t, concat_rows(parts));
       }},
      {"concat_cols", {2, 3},
       [=](Tape& t, const Var& x) {
         const Var parts[] = {x, other(t, {2, 1}, 5), x};
         return weighted_sum(t, concat_cols(parts));
       }},
      {"stack", {2},
       [=](Tape& t, const Var& x) {
         const Var parts[] = {sum(x), dot(x, x), sum(square(x))};
         return weighted_sum(t, stack(parts));
       }},
      {"slices", {4, 5},
       [=](Tape& t, const Var& x) { return weighted_sum(t, slice_cols(slice_rows(x, 1, 2), 2, 3)); }},
      {"gather_rows", {4, 3},
       [=](Tape& t, const Var& x) {
         static const std::vector<std::size_t> idx = {3, 1, 3, 0};
         return weighted_sum(t, gather_rows(x, idx));
       }},
      {"reshape", {2, 3}, [=](Tape& t, const Var& x) { return weighted_sum(t, reshape(x, Shape{3, 2})); }},
  };
}

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase c = op_cases()[static_cast<std::size_t>(GetParam())];
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Tensor x = random(c.shape, 1000 + seed, c.stddev);
    EXPECT_LT(finite_diff_check(c.fn, x), kTol) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range(0, static_cast<int>(op_cases().size())),
                         [](const ::testing::TestParamInfo<int>& info) {
                           return std::string(op_cases()[static_cast<std::size_t>(info.param)].name);
                         });

TEST(GradCheck, DetectsAWrongGradient) {
  // A primitive whose recorded gradient is deliberately doubled.
  const TensorFunction wrong = [](Tape& t, const Var& x) {
    Tensor y(Shape{}, 0.0);
    for (double v : x.value().data()) y[0] += v * v;
    return t.record("wrong", std::move(y), {x}, [x](Tape& tape, const Tensor& g) {
      Tensor& gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * 4.0 * x.value()[i];
    });
  };
  EXPECT_GT(finite_diff_check(wrong, Tensor::vector({1.0, -0.5})), 0.1);
  EXPECT_THROW(finite_diff_check(wrong, Tensor::vector({1.0}), 0.0), Error);
}

TEST(GradCheck, ParameterVariantRestoresValues) {
  ParameterSet params;
  params.add("w", Tensor::vector({0.3, -0.7, 1.1}));
  const Tensor before = params[0].value;
  const std::vector<std::size_t> coords = {0, 2};
  const double err = finite_diff_check(
      [&](Tape& t) { return ops::sum(ops::exp(t.param(params, 0))); }, params, 0, coords);
  EXPECT_LT(err, kTol);
  EXPECT_EQ(params[0].value, before);
}

}  // namespace
}  // namespace kdrank
