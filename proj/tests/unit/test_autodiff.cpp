#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/gradcheck.hpp"
#include "../support/op_cases.hpp"
#include "maeguard/autodiff/graph.hpp"
#include "maeguard/autodiff/ops.hpp"

using maeguard::ad::Graph;
using maeguard::ad::GradScope;
using maeguard::ad::Shape;
using maeguard::ad::ShapeError;
using maeguard::ad::Tensor;
namespace ad = maeguard::ad;
namespace mt = maeguard::testing;

TEST(Ops, SoftmaxOfUniformLogitsIsUniform) {
  Graph g(GradScope::kNone);
  auto y = ad::softmax(g, Tensor({3}, {0.0, 0.0, 0.0}));
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, LayerNormOfConstantVectorIsZero) {
  Graph g(GradScope::kNone);
  auto y = ad::layer_norm(g, Tensor::full({1, 6}, 4.25), Tensor::full({6}, 1.0),
                          Tensor::full({6}, 0.0));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Ops, MatmulMatchesTripleLoop) {
  std::mt19937_64 rng(11);
  auto a = mt::random_tensor({2, 3}, rng, 1.0, false);
  auto b = mt::random_tensor({3, 4}, rng, 1.0, false);
  Graph g(GradScope::kNone);
  auto c = ad::matmul(g, a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 4}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < 3; ++p) acc += a.values()[i * 3 + p] * b.values()[p * 4 + j];
      EXPECT_NEAR(c.values()[i * 4 + j], acc, 1e-14);
    }
  }
}

TEST(Ops, ShapeErrorsNameOperatorAndShapes) {
  Graph g;
  try {
    ad::matmul(g, Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("(2,3)"), std::string::npos);
    EXPECT_NE(msg.find("(4,5)"), std::string::npos);
  }
  EXPECT_THROW(ad::add(g, Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  EXPECT_THROW(ad::mul(g, Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
  EXPECT_THROW(ad::reshape(g, Tensor::zeros({2, 3}), {4}), ShapeError);
  EXPECT_THROW(ad::slice(g, Tensor::zeros({2, 3}), 1, 2, 2), ShapeError);
  EXPECT_THROW(ad::gather_rows(g, Tensor::zeros({2, 3}), std::vector<std::size_t>{2}), ShapeError);
  EXPECT_THROW(ad::transpose(g, Tensor::zeros({2, 3}), {0, 0}), ShapeError);
}

TEST(Ops, SoftmaxAndCrossEntropyRejectEmptyAxis) {
  Graph g;
  EXPECT_THROW(ad::softmax(g, Tensor::zeros({2, 0})), ShapeError);
  EXPECT_THROW(ad::cross_entropy(g, Tensor::zeros({2, 0}), std::vector<int>{0, 0}), ShapeError);
}

TEST(Backward, SquareAtThreeHasGradientSix) {
  Tensor x({1}, {3.0}, true);
  Graph g;
  g.backward(ad::sum(g, ad::mul(g, x, x)));
  ASSERT_TRUE(x.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SumHasAllOnesGradient) {
  Tensor x = Tensor::zeros({3, 4}, true);
  Graph g;
  g.backward(ad::sum(g, x));
  for (double v : x.grad()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor x = Tensor::zeros({3}, true);
  Graph g;
  auto y = ad::scale(g, x, 2.0);
  EXPECT_THROW(g.backward(y), ShapeError);
}

TEST(Backward, RepeatedBackwardIsAnError) {
  Tensor x = Tensor::zeros({3}, true);
  Graph g;
  auto loss = ad::sum(g, x);
  g.backward(loss);
  EXPECT_THROW(g.backward(loss), std::logic_error);
}

TEST(Backward, LossFromAnotherGraphIsRejected) {
  Tensor x = Tensor::zeros({3}, true);
  Graph g1, g2;
  auto loss = ad::sum(g1, x);
  EXPECT_THROW(g2.backward(loss), std::logic_error);
}

TEST(Backward, ThreeLayerMlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::vector<Tensor> inputs = {
      mt::random_tensor({5, 4}, rng),        mt::random_tensor({4, 6}, rng, 0.5),
      mt::random_tensor({6}, rng, 0.1),      mt::random_tensor({6, 6}, rng, 0.5),
      mt::random_tensor({6}, rng, 0.1),      mt::random_tensor({6, 3}, rng, 0.5),
  };
  const std::vector<int> labels = {0, 2, 1, 1, 0};
  auto fn = [labels](Graph& g, const std::vector<Tensor>& in) {
    auto h = ad::gelu(g, ad::add(g, ad::matmul(g, in[0], in[1]), in[2]));
    h = ad::gelu(g, ad::add(g, ad::matmul(g, h, in[3]), in[4]));
    return ad::cross_entropy(g, ad::matmul(g, h, in[5]), labels);
  };
  auto result = mt::grad_check(fn, inputs, 1e-5);
  EXPECT_LT(result.max_relative_error, 1e-4);
}

TEST(Backward, EveryOperatorMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (std::size_t draw = 0; draw < 5 * mt::kOpKinds; ++draw) {
    auto c = mt::make_op_case(draw, rng);
    auto result = mt::grad_check(c.fn, c.inputs, 1e-5);
    EXPECT_LT(result.max_relative_error, 1e-4) << c.name << " draw " << draw;
  }
}

TEST(Backward, GradientOfSumIsSumOfGradients) {
  std::mt19937_64 rng(41);
  auto x = mt::random_tensor({4, 3}, rng);
  auto w = mt::random_tensor({3, 3}, rng, 1.0, false);
  auto f1 = [&](Graph& g) { return ad::sum(g, ad::gelu(g, ad::matmul(g, x, w))); };
  auto f2 = [&](Graph& g) { return ad::sum(g, ad::softmax(g, x)); };
  Graph ga, gb, gc;
  auto g1 = ga.gradient(f1(ga), x);
  auto g2 = gb.gradient(f2(gb), x);
  auto both = gc.gradient(ad::add(gc, f1(gc), f2(gc)), x);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_NEAR(both.values()[i], g1.values()[i] + g2.values()[i], 1e-12);
  }
}

TEST(Backward, FanOutAccumulatesEveryUse) {
  // y = x * 2 is shared by k consumers; d(sum_k sum(y))/dx = 2k.
  for (std::size_t k = 1; k <= 5; ++k) {
    Tensor x = Tensor::full({3}, 1.5);
    x.set_requires_grad(true);
    Graph g;
    auto y = ad::scale(g, x, 2.0);
    auto total = ad::sum(g, y);
    for (std::size_t i = 1; i < k; ++i) total = ad::add(g, total, ad::sum(g, y));
    g.backward(total);
    for (double v : x.grad()) EXPECT_DOUBLE_EQ(v, 2.0 * static_cast<double>(k));
  }
}

TEST(Backward, LeafGradientsAccumulateAcrossGraphsUntilReset) {
  Tensor x({2}, {1.0, 2.0}, true);
  for (int pass = 0; pass < 2; ++pass) {
    Graph g;
    g.backward(ad::sum(g, x));
  }
  EXPECT_EQ(x.grad()[0], 2.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, ForwardIsDeterministic) {
  std::mt19937_64 rng(51);
  auto x = mt::random_tensor({8, 16}, rng, 1.0, false);
  auto w = mt::random_tensor({16, 16}, rng, 1.0, false);
  auto run = [&] {
    Graph g(GradScope::kNone);
    auto h = ad::layer_norm(g, ad::gelu(g, ad::matmul(g, x, w)), Tensor::full({16}, 1.0),
                            Tensor::full({16}, 0.0));
    auto y = ad::softmax(g, h);
    return std::vector<double>(y.values().begin(), y.values().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(GradWrtInput, MseAtTargetIsZero) {
  std::mt19937_64 rng(61);
  auto x = mt::random_tensor({3, 5}, rng);
  auto target = x.clone();
  Graph g;
  auto grad = g.gradient(ad::mse(g, x, target), x);
  for (double v : grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(GradWrtInput, SumOfTwiceInputIsAllTwos) {
  Tensor x = Tensor::zeros({2, 2}, true);
  Graph g;
  auto grad = g.gradient(ad::sum(g, ad::scale(g, x, 2.0)), x);
  for (double v : grad.values()) EXPECT_EQ(v, 2.0);
  EXPECT_FALSE(x.has_grad());
}

TEST(GradWrtInput, InputOutsideGraphIsAnError) {
  Tensor x = Tensor::zeros({2}, true);
  Tensor other = Tensor::zeros({2}, true);
  Graph g;
  auto loss = ad::sum(g, x);
  EXPECT_THROW(g.gradient(loss, other), std::logic_error);
}

TEST(GradWrtInput, InputsOnlyScopeLeavesParametersUntouched) {
  auto w = Tensor::parameter({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor x({1, 2}, {0.5, -1.0}, true);
  Graph g(GradScope::kInputsOnly);
  auto loss = ad::sum(g, ad::matmul(g, x, w));
  EXPECT_FALSE(g.tracks(w));
  auto grad = g.gradient(loss, x);
  EXPECT_DOUBLE_EQ(grad.values()[0], 3.0);
  EXPECT_DOUBLE_EQ(grad.values()[1], 7.0);
  EXPECT_FALSE(w.has_grad());
}

TEST(Graph, InferenceScopeRecordsNothing) {
  Tensor x = Tensor::zeros({2}, true);
  Graph g(GradScope::kNone);
  ad::sum(g, ad::scale(g, x, 3.0));
  EXPECT_EQ(g.size(), 0u);
}

TEST(Ops, WhereSelectsElementwise) {
  Graph g(GradScope::kNone);
  const std::vector<std::uint8_t> mask = {1, 0, 1};
  auto y = ad::where(g, mask, Tensor({3}, {1, 2, 3}), Tensor({3}, {-1, -2, -3}));
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
            (std::vector<double>{1, -2, 3}));
}
