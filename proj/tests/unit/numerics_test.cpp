#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kdial/numerics/gradcheck.hpp"
#include "kdial/numerics/graph.hpp"
#include "kdial/numerics/kernels.hpp"

using namespace kdial::numerics;
using kdial::Error;
using kdial::ShapeError;
using kdial::ValidationError;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

TEST(Evaluate, MatmulByHand) {
  Graph<double> g;
  auto a = g.input("a");
  auto b = g.input("b");
  g.mark_output("c", g.matmul(a, b));
  auto out = g.evaluate({{"a", Tensor<double>::matrix(2, 2, {1, 2, 3, 4})}, {"b", Tensor<double>::matrix(2, 1, {1, 1})}});
  EXPECT_EQ(out["c"].shape(), (Shape{2, 1}));
  EXPECT_EQ(out["c"][0], 3.0);
  EXPECT_EQ(out["c"][1], 7.0);
}

TEST(Evaluate, SoftmaxOfEqualLogitsIsUniform) {
  Graph<double> g;
  g.mark_output("p", g.softmax(g.constant(Tensor<double>({2}, {0.0, 0.0}))));
  auto out = g.evaluate({});
  EXPECT_DOUBLE_EQ(out["p"][0], 0.5);
  EXPECT_DOUBLE_EQ(out["p"][1], 0.5);
}

TEST(Evaluate, LayerNormMatchesHandOracle) {
  // mean 3, biased variance 1: (x - 3) / sqrt(1 + 1e-5)
  const double inv = 1.0 / std::sqrt(1.0 + 1e-5);
  Graph<double> g;
  auto x = g.constant(Tensor<double>::matrix(1, 2, {2, 4}));
  auto gain = g.constant(Tensor<double>({2}, {1, 1}));
  auto bias = g.constant(Tensor<double>({2}, {0, 0}));
  g.mark_output("y", g.layer_norm(x, gain, bias, 1e-5));
  auto out = g.evaluate({});
  EXPECT_NEAR(out["y"][0], -1.0, 1e-4);
  EXPECT_NEAR(out["y"][1], 1.0, 1e-4);
  EXPECT_NEAR(out["y"][0], -inv, 1e-15);
}

TEST(Evaluate, MaskedSoftmaxGivesExactZeros) {
  const double inf = std::numeric_limits<double>::infinity();
  Graph<double> g;
  auto x = g.constant(Tensor<double>::matrix(2, 3, {1, 2, 3, 0.5, -1, 4}));
  auto mask = g.constant(Tensor<double>::matrix(2, 3, {0, -inf, 0, 0, 0, -inf}));
  g.mark_output("p", g.softmax(x, mask));
  auto p = g.evaluate({})["p"];
  EXPECT_EQ(p.at(0, 1), 0.0);
  EXPECT_EQ(p.at(1, 2), 0.0);
  EXPECT_NEAR(p.at(0, 0) + p.at(0, 2), 1.0, 1e-15);
}

TEST(Evaluate, ShapeMismatchNamesNode) {
  Graph<double> g;
  auto a = g.input("a");
  auto b = g.input("b");
  auto c = g.matmul(a, b);
  g.mark_output("c", c);
  try {
    g.evaluate({{"a", Tensor<double>({2, 3})}, {"b", Tensor<double>({2, 3})}});
    FAIL() << "expected shape error";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("node " + std::to_string(c)), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
}

TEST(Evaluate, UnboundInputIsAnError) {
  Graph<double> g;
  g.mark_output("x", g.input("x"));
  EXPECT_THROW(g.evaluate({}), ShapeError);
}

TEST(Evaluate, DebugModeReportsNonFiniteNode) {
  Graph<double> g;
  auto x = g.input("x");
  auto y = g.multiply(x, x);
  g.mark_output("y", y);
  g.set_debug_checks(true);
  try {
    g.evaluate({{"x", Tensor<double>({1}, {1e300})}});
    FAIL() << "expected non-finite error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("node " + std::to_string(y)), std::string::npos) << e.what();
  }
}

TEST(Evaluate, IsReferentiallyTransparent) {
  std::mt19937_64 rng(3);
  ParameterSet<double> params;
  params.add("w", random_tensor({4, 5}, rng));
  Graph<double> g(&params);
  auto x = g.input("x");
  auto y = g.softmax(g.gelu(g.matmul(x, g.parameter("w"))));
  g.mark_output("y", y);
  const auto xv = random_tensor({3, 4}, rng);
  auto first = g.evaluate({{"x", xv}})["y"];
  auto second = g.evaluate({{"x", xv}})["y"];
  EXPECT_EQ(first, second);
}

TEST(Backward, LinearSumGradientIsInput) {
  ParameterSet<double> params;
  params.add("w", Tensor<double>({3}, {0.3, -0.2, 0.9}));
  Graph<double> g(&params);
  auto x = g.constant(Tensor<double>({3}, {1, 2, 3}));
  auto loss = g.sum(g.multiply(g.parameter("w"), x));
  g.evaluate({});
  auto grads = g.backward(loss);
  EXPECT_EQ(grads["w"].storage(), (std::vector<double>{1, 2, 3}));
}

TEST(Backward, SoftmaxNllGradientByHand) {
  // d/dz [-log softmax(z)_0] = softmax(z) - onehot(0) = [0.5 - 1, 0.5]
  ParameterSet<double> params;
  params.add("logits", Tensor<double>::matrix(1, 2, {0, 0}));
  Graph<double> g(&params);
  auto loss = g.cross_entropy(g.parameter("logits"), {0}, {1});
  auto out = g.evaluate({});
  EXPECT_NEAR(g.value(loss).item(), std::log(2.0), 1e-15);
  auto grads = g.backward(loss);
  EXPECT_DOUBLE_EQ(grads["logits"][0], -0.5);
  EXPECT_DOUBLE_EQ(grads["logits"][1], 0.5);
}

TEST(Backward, UnusedParameterGetsZeroGradient) {
  ParameterSet<double> params;
  params.add("used", Tensor<double>({2}, {1, 2}));
  params.add("unused", Tensor<double>({2, 2}, {5, 6, 7, 8}));
  Graph<double> g(&params);
  auto loss = g.sum(g.multiply(g.parameter("used"), g.parameter("used")));
  g.evaluate({});
  auto grads = g.backward(loss);
  ASSERT_EQ(grads.count("unused"), 1u);
  EXPECT_EQ(grads["unused"].shape(), (Shape{2, 2}));
  for (double v : grads["unused"].data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(grads["used"].storage(), (std::vector<double>{2, 4}));
}

TEST(Backward, NonScalarLossIsRejected) {
  ParameterSet<double> params;
  params.add("w", Tensor<double>({2}, {1, 2}));
  Graph<double> g(&params);
  auto y = g.scale(g.parameter("w"), 2.0);
  g.evaluate({});
  EXPECT_THROW(g.backward(y), ShapeError);
}

TEST(Backward, CrossEntropyRequiresAMaskedTarget) {
  Graph<double> g;
  g.cross_entropy(g.constant(Tensor<double>::matrix(2, 2, {0, 0, 0, 0})), {0, 1}, {0, 0});
  EXPECT_THROW(g.evaluate({}), ValidationError);
}

TEST(GradCheck, QuadraticLossIsExact) {
  ParameterSet<double> params;
  params.add("w", Tensor<double>({4}, {0.5, -1.5, 2.0, 0.25}));
  Graph<double> g(&params);
  auto w = g.parameter("w");
  auto loss = g.sum(g.multiply(w, w));
  g.evaluate({});
  EXPECT_LT(finite_difference_check(g, loss, 1e-5), 1e-6);
}

TEST(GradCheck, ConstantLossHasZeroError) {
  ParameterSet<double> params;
  params.add("w", Tensor<double>({3}, {1, 2, 3}));
  Graph<double> g(&params);
  g.parameter("w");
  auto loss = g.sum(g.constant(Tensor<double>({2}, {4, 5})));
  g.evaluate({});
  EXPECT_EQ(finite_difference_check(g, loss, 1e-5), 0.0);
}

TEST(GradCheck, RejectsEpsilonOutsideRange) {
  ParameterSet<double> params;
  params.add("w", Tensor<double>({1}, {1}));
  Graph<double> g(&params);
  auto loss = g.sum(g.parameter("w"));
  g.evaluate({});
  EXPECT_THROW(finite_difference_check(g, loss, 1e-2), ValidationError);
  EXPECT_THROW(finite_difference_check(g, loss, 1e-9), ValidationError);
}

// Property: every differentiable op passes the central-difference oracle on
// random small graphs.
TEST(GradCheck, EveryOpOnRandomGraphs) {
  const double inf = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t rows = 2 + seed % 3;
    const std::size_t width = 4;
    ParameterSet<double> params;
    params.add("table", random_tensor({7, width}, rng));
    params.add("w", random_tensor({width, 2 * width}, rng, 0.5));
    params.add("b", random_tensor({2 * width}, rng, 0.1));
    params.add("gain", random_tensor({2 * width}, rng, 0.3));
    params.add("shift", random_tensor({2 * width}, rng, 0.3));
    params.add("m", random_tensor({rows, 2 * width}, rng));
    params.add("out", random_tensor({width, 5}, rng));

    Graph<double> g(&params);
    std::vector<std::int32_t> ids;
    for (std::size_t i = 0; i < rows; ++i) ids.push_back(static_cast<std::int32_t>(rng() % 7));
    auto x = g.embedding(g.parameter("table"), ids);
    auto h = g.add(g.matmul(x, g.parameter("w")), g.parameter("b"));
    h = g.layer_norm(h, g.parameter("gain"), g.parameter("shift"), 1e-5);
    h = g.multiply(g.gelu(h), g.parameter("m"));
    auto left = g.slice_cols(h, 0, width);
    auto right = g.slice_cols(h, width, width);
    std::vector<double> pos;
    for (std::size_t i = 0; i < rows; ++i) pos.push_back(static_cast<double>(i * 3 + seed));
    auto q = g.rope(left, pos, 100.0);
    auto k = g.rope(right, pos, 100.0);
    Tensor<double> mask({rows, rows});
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < rows; ++j) mask.at(i, j) = j <= i ? 0.0 : -inf;
    auto att = g.softmax(g.scale(g.matmul(q, g.transpose(k)), 0.5), g.constant(mask));
    auto mixed = g.matmul(att, right);
    auto joined = g.concat_cols({mixed, q});
    auto flat = g.reshape(joined, {rows * 2, width});
    auto logits = g.matmul(flat, g.parameter("out"));
    std::vector<std::int32_t> targets;
    std::vector<std::uint8_t> tmask;
    for (std::size_t i = 0; i < rows * 2; ++i) {
      targets.push_back(static_cast<std::int32_t>(rng() % 5));
      tmask.push_back(i % 3 != 1);
    }
    auto loss = g.add(g.cross_entropy(logits, targets, tmask), g.scale(g.sum(g.dropout(x, 0.0, seed)), 0.01));
    g.evaluate({});
    const auto report = finite_difference_report(g, loss, 1e-5);
    EXPECT_LT(report.max_relative_error, 1e-4)
        << "seed " << seed << " worst " << report.worst_parameter << "[" << report.worst_index
        << "] analytic=" << report.analytic << " numeric=" << report.numeric;
  }
}

TEST(Properties, SoftmaxRowsAreDistributions) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Graph<double> g;
    auto p = g.softmax(g.constant(random_tensor({3, 9}, rng, 10.0)));
    g.evaluate({});
    const auto& v = g.value(p);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (double x : v.row(r)) {
        EXPECT_GE(x, 0.0);
        s += x;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Dropout, IsIdentityOutsideTrainingAndScaledInside) {
  Graph<double> g;
  auto x = g.constant(Tensor<double>({1000}, 1.0));
  auto y = g.dropout(x, 0.5, 42);
  g.evaluate({});
  for (double v : g.value(y).data()) EXPECT_EQ(v, 1.0);
  g.set_training(true);
  g.evaluate({});
  std::size_t kept = 0;
  for (double v : g.value(y).data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_GT(kept, 400u);
  EXPECT_LT(kept, 600u);
}

TEST(Kernels, GemmTransposedOperands) {
  // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
  std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4);
  gemm<double>(a, b, c, 2, 2, 2, true, false, false);  // A^T B
  EXPECT_EQ(c, (std::vector<double>{26, 30, 38, 44}));
  gemm<double>(a, b, c, 2, 2, 2, false, true, false);  // A B^T
  EXPECT_EQ(c, (std::vector<double>{17, 23, 39, 53}));
}
