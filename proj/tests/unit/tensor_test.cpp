#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "structadapt/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace structadapt;
using namespace structadapt::ad;
using structadapt::test::gradcheck;
using structadapt::test::project;
using structadapt::test::random_tensor;

namespace {

constexpr double kTol = 1e-4;

#define EXPECT_GRAD_OK(report) \
  EXPECT_LE((report).max_rel_error, kTol) << (report).worst

}  // namespace

TEST(Tensor, SoftmaxOfZeros) {
  auto y = softmax_rows(Tensor::zeros(1, 2));
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.5);
}

TEST(Tensor, SoftmaxMaskGivesZeroProbability) {
  auto x = Tensor::from(1, 3, {1, 2, 3});
  std::vector<std::uint8_t> ok = {1, 0, 1};
  auto y = softmax_rows(x, &ok);
  EXPECT_EQ(y(0, 1), 0.0);
  EXPECT_NEAR(y(0, 0) + y(0, 2), 1.0, 1e-15);
}

TEST(Tensor, LayerNormOfConstantRowIsZero) {
  auto x = Tensor::from(1, 4, {3, 3, 3, 3});
  auto g = Tensor::from(1, 4, {1, 1, 1, 1});
  auto y = layer_norm(x, g, Tensor::zeros(1, 4));
  for (auto v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, MatmulMatchesHandProduct) {
  auto a = Tensor::from(2, 2, {1, 2, 3, 4});
  auto b = Tensor::from(2, 1, {5, 6});
  auto c = matmul(a, b);
  EXPECT_EQ(c(0, 0), 17.0);
  EXPECT_EQ(c(1, 0), 39.0);
  EXPECT_THROW(matmul(b, b), ShapeError);
}

TEST(Tensor, CrossEntropyOfUniformLogitsIsLogV) {
  auto logits = Tensor::zeros(3, 7);
  EXPECT_NEAR(cross_entropy(logits, {0, 3, 6}).item(), std::log(7.0), 1e-12);
  EXPECT_NEAR(cross_entropy(logits, {0, -100, 6}).item(), std::log(7.0), 1e-12);
}

TEST(Tensor, NoTapeWithoutGradients) {
  auto a = Tensor::from(1, 2, {1, 2});
  auto y = scale(a, 2);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, AdamWithZeroGradientLeavesParameters) {
  std::mt19937_64 rng(1);
  auto p = random_tensor(3, 4, rng);
  p.set_requires_grad(true);
  auto before = std::vector<Scalar>(p.data().begin(), p.data().end());
  Adam opt({p});
  p.grad();  // allocate a zero gradient
  opt.step(0.1);
  opt.step(0.1);
  EXPECT_EQ(std::vector<Scalar>(p.data().begin(), p.data().end()), before);
}

TEST(Tensor, AdamMovesAgainstGradient) {
  auto p = Tensor::from(1, 1, {1.0}, true);
  Adam opt({p});
  backward(scale(p, 3));
  opt.step(0.01);
  EXPECT_LT(p.item(), 1.0);
}

// Finite-difference checks on random 3x4 inputs.
class GradTest : public ::testing::Test {
 protected:
  std::mt19937_64 rng{2024};
  Tensor r(std::size_t rows, std::size_t cols) { return random_tensor(rows, cols, rng); }
};

TEST_F(GradTest, Matmul) {
  auto a = r(3, 4), b = r(4, 2);
  EXPECT_GRAD_OK(gradcheck([&] { return project(matmul(a, b)); }, {a, b}));
}

TEST_F(GradTest, MatmulNt) {
  auto a = r(3, 4), b = r(5, 4);
  EXPECT_GRAD_OK(gradcheck([&] { return project(matmul_nt(a, b)); }, {a, b}));
}

TEST_F(GradTest, AddAndAddRow) {
  auto a = r(3, 4), b = r(3, 4), row = r(1, 4);
  EXPECT_GRAD_OK(gradcheck([&] { return project(add(a, b)); }, {a, b}));
  EXPECT_GRAD_OK(gradcheck([&] { return project(add_row(a, row)); }, {a, row}));
}

TEST_F(GradTest, MultiplyAndScale) {
  auto a = r(3, 4), b = r(3, 4);
  EXPECT_GRAD_OK(gradcheck([&] { return project(multiply(a, b)); }, {a, b}));
  EXPECT_GRAD_OK(gradcheck([&] { return project(scale(a, -1.7)); }, {a}));
}

TEST_F(GradTest, ConcatAndSlice) {
  auto a = r(3, 4), b = r(2, 4), c = r(3, 2);
  EXPECT_GRAD_OK(gradcheck([&] { return project(concat_rows({a, b})); }, {a, b}));
  EXPECT_GRAD_OK(gradcheck([&] { return project(concat_cols({a, c})); }, {a, c}));
  EXPECT_GRAD_OK(gradcheck([&] { return project(slice_rows(a, 1, 2)); }, {a}));
  EXPECT_GRAD_OK(gradcheck([&] { return project(slice_cols(a, 1, 2)); }, {a}));
}

TEST_F(GradTest, ReshapeAndGather) {
  auto a = r(3, 4);
  EXPECT_GRAD_OK(gradcheck([&] { return project(reshape(a, 2, 6)); }, {a}));
  EXPECT_GRAD_OK(gradcheck([&] { return project(gather_rows(a, {2, 0, 2, 1})); }, {a}));
}

TEST_F(GradTest, Relu) {
  // Keep entries away from the kink so central differences are valid.
  auto a = r(3, 4);
  for (auto& v : a.data())
    if (std::abs(v) < 0.05) v = 0.5;
  EXPECT_GRAD_OK(gradcheck([&] { return project(relu(a)); }, {a}));
}

TEST_F(GradTest, Softmax) {
  auto a = r(3, 4);
  std::vector<std::uint8_t> ok = {1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 1, 1};
  EXPECT_GRAD_OK(gradcheck([&] { return project(softmax_rows(a)); }, {a}));
  EXPECT_GRAD_OK(gradcheck([&] { return project(softmax_rows(a, &ok)); }, {a}));
}

TEST_F(GradTest, LayerNorm) {
  auto a = r(3, 4), g = r(1, 4), b = r(1, 4);
  EXPECT_GRAD_OK(gradcheck([&] { return project(layer_norm(a, g, b)); }, {a, g, b}));
}

TEST_F(GradTest, CrossEntropy) {
  auto a = r(3, 4);
  EXPECT_GRAD_OK(gradcheck([&] { return cross_entropy(a, {1, -100, 3}); }, {a}));
}

TEST_F(GradTest, NeighborhoodAggregate) {
  auto a = r(3, 4);
  std::vector<WeightedEdge> edges = {{0, 1, 0.5}, {2, 1, 0.25}, {1, 0, 1.0}, {2, 2, -0.3}};
  EXPECT_GRAD_OK(gradcheck([&] { return project(neighborhood_aggregate(a, edges, 3)); }, {a}));
}

TEST_F(GradTest, SumAndComposition) {
  auto a = r(3, 4), w = r(2, 4);
  EXPECT_GRAD_OK(gradcheck([&] { return sum(softmax_rows(linear(a, w))); }, {a, w}));
  EXPECT_GRAD_OK(gradcheck([&] { return sum(multiply(a, a)); }, {a}));
}
