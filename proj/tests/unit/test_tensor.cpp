// Copyright 2026 The gdino Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gdino/ops.hpp"
#include "gdino/params.hpp"
#include "gdino/rng.hpp"

namespace gdino {
namespace {

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor<float>(Shape{2, 3}, std::vector<float>(5)), ShapeError);
  Tensor<float> t(Shape{2, 3});
  EXPECT_EQ(t.size(), 6);
  EXPECT_EQ(t.dim(-1), 3);
}

TEST(Graph, RejectsNonFiniteValues) {
  Graph<float> g;
  Var<float> x = g.constant(Tensor<float>(Shape{2}, {0.0f, 1.0f}));
  EXPECT_THROW(log(x), NonFiniteError);
  Var<float> y = g.constant(Tensor<float>(Shape{1}, {100.0f}));
  EXPECT_THROW(exp(y), NonFiniteError);
}

TEST(Graph, BackwardOfSimpleExpression) {
  // f(x) = sum(x * x + 3x) -> df/dx = 2x + 3
  Graph<double> g;
  Var<double> x = g.variable(Tensor<double>(Shape{3}, {1.0, -2.0, 0.5}));
  Var<double> y = sum(add(mul(x, x), scale(x, 3.0)));
  g.backward(y);
  const auto gx = g.grad(x);
  EXPECT_DOUBLE_EQ(gx[0], 5.0);
  EXPECT_DOUBLE_EQ(gx[1], -1.0);
  EXPECT_DOUBLE_EQ(gx[2], 4.0);
}

TEST(Graph, ParamsReturnGradientsEvenWhenUnreached) {
  ParamStore<double> store;
  const int a = store.add("a", Tensor<double>(Shape{2}, {1.0, 2.0}));
  const int b = store.add("b", Tensor<double>(Shape{1}, {7.0}));
  Graph<double> g;
  Var<double> pa = g.param(store, a);
  g.param(store, b);
  EXPECT_EQ(g.param(store, a).id(), pa.id());
  const auto grads = g.backward(sum(scale(pa, 2.0)));
  ASSERT_EQ(grads.size(), 2u);
  EXPECT_EQ(grads.at(a).data, (std::vector<double>{2.0, 2.0}));
  EXPECT_EQ(grads.at(b).data, (std::vector<double>{0.0}));
}

TEST(Graph, DetachBlocksGradient) {
  Graph<double> g;
  Var<double> x = g.variable(Tensor<double>(Shape{2}, {1.5, -0.5}));
  g.backward(sum(mul(detach(x), x)));
  // d/dx [stop(x) * x] = stop(x)
  const auto gx = g.grad(x);
  EXPECT_DOUBLE_EQ(gx[0], 1.5);
  EXPECT_DOUBLE_EQ(gx[1], -0.5);
}

TEST(Graph, InferenceModeRecordsNoBackward) {
  Graph<float> g;
  g.set_grad_enabled(false);
  Var<float> x = g.variable(Tensor<float>(Shape{2}, {1.0f, 2.0f}));
  Var<float> y = sum(mul(x, x));
  EXPECT_FLOAT_EQ(y.item(), 5.0f);
  EXPECT_FALSE(static_cast<bool>(g.node(y.id()).backward));
}

TEST(Ops, ShapeMismatchThrows) {
  Graph<float> g;
  Var<float> a = g.constant(Tensor<float>(Shape{2, 3}));
  Var<float> b = g.constant(Tensor<float>(Shape{3, 2}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(matmul(a, a), ShapeError);
  EXPECT_NO_THROW(matmul(a, b));
}

TEST(Ops, MaskedSoftmaxZeroesBlockedEntriesAndEmptyRows) {
  Graph<float> g;
  Var<float> x = g.constant(Tensor<float>(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
  const Mask m{1, 0, 1, 0, 0, 0};
  const auto y = masked_softmax(x, m).tensor();
  EXPECT_EQ(y.data[1], 0.0f);
  EXPECT_NEAR(y.data[0] + y.data[2], 1.0f, 1e-6f);
  for (int j = 3; j < 6; ++j) EXPECT_EQ(y.data[j], 0.0f);
}

TEST(Ops, MatmulMatchesHandResult) {
  Graph<float> g;
  Var<float> a = g.constant(Tensor<float>(Shape{2, 2}, {1, 2, 3, 4}));
  Var<float> b = g.constant(Tensor<float>(Shape{2, 2}, {5, 6, 7, 8}));
  EXPECT_EQ(matmul(a, b).tensor().data, (std::vector<float>{19, 22, 43, 50}));
  // a * b^T
  EXPECT_EQ(matmul_nt(a, b).tensor().data, (std::vector<float>{17, 23, 39, 53}));
}

TEST(Ops, MatmulRowIsIndependentOfOtherRows) {
  // A row's result must not depend on how many rows share the call.
  Rng rng(3);
  Tensor<float> a(Shape{7, 33}), b(Shape{33, 19});
  for (auto& v : a.data) v = static_cast<float>(rng.normal());
  for (auto& v : b.data) v = static_cast<float>(rng.normal());
  Graph<float> g;
  const auto full = matmul(g.constant(a), g.constant(b)).tensor();
  for (std::int64_t r = 0; r < 7; ++r) {
    Tensor<float> row(Shape{1, 33}, std::vector<float>(a.data.begin() + r * 33, a.data.begin() + (r + 1) * 33));
    const auto one = matmul(g.constant(row), g.constant(b)).tensor();
    for (std::int64_t c = 0; c < 19; ++c) EXPECT_EQ(one.data[c], full.at(r, c));
  }
}

TEST(Ops, ConvOutputShape) {
  Graph<float> g;
  Var<float> x = g.constant(Tensor<float>(Shape{64, 64, 3}));
  Var<float> w = g.constant(Tensor<float>(Shape{4 * 4 * 3, 8}));
  EXPECT_EQ(conv2d(x, w, Var<float>{}, 4, 4, 0).shape(), (Shape{16, 16, 8}));
  Var<float> w3 = g.constant(Tensor<float>(Shape{3 * 3 * 3, 8}));
  EXPECT_EQ(conv2d(x, w3, Var<float>{}, 3, 2, 1).shape(), (Shape{32, 32, 8}));
}

}  // namespace
}  // namespace gdino
