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

#include "gdino/optim.hpp"

namespace gdino {
namespace {

TEST(GradNorm, GlobalL2) {
  std::map<int, Tensor<float>> g;
  g.emplace(0, Tensor<float>(Shape{2}, {3, 0}));
  g.emplace(3, Tensor<float>(Shape{1}, {4}));
  EXPECT_DOUBLE_EQ(grad_norm(g), 5.0);
}

TEST(ClipGradNorm, ScalesOnlyAboveThreshold) {
  std::map<int, Tensor<float>> g;
  g.emplace(0, Tensor<float>(Shape{2}, {3, 4}));
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 10.0), 5.0);
  EXPECT_EQ(g[0].data, (std::vector<float>{3, 4}));
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 0.0), 5.0);
  EXPECT_EQ(g[0].data, (std::vector<float>{3, 4}));
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 0.1), 5.0);
  EXPECT_NEAR(grad_norm(g), 0.1, 1e-6);
  EXPECT_NEAR(g[0].data[0] / g[0].data[1], 0.75, 1e-6);
}

// Reference AdamW on one scalar, in double.
struct ScalarAdamW {
  double m = 0, v = 0, w;
  int t = 0;
  explicit ScalarAdamW(double w0) : w(w0) {}
  void step(double g, double lr, const OptimConfig& c) {
    ++t;
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mh = m / (1 - std::pow(c.beta1, t)), vh = v / (1 - std::pow(c.beta2, t));
    w = w - lr * c.weight_decay * w - lr * mh / (std::sqrt(vh) + c.eps);
  }
};

TEST(AdamW, MatchesScalarReference) {
  OptimConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  cfg.backbone_lr_mult = 0.25;
  ParamStore<float> store;
  const int a = store.add("head.weight", Tensor<float>(Shape{2}, {0.5f, -1.0f}));
  const int b = store.add("backbone.weight", Tensor<float>(Shape{1}, {2.0f}), ParamGroup::kImageBackbone);
  const int c = store.add("text.weight", Tensor<float>(Shape{1}, {1.0f}), ParamGroup::kTextBackbone);
  const int frozen = store.add("unused", Tensor<float>(Shape{1}, {7.0f}));
  AdamW opt(cfg, store);
  ScalarAdamW ra0(0.5), ra1(-1.0), rb(2.0), rc(1.0);
  const double grads[5][4] = {{0.1, -0.2, 0.3, 1.0}, {0.2, 0.0, -0.5, 0.1}, {-0.3, 0.4, 0.2, 2.0},
                              {1.0, 1.0, 1.0, -1.0}, {0.0, -0.1, 0.05, 0.5}};
  for (const auto& gr : grads) {
    std::map<int, Tensor<float>> g;
    g.emplace(a, Tensor<float>(Shape{2}, {static_cast<float>(gr[0]), static_cast<float>(gr[1])}));
    g.emplace(b, Tensor<float>(Shape{1}, {static_cast<float>(gr[2])}));
    g.emplace(c, Tensor<float>(Shape{1}, {static_cast<float>(gr[3])}));
    opt.step(store, g);
    ra0.step(static_cast<float>(gr[0]), cfg.lr, cfg);
    ra1.step(static_cast<float>(gr[1]), cfg.lr, cfg);
    rb.step(static_cast<float>(gr[2]), cfg.lr * 0.25, cfg);
    rc.step(static_cast<float>(gr[3]), cfg.lr * 0.25, cfg);
  }
  EXPECT_EQ(opt.steps_taken(), 5);
  EXPECT_NEAR(store[a].value[0], ra0.w, 1e-6);
  EXPECT_NEAR(store[a].value[1], ra1.w, 1e-6);
  EXPECT_NEAR(store[b].value[0], rb.w, 1e-6);
  EXPECT_NEAR(store[c].value[0], rc.w, 1e-6);
  EXPECT_EQ(store[frozen].value[0], 7.0f);
}

TEST(AdamW, LinearWarmup) {
  OptimConfig cfg;
  cfg.lr = 1.0;
  cfg.warmup_steps = 4;
  ParamStore<float> store;
  const AdamW opt(cfg, store);
  EXPECT_DOUBLE_EQ(opt.learning_rate(0), 0.25);
  EXPECT_DOUBLE_EQ(opt.learning_rate(3), 1.0);
  EXPECT_DOUBLE_EQ(opt.learning_rate(100), 1.0);
}

TEST(AdamW, RejectsMismatchedGradients) {
  OptimConfig cfg;
  ParamStore<float> store;
  const int a = store.add("w", Tensor<float>(Shape{2}));
  AdamW opt(cfg, store);
  std::map<int, Tensor<float>> g;
  g.emplace(a, Tensor<float>(Shape{3}));
  EXPECT_THROW(opt.step(store, g), ShapeError);
  store.add("late", Tensor<float>(Shape{1}));
  EXPECT_THROW(opt.step(store, {}), Error);
}

}  // namespace
}  // namespace gdino
