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

#include "gdino/backbone.hpp"
#include "gdino/enhancer.hpp"
#include "test_models.hpp"

namespace gdino {
namespace {

using testing::random_tensor;
using testing::tiny_model;

// Random image and text streams for a 64x64 input and an 8-token prompt whose
// last two tokens are padding.
struct Streams {
  std::vector<LevelShape> levels = pyramid_shapes(64, 64);
  Tensor<float> image, text, pos;
  Mask valid{1, 1, 1, 1, 1, 1, 0, 0};
  Mask pairs;

  explicit Streams(std::uint64_t seed, int d) {
    Rng rng(seed);
    image = random_tensor<float>(rng, {85, d});
    text = random_tensor<float>(rng, {8, d});
    for (std::int64_t j = 0; j < 2 * d; ++j) text.data[static_cast<std::size_t>(6 * d + j)] = 0.0f;
    pos = sine_position_embedding<float>(levels, d);
    // Phrases {0, 1}, {3, 4}; separators at 2 and 5.
    const int phrase[8] = {0, 0, -1, 1, 1, -1, -1, -1};
    pairs.assign(64, 0);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        pairs[static_cast<std::size_t>(i * 8 + j)] = i == j || (phrase[i] >= 0 && phrase[i] == phrase[j]);
  }

  EnhancerContext<float> context(Graph<float>& g, bool fusion = true) const {
    EnhancerContext<float> ctx;
    ctx.levels = levels;
    ctx.pos = g.constant(pos);
    ctx.centers = token_centers<float>(levels);
    ctx.text_valid = valid;
    ctx.text_pairs = pairs;
    ctx.fusion = fusion;
    return ctx;
  }
};

std::pair<Tensor<float>, Tensor<float>> run(const FeatureEnhancer<float>& enh, const Streams& s, bool fusion = true) {
  Graph<float> g;
  const auto ctx = s.context(g, fusion);
  auto [img, txt] = enh.forward(g, g.constant(s.image), g.constant(s.text), ctx);
  return {img.tensor(), txt.tensor()};
}

TEST(Enhancer, ZeroedOutputProjectionsGiveIdentity) {
  ParamStore<float> store;
  Rng rng(3);
  const ModelConfig cfg = tiny_model();
  FeatureEnhancer<float> enh(store, cfg, rng);
  testing::zero_params(store, {".out.weight", ".out.bias", ".down.weight", ".down.bias"});
  const Streams s(4, cfg.d_model);
  const auto [img, txt] = run(enh, s);
  EXPECT_EQ(img.data, s.image.data);
  EXPECT_EQ(txt.data, s.text.data);
}

TEST(Enhancer, NoLayersIsIdentity) {
  ParamStore<float> store;
  Rng rng(3);
  ModelConfig cfg = tiny_model();
  cfg.enhancer_layers = 0;
  FeatureEnhancer<float> enh(store, cfg, rng);
  EXPECT_EQ(store.size(), 0);
  const Streams s(4, cfg.d_model);
  const auto [img, txt] = run(enh, s);
  EXPECT_EQ(img.data, s.image.data);
  EXPECT_EQ(txt.data, s.text.data);
}

TEST(Enhancer, PaddedTokensHaveNoInfluence) {
  ParamStore<float> store;
  Rng rng(5);
  const ModelConfig cfg = tiny_model();
  FeatureEnhancer<float> enh(store, cfg, rng);
  Streams s(6, cfg.d_model);
  const auto [img, txt] = run(enh, s);
  Rng noise(7);
  for (std::int64_t j = 6 * cfg.d_model; j < 8 * cfg.d_model; ++j) s.text.data[static_cast<std::size_t>(j)] =
      static_cast<float>(noise.normal());
  const auto [img2, txt2] = run(enh, s);
  EXPECT_EQ(img.data, img2.data);
  for (std::int64_t j = 0; j < 6 * cfg.d_model; ++j) EXPECT_EQ(txt.data[j], txt2.data[j]);
  for (std::int64_t j = 6 * cfg.d_model; j < 8 * cfg.d_model; ++j) EXPECT_EQ(txt2.data[j], 0.0f);
}

TEST(Enhancer, FusionSwitchControlsCrossModalFlow) {
  ParamStore<float> store;
  Rng rng(8);
  const ModelConfig cfg = tiny_model();
  FeatureEnhancer<float> enh(store, cfg, rng);
  Streams s(9, cfg.d_model);
  const auto fused = run(enh, s).first;
  const auto unfused = run(enh, s, false).first;
  s.text.data[0] += 1.0f;  // a real token
  EXPECT_NE(run(enh, s).first.data, fused.data);
  EXPECT_EQ(run(enh, s, false).first.data, unfused.data);
}

TEST(Enhancer, DeformableTextToImageVariant) {
  ParamStore<float> store;
  Rng rng(10);
  ModelConfig cfg = tiny_model();
  cfg.deformable_text_to_image = true;
  FeatureEnhancer<float> enh(store, cfg, rng);
  EXPECT_GE(store.find("enhancer.layer0.txt_from_img.offsets.weight"), 0);
  const Streams s(11, cfg.d_model);
  const auto [img, txt] = run(enh, s);
  EXPECT_EQ(img.shape, (Shape{85, cfg.d_model}));
  EXPECT_EQ(txt.shape, (Shape{8, cfg.d_model}));
}

TEST(Enhancer, ParameterNamesArePerLayer) {
  ParamStore<float> store;
  Rng rng(12);
  FeatureEnhancer<float> enh(store, tiny_model(), rng);
  EXPECT_EQ(enh.layers().size(), 2u);
  EXPECT_GE(store.find("enhancer.layer1.img_from_txt.q.weight"), 0);
  EXPECT_GE(store.find("enhancer.layer1.txt_from_img.q.weight"), 0);
  EXPECT_EQ(store.find("enhancer.layer2.img_from_txt.q.weight"), -1);
}

}  // namespace
}  // namespace gdino
