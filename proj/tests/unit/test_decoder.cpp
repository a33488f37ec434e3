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

#include "gdino/model.hpp"
#include "test_models.hpp"

namespace gdino {
namespace {

using testing::random_tensor;
using testing::tiny_model;

struct DecoderFixture {
  ModelConfig cfg = tiny_model();
  ParamStore<float> store;
  Rng rng{21};
  CrossModalityDecoder<float> decoder{store, cfg, rng};
  std::vector<LevelShape> levels = pyramid_shapes(64, 64);
  Tensor<float> anchors, content, memory, text;
  Mask valid{1, 1, 1, 0};

  DecoderFixture() {
    Rng data(22);
    anchors = Tensor<float>(Shape{cfg.num_queries, 4});
    for (std::int64_t q = 0; q < cfg.num_queries; ++q) {
      anchors.at(q, 0) = static_cast<float>(data.uniform(0.1, 0.9));
      anchors.at(q, 1) = static_cast<float>(data.uniform(0.1, 0.9));
      anchors.at(q, 2) = static_cast<float>(data.uniform(0.05, 0.5));
      anchors.at(q, 3) = static_cast<float>(data.uniform(0.05, 0.5));
    }
    content = random_tensor<float>(data, {cfg.num_queries, cfg.d_model});
    memory = random_tensor<float>(data, {85, cfg.d_model});
    text = random_tensor<float>(data, {4, cfg.d_model});
  }

  std::vector<LayerPrediction<float>> run(Graph<float>& g, bool text_cross = true) const {
    DecoderInputs<float> in;
    in.anchors = anchors;
    in.content = g.constant(content);
    in.memory = g.constant(memory);
    in.levels = levels;
    in.text = g.constant(text);
    in.text_valid = valid;
    in.text_cross_attention = text_cross;
    return decoder.forward(g, in);
  }
};

TEST(RefineAnchors, ZeroDeltaKeepsAnchorsAndClampsLogits) {
  Graph<double> g;
  const Tensor<double> a(Shape{1, 4}, {0.3, 0.6, 0.2, 0.1});
  const auto same = refine_anchors(g, a, g.constant(Tensor<double>(Shape{1, 4}))).tensor();
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(same[c], a[c], 1e-12);
  const auto far = refine_anchors(g, a, g.constant(Tensor<double>::full(Shape{1, 4}, 100.0))).tensor();
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(far[c], 1.0 / (1.0 + std::exp(-8.0)), 1e-12);
}

TEST(Decoder, OnePredictionPerLayer) {
  DecoderFixture f;
  Graph<float> g;
  const auto preds = f.run(g);
  ASSERT_EQ(preds.size(), 2u);
  for (const auto& p : preds) {
    EXPECT_EQ(p.boxes.shape(), (Shape{f.cfg.num_queries, 4}));
    EXPECT_EQ(p.logits.shape(), (Shape{f.cfg.num_queries, 4}));
    EXPECT_FALSE(p.class_agnostic);
    for (float v : p.boxes.value()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
  }
  // Box heads start at zero, so the first layer returns its anchors.
  const auto b0 = preds[0].boxes.tensor();
  for (std::int64_t i = 0; i < b0.size(); ++i) EXPECT_NEAR(b0[i], f.anchors[i], 1e-5);
}

TEST(Decoder, ZeroedOutputProjectionsGiveIdentityLayer) {
  DecoderFixture f;
  testing::zero_params(f.store, {".out.weight", ".out.bias", ".down.weight", ".down.bias"});
  Graph<float> g;
  Var<float> x = g.constant(f.content);
  Var<float> qpos = g.constant(random_tensor<float>(f.rng, {f.cfg.num_queries, f.cfg.d_model}));
  DecoderInputs<float> in;
  in.anchors = f.anchors;
  in.memory = g.constant(f.memory);
  in.levels = f.levels;
  in.text = g.constant(f.text);
  in.text_valid = f.valid;
  EXPECT_EQ(f.decoder.layers()[0].forward(g, x, qpos, f.anchors, in).tensor().data, f.content.data);
}

TEST(Decoder, WithoutTextCrossAttentionBoxesIgnoreText) {
  DecoderFixture f;
  Graph<float> g;
  // Make the box heads non-trivial so text could show up in the boxes.
  for (auto& p : f.store.all())
    if (p.name.find("box_head") != std::string::npos)
      for (auto& v : p.value.data) v = static_cast<float>(0.05 * f.rng.normal());
  const auto a = f.run(g, false).back().boxes.tensor();
  const auto b_with = f.run(g, true).back().boxes.tensor();
  f.text.data[0] += 1.0f;
  EXPECT_EQ(f.run(g, false).back().boxes.tensor().data, a.data);
  EXPECT_NE(f.run(g, true).back().boxes.tensor().data, b_with.data);
}

TEST(Decoder, ClassifyIsScaledDotProductPlusBias) {
  DecoderFixture f;
  Graph<double> g;
  ParamStore<double> store;
  Rng rng(4);
  CrossModalityDecoder<double> dec(store, f.cfg, rng);
  Rng data(5);
  const auto q = random_tensor<double>(data, {3, f.cfg.d_model});
  const auto t = random_tensor<double>(data, {2, f.cfg.d_model});
  const auto logits = dec.classify(g, g.constant(q), g.constant(t)).tensor();
  const auto proj = dec.class_projection()(g, g.constant(q)).tensor();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double dot = 0;
      for (int c = 0; c < f.cfg.d_model; ++c) dot += proj.at(i, c) * t.at(j, c);
      EXPECT_NEAR(logits.at(i, j), dot / std::sqrt(32.0) + kInitialLogitBias, 1e-12);
    }
  EXPECT_EQ(store[dec.logit_bias_id()].value[0], kInitialLogitBias);
}

TEST(QuerySelector, AnchorsAndShapes) {
  const ModelConfig cfg = tiny_model();
  ParamStore<float> store;
  Rng rng(31);
  ImageBackbone<float> bb(store, cfg, rng);
  QuerySelector<float> sel(store, cfg, rng);
  Graph<float> g;
  Rng data(32);
  const auto pyr = bb.forward(g, random_tensor<float>(data, {64, 64, 3}));
  Var<float> text = g.constant(random_tensor<float>(data, {5, cfg.d_model}));
  const Mask valid{1, 1, 1, 1, 0};
  for (bool stat : {false, true}) {
    const auto qs = sel.forward(g, pyr, pyr.flat, text, valid, stat);
    EXPECT_EQ(qs.selection.indices.size(), static_cast<std::size_t>(cfg.num_queries));
    auto idx = qs.selection.indices;
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
    EXPECT_EQ(qs.enc_class_agnostic, stat);
    EXPECT_EQ(qs.enc_logits.shape(), (Shape{cfg.num_queries, stat ? 1 : 5}));
    EXPECT_EQ(qs.anchors.data, qs.enc_boxes.tensor().data);
    EXPECT_EQ(qs.content.shape(), (Shape{cfg.num_queries, cfg.d_model}));
    // Zero-initialized box head: encoder boxes equal the priors.
    for (std::int64_t i = 0; i < qs.prior.size(); ++i) EXPECT_NEAR(qs.anchors[i], qs.prior[i], 1e-5);
  }
}

TEST(QuerySelector, PriorsFollowTokenGeometry) {
  const auto levels = pyramid_shapes(64, 64);
  FeaturePyramid<double> pyr;
  pyr.levels = levels;
  pyr.strides = {8, 16, 32, 64};
  pyr.image_height = pyr.image_width = 64;
  for (int l = 0; l < 4; ++l)
    for (int r = 0; r < levels[static_cast<std::size_t>(l)].height; ++r)
      for (int c = 0; c < levels[static_cast<std::size_t>(l)].width; ++c) pyr.location.push_back({l, r, c});
  const std::int64_t idx[] = {0, 84, 65};
  const auto p = anchor_priors(pyr, idx);
  EXPECT_DOUBLE_EQ(p.at(0, 0), 0.0625);
  EXPECT_DOUBLE_EQ(p.at(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(p.at(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.at(1, 2), 0.9);  // 2 * 64 / 64 clamped
  EXPECT_DOUBLE_EQ(p.at(2, 0), 0.375);
  EXPECT_DOUBLE_EQ(p.at(2, 3), 0.5);
}

TEST(GroundingModel, ForwardProducesEncoderAndDecoderPredictions) {
  const ModelConfig cfg = tiny_model();
  const auto vocab = text::Vocabulary::builtin();
  GroundingModel<float> model(cfg, Ablations{}, vocab.size(), 1);
  Graph<float> g;
  Rng data(2);
  const auto tp = text::tokenize("red circle . blue square .", vocab);
  const auto ps = model.forward(g, random_tensor<float>(data, {64, 64, 3}, 0.2), tp);
  EXPECT_EQ(ps.layers.size(), 3u);
  EXPECT_EQ(ps.num_decoder_layers(), 2);
  EXPECT_EQ(ps.final().logits.shape(), (Shape{cfg.num_queries, 6}));
  EXPECT_EQ(ps.text_features.shape(), (Shape{6, cfg.d_model}));
  EXPECT_EQ(ps.image_features.shape(), (Shape{85, cfg.d_model}));
  EXPECT_EQ(phrase_columns(tp), (Mask{1, 1, 0, 1, 1, 0}));
}

TEST(GroundingModel, AblationSwitchesAreIndependent) {
  const ModelConfig cfg = tiny_model();
  const auto vocab = text::Vocabulary::builtin();
  const auto tp = text::tokenize("red circle . blue square .", vocab);
  Rng data(3);
  const auto image = random_tensor<float>(data, {64, 64, 3}, 0.2);
  for (int bits = 0; bits < 16; ++bits) {
    Ablations a;
    a.no_encoder_fusion = bits & 1;
    a.static_query_selection = bits & 2;
    a.no_text_cross_attention = bits & 4;
    a.word_level_prompt = bits & 8;
    GroundingModel<float> model(cfg, a, vocab.size(), 1);
    Graph<float> g;
    const auto ps = model.forward(g, image, tp);
    EXPECT_EQ(ps.layers.front().class_agnostic, a.static_query_selection) << bits;
    EXPECT_EQ(ps.final().boxes.shape(), (Shape{cfg.num_queries, 4})) << bits;
  }
}

TEST(GroundingModel, WordLevelPositionsRunAcrossPhrases) {
  const auto vocab = text::Vocabulary::builtin();
  const auto tp = text::tokenize("red circle . dog .", vocab);
  EXPECT_EQ(as_word_level(tp).position, (std::vector<int>{0, 1, 2, 3, 4}));
}

}  // namespace
}  // namespace gdino
