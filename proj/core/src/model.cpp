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

#include "gdino/model.hpp"

namespace gdino {

Mask phrase_columns(const text::TokenizedPrompt& tp) {
  Mask cols(static_cast<std::size_t>(tp.size()), 0);
  for (int i = 0; i < tp.size(); ++i) cols[i] = (tp.valid[i] && !tp.is_special[i]) ? 1 : 0;
  return cols;
}

text::TokenizedPrompt as_word_level(const text::TokenizedPrompt& tp) {
  text::TokenizedPrompt out = tp;
  for (int i = 0; i < out.size(); ++i) out.position[i] = out.valid[i] ? i : 0;
  return out;
}

template <typename T>
GroundingModel<T>::GroundingModel(const ModelConfig& cfg, const Ablations& ablations, int vocab_size,
                                  std::uint64_t seed)
    : cfg_(cfg), ablations_(ablations), vocab_size_(vocab_size) {
  Rng rng(seed);
  image_backbone_ = ImageBackbone<T>(store_, cfg, rng);
  text_backbone_ = TextBackbone<T>(store_, cfg, vocab_size, rng);
  Tensor<T> level_embed(Shape{4, cfg.d_model});
  for (auto& v : level_embed.data) v = static_cast<T>(0.1 * rng.normal());
  level_embed_ = store_.add("enhancer.level_embed", std::move(level_embed));
  enhancer_ = FeatureEnhancer<T>(store_, cfg, rng);
  image_out_norm_ = nn::LayerNorm<T>(store_, "enhancer.image_out_norm", cfg.d_model);
  text_out_norm_ = nn::LayerNorm<T>(store_, "enhancer.text_out_norm", cfg.d_model);
  selector_ = QuerySelector<T>(store_, cfg, rng);
  decoder_ = CrossModalityDecoder<T>(store_, cfg, rng);
}

template <typename T>
PredictionSet<T> GroundingModel<T>::forward(Graph<T>& g, const Tensor<T>& image,
                                            const text::TokenizedPrompt& prompt) const {
  PredictionSet<T> out;
  out.prompt = ablations_.word_level_prompt ? as_word_level(prompt) : prompt;
  const auto& tp = out.prompt;
  const auto mask = ablations_.word_level_prompt ? text::build_wordlevel_mask(tp) : text::build_subsentence_mask(tp);

  FeaturePyramid<T> pyr = image_backbone_.forward(g, image);
  TextFeatures<T> tf = text_backbone_.forward(g, tp, mask);

  std::vector<std::int64_t> token_level;
  token_level.reserve(pyr.location.size());
  for (const auto& loc : pyr.location) token_level.push_back(loc.level);
  EnhancerContext<T> ctx;
  ctx.levels = pyr.levels;
  ctx.pos = add(g.constant(sine_position_embedding<T>(pyr.levels, cfg_.d_model)),
                gather_rows(g.param(store_, level_embed_), token_level));
  ctx.centers = token_centers<T>(pyr.levels);
  ctx.text_valid = tp.valid;
  ctx.text_pairs = mask.allow;
  ctx.fusion = !ablations_.no_encoder_fusion;

  auto [img, txt] = enhancer_.forward(g, pyr.flat, tf.features, ctx);
  img = image_out_norm_(g, img);
  txt = nn::zero_rows(text_out_norm_(g, txt), tp.valid);
  out.image_features = img;
  out.text_features = txt;

  QuerySet<T> qs = selector_.forward(g, pyr, img, txt, tp.valid, ablations_.static_query_selection);
  out.selection = qs.selection;
  out.layers.push_back(LayerPrediction<T>{qs.enc_boxes, qs.enc_logits, qs.enc_class_agnostic});

  DecoderInputs<T> in;
  in.anchors = qs.anchors;
  in.content = qs.content;
  in.memory = img;
  in.levels = pyr.levels;
  in.text = txt;
  in.text_valid = tp.valid;
  in.text_cross_attention = !ablations_.no_text_cross_attention;
  for (auto& layer : decoder_.forward(g, in)) out.layers.push_back(std::move(layer));
  return out;
}

template class GroundingModel<float>;
template class GroundingModel<double>;

}  // namespace gdino
