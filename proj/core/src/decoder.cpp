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

#include "gdino/decoder.hpp"

#include <cmath>

#include "gdino/backbone.hpp"
#include "gdino/query_selection.hpp"

namespace gdino {
namespace {

constexpr int kLevels = 4;
constexpr double kLogitClamp = 8.0;

}  // namespace

template <typename T>
Var<T> refine_anchors(Graph<T>& g, const Tensor<T>& anchors, Var<T> delta) {
  if (anchors.shape != delta.shape()) {
    throw ShapeError("refine_anchors: anchors " + shape_str(anchors.shape) + " vs delta " + shape_str(delta.shape()));
  }
  Var<T> logit = add(inverse_sigmoid(g.constant(anchors)), delta);
  return sigmoid(clamp(logit, static_cast<T>(-kLogitClamp), static_cast<T>(kLogitClamp)));
}

template <typename T>
DecoderLayer<T>::DecoderLayer(ParamStore<T>& store, const std::string& name, const ModelConfig& cfg, Rng& rng)
    : norm_self_(store, name + ".norm_self", cfg.d_model),
      norm_image_(store, name + ".norm_image", cfg.d_model),
      norm_text_(store, name + ".norm_text", cfg.d_model),
      norm_ffn_(store, name + ".norm_ffn", cfg.d_model),
      self_attn_(store, name + ".self_attn", cfg.d_model, cfg.heads, rng),
      image_attn_(store, name + ".image_attn", cfg.d_model, cfg.heads, kLevels, cfg.points, rng),
      text_attn_(store, name + ".text_attn", cfg.d_model, cfg.heads, rng),
      ffn_(store, name + ".ffn", cfg.d_model, cfg.ffn_dim, rng) {
  const std::int64_t d = cfg.d_model;
  const std::int64_t widths[] = {d, d, d, 4};
  box_head_ = nn::Mlp<T>(store, name + ".box_head", widths, rng, ParamGroup::kDefault, /*zero_last=*/true);
}

template <typename T>
Var<T> DecoderLayer<T>::forward(Graph<T>& g, Var<T> x, Var<T> qpos, const Tensor<T>& anchors,
                                const DecoderInputs<T>& in) const {
  {
    Var<T> h = norm_self_(g, x);
    Var<T> hp = add(h, qpos);
    x = add(x, self_attn_(g, hp, hp, h, AttnMask{}));
  }
  {
    Var<T> h = norm_image_(g, x);
    x = add(x, image_attn_(g, add(h, qpos), anchors, in.memory, in.levels));
  }
  if (in.text_cross_attention) {
    Var<T> h = norm_text_(g, x);
    x = add(x, text_attn_(g, add(h, qpos), in.text, in.text, AttnMask{in.text_valid, {}}));
  }
  return add(x, ffn_(g, norm_ffn_(g, x)));
}

template <typename T>
CrossModalityDecoder<T>::CrossModalityDecoder(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng)
    : store_(&store),
      out_norm_(store, "decoder.out_norm", cfg.d_model),
      class_proj_(store, "decoder.class_proj", cfg.d_model, cfg.d_model, rng),
      d_(cfg.d_model) {
  const std::int64_t d = cfg.d_model;
  const std::int64_t widths[] = {2 * d, d, d};
  qpos_head_ = nn::Mlp<T>(store, "decoder.qpos_head", widths, rng);
  for (int l = 0; l < cfg.decoder_layers; ++l) layers_.emplace_back(store, "decoder.layer" + std::to_string(l), cfg, rng);
  logit_bias_ = store.add("decoder.logit_bias", Tensor<T>::full(Shape{1}, static_cast<T>(kInitialLogitBias)));
}

template <typename T>
Var<T> CrossModalityDecoder<T>::classify(Graph<T>& g, Var<T> queries, Var<T> text) const {
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_)));
  return add_scalar_var(scale(matmul_nt(class_proj_(g, queries), text), inv_sqrt_d), g.param(*store_, logit_bias_));
}

template <typename T>
std::vector<LayerPrediction<T>> CrossModalityDecoder<T>::forward(Graph<T>& g, const DecoderInputs<T>& in) const {
  std::vector<LayerPrediction<T>> out;
  Tensor<T> anchors = in.anchors;
  Var<T> x = in.content;
  for (const auto& layer : layers_) {
    Var<T> qpos = qpos_head_(g, g.constant(box_sine_embedding(anchors, d_)));
    x = layer.forward(g, x, qpos, anchors, in);
    Var<T> o = out_norm_(g, x);
    Var<T> boxes = refine_anchors(g, anchors, layer.box_head()(g, o));
    out.push_back(LayerPrediction<T>{boxes, classify(g, o, in.text), false});
    anchors = boxes.tensor();
  }
  return out;
}

template Var<float> refine_anchors<float>(Graph<float>&, const Tensor<float>&, Var<float>);
template Var<double> refine_anchors<double>(Graph<double>&, const Tensor<double>&, Var<double>);
template class DecoderLayer<float>;
template class DecoderLayer<double>;
template class CrossModalityDecoder<float>;
template class CrossModalityDecoder<double>;

}  // namespace gdino
