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

#include "gdino/enhancer.hpp"

namespace gdino {
namespace {

constexpr int kLevels = 4;

}  // namespace

template <typename T>
EnhancerLayer<T>::EnhancerLayer(ParamStore<T>& store, const std::string& name, const ModelConfig& cfg, Rng& rng)
    : img_norm_self_(store, name + ".img_norm_self", cfg.d_model),
      txt_norm_self_(store, name + ".txt_norm_self", cfg.d_model),
      img_self_(store, name + ".img_self", cfg.d_model, cfg.heads, kLevels, cfg.points, rng),
      txt_self_(store, name + ".txt_self", cfg.d_model, cfg.heads, rng),
      img_norm_cross_(store, name + ".img_norm_cross", cfg.d_model),
      txt_norm_cross_(store, name + ".txt_norm_cross", cfg.d_model),
      img_from_txt_(store, name + ".img_from_txt", cfg.d_model, cfg.heads, rng),
      img_norm_ffn_(store, name + ".img_norm_ffn", cfg.d_model),
      txt_norm_ffn_(store, name + ".txt_norm_ffn", cfg.d_model),
      img_ffn_(store, name + ".img_ffn", cfg.d_model, cfg.ffn_dim, rng),
      txt_ffn_(store, name + ".txt_ffn", cfg.d_model, cfg.ffn_dim, rng),
      deformable_text_to_image_(cfg.deformable_text_to_image) {
  if (deformable_text_to_image_) {
    txt_from_img_deform_ =
        nn::DeformableAttention<T>(store, name + ".txt_from_img", cfg.d_model, cfg.heads, kLevels, cfg.points, rng);
  } else {
    txt_from_img_ = nn::Attention<T>(store, name + ".txt_from_img", cfg.d_model, cfg.heads, rng);
  }
}

template <typename T>
std::pair<Var<T>, Var<T>> EnhancerLayer<T>::forward(Graph<T>& g, Var<T> img, Var<T> txt,
                                                    const EnhancerContext<T>& ctx) const {
  // Self-attention, one per stream.
  {
    Var<T> h = img_norm_self_(g, img);
    img = add(img, img_self_(g, add(h, ctx.pos), ctx.centers, h, ctx.levels));
    Var<T> t = txt_norm_self_(g, txt);
    txt = add(txt, txt_self_(g, t, t, t, AttnMask{ctx.text_valid, ctx.text_pairs}));
    txt = nn::zero_rows(txt, ctx.text_valid);
  }

  if (ctx.fusion) {
    Var<T> h = img_norm_cross_(g, img);
    Var<T> t = txt_norm_cross_(g, txt);
    Var<T> hp = add(h, ctx.pos);
    Var<T> img_update = img_from_txt_(g, hp, t, t, AttnMask{ctx.text_valid, {}});
    Var<T> txt_update;
    if (deformable_text_to_image_) {
      // Every text token samples around the whole image.
      Tensor<T> ref(Shape{txt.dim(0), 4});
      for (std::int64_t i = 0; i < txt.dim(0); ++i) {
        ref.at(i, 0) = T(0.5);
        ref.at(i, 1) = T(0.5);
        ref.at(i, 2) = T(1);
        ref.at(i, 3) = T(1);
      }
      txt_update = txt_from_img_deform_(g, t, ref, h, ctx.levels);
    } else {
      txt_update = txt_from_img_(g, t, hp, h, AttnMask{});
    }
    img = add(img, img_update);
    txt = nn::zero_rows(add(txt, txt_update), ctx.text_valid);
  }

  img = add(img, img_ffn_(g, img_norm_ffn_(g, img)));
  txt = add(txt, txt_ffn_(g, txt_norm_ffn_(g, txt)));
  txt = nn::zero_rows(txt, ctx.text_valid);
  return {img, txt};
}

template <typename T>
FeatureEnhancer<T>::FeatureEnhancer(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng) {
  for (int l = 0; l < cfg.enhancer_layers; ++l) layers_.emplace_back(store, "enhancer.layer" + std::to_string(l), cfg, rng);
}

template <typename T>
std::pair<Var<T>, Var<T>> FeatureEnhancer<T>::forward(Graph<T>& g, Var<T> img, Var<T> txt,
                                                      const EnhancerContext<T>& ctx) const {
  for (const auto& layer : layers_) std::tie(img, txt) = layer.forward(g, img, txt, ctx);
  return {img, txt};
}

template class EnhancerLayer<float>;
template class EnhancerLayer<double>;
template class FeatureEnhancer<float>;
template class FeatureEnhancer<double>;

}  // namespace gdino
