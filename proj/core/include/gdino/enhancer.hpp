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

#pragma once

#include <vector>

#include "gdino/config.hpp"
#include "gdino/nn.hpp"
#include "gdino/text.hpp"

namespace gdino {

// Inputs shared by every enhancer layer.
template <typename T>
struct EnhancerContext {
  std::span<const LevelShape> levels;
  Var<T> pos;            // [N_I, d] image positional terms
  Tensor<T> centers;     // [N_I, 2] normalized token centers
  Mask text_valid;       // [N_T]
  Mask text_pairs;       // [N_T * N_T] text self-attention mask
  bool fusion = true;    // false skips both cross-attention sub-blocks
};

// One fusion layer. Pre-norm residual sub-blocks in this order:
//   image deformable self-attention  |  text masked self-attention
//   image-queries-over-text and text-queries-over-image cross-attention,
//     both computed from the same (pre-update) streams
//   per-stream feed-forward
// Padded text rows are zero after every layer.
template <typename T>
class EnhancerLayer {
 public:
  EnhancerLayer() = default;
  EnhancerLayer(ParamStore<T>& store, const std::string& name, const ModelConfig& cfg, Rng& rng);

  std::pair<Var<T>, Var<T>> forward(Graph<T>& g, Var<T> img, Var<T> txt, const EnhancerContext<T>& ctx) const;

  const nn::Attention<T>& image_from_text() const { return img_from_txt_; }
  const nn::Attention<T>& text_from_image() const { return txt_from_img_; }
  const nn::DeformableAttention<T>& text_from_image_deformable() const { return txt_from_img_deform_; }
  const nn::DeformableAttention<T>& image_self() const { return img_self_; }

 private:
  nn::LayerNorm<T> img_norm_self_, txt_norm_self_;
  nn::DeformableAttention<T> img_self_;
  nn::Attention<T> txt_self_;
  nn::LayerNorm<T> img_norm_cross_, txt_norm_cross_;
  nn::Attention<T> img_from_txt_, txt_from_img_;
  nn::DeformableAttention<T> txt_from_img_deform_;
  nn::LayerNorm<T> img_norm_ffn_, txt_norm_ffn_;
  nn::FeedForward<T> img_ffn_, txt_ffn_;
  bool deformable_text_to_image_ = false;
};

template <typename T>
class FeatureEnhancer {
 public:
  FeatureEnhancer() = default;
  FeatureEnhancer(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng);

  // Folds the layers over both streams; zero layers is the identity.
  std::pair<Var<T>, Var<T>> forward(Graph<T>& g, Var<T> img, Var<T> txt, const EnhancerContext<T>& ctx) const;

  const std::vector<EnhancerLayer<T>>& layers() const { return layers_; }

 private:
  std::vector<EnhancerLayer<T>> layers_;
};

}  // namespace gdino
