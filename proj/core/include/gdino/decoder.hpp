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

namespace gdino {

// Boxes are (cx, cy, w, h) in (0, 1); logits are [N_q, N_T] per text token, or
// [N_q, 1] for a class-agnostic head.
template <typename T>
struct LayerPrediction {
  Var<T> boxes;
  Var<T> logits;
  bool class_agnostic = false;
};

// Anchor refinement: sigmoid(clamp(inverse_sigmoid(anchor) + delta, -8, 8)).
// The anchor is a constant, so no gradient flows into earlier layers.
template <typename T>
Var<T> refine_anchors(Graph<T>& g, const Tensor<T>& anchors, Var<T> delta);

template <typename T>
struct DecoderInputs {
  Tensor<T> anchors;  // [N_q, 4] starting anchors (constant)
  Var<T> content;     // [N_q, d]
  Var<T> memory;      // [N_I, d] enhanced image tokens
  std::span<const LevelShape> levels;
  Var<T> text;        // [N_T, d] enhanced text tokens
  Mask text_valid;
  bool text_cross_attention = true;
};

template <typename T>
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParamStore<T>& store, const std::string& name, const ModelConfig& cfg, Rng& rng);

  // One update of the query features given positional queries `qpos`:
  // self-attention, deformable image cross-attention around `anchors`,
  // text cross-attention (optional), feed-forward.
  Var<T> forward(Graph<T>& g, Var<T> x, Var<T> qpos, const Tensor<T>& anchors, const DecoderInputs<T>& in) const;

  const nn::Attention<T>& self_attention() const { return self_attn_; }
  const nn::DeformableAttention<T>& image_cross_attention() const { return image_attn_; }
  const nn::Attention<T>& text_cross_attention() const { return text_attn_; }
  const nn::FeedForward<T>& ffn() const { return ffn_; }
  const nn::Mlp<T>& box_head() const { return box_head_; }

 private:
  nn::LayerNorm<T> norm_self_, norm_image_, norm_text_, norm_ffn_;
  nn::Attention<T> self_attn_;
  nn::DeformableAttention<T> image_attn_;
  nn::Attention<T> text_attn_;
  nn::FeedForward<T> ffn_;
  nn::Mlp<T> box_head_;
};

template <typename T>
class CrossModalityDecoder {
 public:
  CrossModalityDecoder() = default;
  CrossModalityDecoder(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng);

  // One prediction per layer; each layer's boxes are its refined anchors.
  std::vector<LayerPrediction<T>> forward(Graph<T>& g, const DecoderInputs<T>& in) const;

  // logits[q][t] = dot(proj(queries[q]), text[t]) / sqrt(d) + bias.
  Var<T> classify(Graph<T>& g, Var<T> queries, Var<T> text) const;

  const std::vector<DecoderLayer<T>>& layers() const { return layers_; }
  const nn::Linear<T>& class_projection() const { return class_proj_; }
  int logit_bias_id() const { return logit_bias_; }

 private:
  const ParamStore<T>* store_ = nullptr;
  std::vector<DecoderLayer<T>> layers_;
  nn::Mlp<T> qpos_head_;
  nn::LayerNorm<T> out_norm_;
  nn::Linear<T> class_proj_;
  int logit_bias_ = -1;
  int d_ = 0;
};

}  // namespace gdino
