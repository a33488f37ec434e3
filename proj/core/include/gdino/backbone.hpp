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

struct TokenLocation {
  int level = 0;
  int row = 0;
  int col = 0;
};

// Multi-scale image features: four levels at strides 8, 16, 32 and 64,
// flattened level by level (row-major inside a level) into `flat`.
template <typename T>
struct FeaturePyramid {
  std::vector<LevelShape> levels;
  std::vector<int> strides;
  Var<T> flat;                          // [N_I, d]
  std::vector<TokenLocation> location;  // per flat token
  int image_height = 0;
  int image_width = 0;

  std::int64_t num_tokens() const { return static_cast<std::int64_t>(location.size()); }
};

// Level shapes for an h-by-w input: stride-4 stem, then four stride-2 stages.
std::vector<LevelShape> pyramid_shapes(int height, int width);

// Normalized (x, y) centers of every flattened token, [N_I, 2].
template <typename T>
Tensor<T> token_centers(std::span<const LevelShape> levels);

// 2-D sinusoidal encoding of token centers, [N_I, d]; the first d/2 columns
// encode y, the rest x.
template <typename T>
Tensor<T> sine_position_embedding(std::span<const LevelShape> levels, int d);

// Sinusoidal encoding of normalized boxes (cx, cy, w, h), [n, 2d]:
// d/2 columns per coordinate.
template <typename T>
Tensor<T> box_sine_embedding(const Tensor<T>& boxes, int d);

template <typename T>
class ImageBackbone {
 public:
  ImageBackbone() = default;
  ImageBackbone(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng);

  // image: [H, W, 3] with H and W divisible by 32.
  FeaturePyramid<T> forward(Graph<T>& g, const Tensor<T>& image) const;

 private:
  const ParamStore<T>* store_ = nullptr;
  int stem_w_ = -1, stem_b_ = -1;
  nn::LayerNorm<T> stem_norm_;
  std::vector<int> stage_w_, stage_b_;
  std::vector<nn::LayerNorm<T>> stage_norm_;
  std::vector<nn::Linear<T>> level_proj_;
  std::vector<nn::LayerNorm<T>> level_norm_;
};

template <typename T>
struct TextFeatures {
  Var<T> features;  // [N_T, d]; padding rows are zero
  Mask valid;       // [N_T]
};

// Token + per-phrase position embeddings followed by masked self-attention
// blocks. With a sub-sentence mask a phrase's features depend only on the
// phrase's own tokens.
template <typename T>
class TextBackbone {
 public:
  TextBackbone() = default;
  TextBackbone(ParamStore<T>& store, const ModelConfig& cfg, int vocab_size, Rng& rng);

  TextFeatures<T> forward(Graph<T>& g, const text::TokenizedPrompt& tp, const text::SubSentenceMask& mask) const;

 private:
  struct Block {
    nn::LayerNorm<T> norm1;
    nn::Attention<T> attn;
    nn::LayerNorm<T> norm2;
    nn::FeedForward<T> ffn;
  };
  const ParamStore<T>* store_ = nullptr;
  int token_embed_ = -1, pos_embed_ = -1;
  int heads_ = 1;
  int vocab_size_ = 0;
  int max_len_ = 0;
  std::vector<Block> blocks_;
  nn::LayerNorm<T> final_norm_;
};

}  // namespace gdino
