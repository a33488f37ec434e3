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

#include <cstdint>
#include <vector>

#include "gdino/backbone.hpp"
#include "gdino/config.hpp"
#include "gdino/nn.hpp"

namespace gdino {

struct Selection {
  std::vector<std::int64_t> indices;  // distinct, best first
  std::vector<double> scores;         // non-increasing
};

// The k best rows of a score vector: descending score, lower index first on
// ties. Throws on k > n or NaN scores.
Selection top_k(std::span<const double> scores, std::int64_t k);

// Per-row max over the valid columns of logits [n, m] (row-major), then top_k.
Selection select_from_logits(std::span<const double> logits, std::int64_t n, std::int64_t m, const Mask& valid,
                             std::int64_t k);

// Language-guided selection: score_i = max_j dot(image[i], text[j]) over
// valid text rows j, dot products accumulated in double in index order.
// image [N_I, d], text [N_T, d].
template <typename T>
Selection language_guided_select(const Tensor<T>& image, const Tensor<T>& text, const Mask& valid, std::int64_t k);

// Anchor prior of a flat token: its cell center and a (2 * stride / W,
// 2 * stride / H) size, clamped to [0.01, 0.9].
template <typename T>
Tensor<T> anchor_priors(const FeaturePyramid<T>& pyramid, std::span<const std::int64_t> indices);

template <typename T>
struct QuerySet {
  Selection selection;
  Tensor<T> prior;       // [N_q, 4] anchor priors of the selected tokens
  Var<T> enc_boxes;      // [N_q, 4] prior refined by the encoder box head
  Var<T> enc_logits;     // [N_q, N_T], or [N_q, 1] class-agnostic when static
  bool enc_class_agnostic = false;
  Tensor<T> anchors;     // [N_q, 4] detached enc_boxes; decoder starting anchors
  Var<T> content;        // [N_q, d] learnable, input independent
};

template <typename T>
class QuerySelector {
 public:
  QuerySelector() = default;
  QuerySelector(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng);

  // memory: enhanced image tokens; text: enhanced text tokens.
  // static_selection ranks tokens by a text-free objectness head instead.
  QuerySet<T> forward(Graph<T>& g, const FeaturePyramid<T>& pyramid, Var<T> memory, Var<T> text, const Mask& valid,
                      bool static_selection) const;

  const nn::Mlp<T>& box_head() const { return box_head_; }
  int content_id() const { return content_; }

 private:
  const ParamStore<T>* store_ = nullptr;
  nn::Linear<T> proj_;
  nn::LayerNorm<T> norm_;
  nn::Mlp<T> box_head_;
  nn::Linear<T> objectness_;
  int content_ = -1;
  int logit_bias_ = -1;
  int num_queries_ = 0;
};

// Shared logit bias initial value: sigmoid(-4.6) is about 0.01.
inline constexpr double kInitialLogitBias = -4.6;

}  // namespace gdino
