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

#include <memory>
#include <vector>

#include "gdino/backbone.hpp"
#include "gdino/decoder.hpp"
#include "gdino/enhancer.hpp"
#include "gdino/query_selection.hpp"
#include "gdino/text.hpp"

namespace gdino {

template <typename T>
struct PredictionSet {
  // layers[0] is the encoder-output head over the selected tokens; then one
  // entry per decoder layer, last layer last.
  std::vector<LayerPrediction<T>> layers;
  Selection selection;
  text::TokenizedPrompt prompt;  // as fed to the text backbone
  Var<T> text_features;          // [N_T, d] after the enhancer
  Var<T> image_features;         // [N_I, d] after the enhancer

  const LayerPrediction<T>& final() const { return layers.back(); }
  int num_decoder_layers() const { return static_cast<int>(layers.size()) - 1; }
};

// Phrase-token columns of a prompt (valid, not a separator).
Mask phrase_columns(const text::TokenizedPrompt& tp);

// Word-level prompts see the whole sentence: no phrase isolation and
// positions running over the full prompt.
text::TokenizedPrompt as_word_level(const text::TokenizedPrompt& tp);

template <typename T>
class GroundingModel {
 public:
  GroundingModel(const ModelConfig& cfg, const Ablations& ablations, int vocab_size, std::uint64_t seed);
  // Sub-modules keep a pointer to the parameter store.
  GroundingModel(const GroundingModel&) = delete;
  GroundingModel& operator=(const GroundingModel&) = delete;

  // image: [H, W, 3] in [0, 1].
  PredictionSet<T> forward(Graph<T>& g, const Tensor<T>& image, const text::TokenizedPrompt& prompt) const;

  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const Ablations& ablations() const { return ablations_; }
  int vocab_size() const { return vocab_size_; }

  const ImageBackbone<T>& image_backbone() const { return image_backbone_; }
  const TextBackbone<T>& text_backbone() const { return text_backbone_; }
  const FeatureEnhancer<T>& enhancer() const { return enhancer_; }
  const QuerySelector<T>& query_selector() const { return selector_; }
  const CrossModalityDecoder<T>& decoder() const { return decoder_; }

 private:
  ModelConfig cfg_;
  Ablations ablations_;
  int vocab_size_ = 0;
  ParamStore<T> store_;
  ImageBackbone<T> image_backbone_;
  TextBackbone<T> text_backbone_;
  int level_embed_ = -1;
  FeatureEnhancer<T> enhancer_;
  nn::LayerNorm<T> image_out_norm_, text_out_norm_;
  QuerySelector<T> selector_;
  CrossModalityDecoder<T> decoder_;
};

}  // namespace gdino
