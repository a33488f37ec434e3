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

#include <array>
#include <vector>

#include "gdino/config.hpp"
#include "gdino/decoder.hpp"
#include "gdino/hungarian.hpp"

namespace gdino {

// Ground truth of one image: boxes in (cx, cy, w, h) and, per object, the
// prompt token indices of its phrase.
struct GroundTruthSet {
  std::vector<std::array<double, 4>> boxes;
  std::vector<std::vector<int>> spans;

  int size() const { return static_cast<int>(boxes.size()); }
};

// Focal-style matching cost of predicted probability p for a positive:
//   alpha (1 - p)^gamma (-log p) - (1 - alpha) p^gamma (-log(1 - p)).
double focal_match_cost(double p, double alpha, double gamma);

// Matching cost [N_q, M] row-major:
//   w_class * focal_match_cost(mean sigmoid over the span)
//   + w_l1 * L1(box_q, box_m) + w_giou * (1 - giou).
// A class-agnostic prediction scores every object on column 0.
template <typename T>
std::vector<double> match_cost_matrix(const LayerPrediction<T>& pred, const GroundTruthSet& gt, const LossConfig& cfg);

// Sum of per-logit focal losses over the allowed columns, with target 1 for
// (matched query, token in its object's span), divided by max(1, matched).
// `columns` marks the token columns that take part (phrase tokens only).
// A class-agnostic [N_q, 1] head uses column 0 as every object's span.
template <typename T>
Var<T> focal_contrastive_loss(Var<T> logits, const Assignment& assignment, const GroundTruthSet& gt,
                              const Mask& columns, double alpha, double gamma, bool class_agnostic = false);

struct LayerLoss {
  double cls = 0, l1 = 0, giou = 0, weighted = 0;
};

template <typename T>
struct LossBreakdown {
  std::vector<LayerLoss> layers;  // same order as the predictions
  std::vector<Assignment> assignments;
  double cls = 0, l1 = 0, giou = 0;
  double total = 0;
  Var<T> total_var;
};

// Matches each layer independently and sums
//   loss_class * cls + loss_l1 * l1 + loss_giou * giou
// over all layers. `columns` marks phrase-token columns of the prompt.
template <typename T>
LossBreakdown<T> total_loss(std::span<const LayerPrediction<T>> layers, const GroundTruthSet& gt, const Mask& columns,
                            const LossConfig& cfg);

}  // namespace gdino
