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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "gdino/boxes.hpp"

namespace gdino {

enum class PhrasePooling { kMax, kMean };

PhrasePooling parse_pooling(const std::string& name);

// score_k = sigmoid(pool over span k of logits). Throws on an empty span or a
// span index outside the row.
std::vector<double> phrase_scores(std::span<const double> logits, const std::vector<std::vector<int>>& spans,
                                  PhrasePooling pooling = PhrasePooling::kMax);

struct Detection {
  int image = 0;
  int category = 0;
  double score = 0;
  Box box;  // normalized corners
};

struct GroundTruthBox {
  int image = 0;
  int category = 0;
  Box box;
};

// Greedy COCO-style matching in descending score order (stable on ties), each
// ground truth matched at most once, AP as the area under the precision
// envelope over every recall step. Categories with no ground truth are
// skipped; the result maps category -> AP.
std::map<int, double> average_precision(std::span<const Detection> detections, std::span<const GroundTruthBox> truths,
                                        double iou_threshold);

// Mean over the categories that have ground truth (0 when there are none).
double mean_ap(const std::map<int, double>& per_category);

// Mean AP over IoU thresholds 0.50, 0.55, ..., 0.95.
double mean_ap_coco(std::span<const Detection> detections, std::span<const GroundTruthBox> truths);

// Index of the highest score; the lower index wins ties.
int argmax_lowest(std::span<const double> scores);

// True iff the top-scoring box has IoU >= threshold with the target.
bool rec_top1(std::span<const double> scores, std::span<const Box> boxes, const Box& target,
              double iou_threshold = 0.5);

}  // namespace gdino
