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

#include "gdino/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gdino {

PhrasePooling parse_pooling(const std::string& name) {
  if (name == "max") return PhrasePooling::kMax;
  if (name == "mean") return PhrasePooling::kMean;
  throw Error("unknown phrase pooling '" + name + "'");
}

std::vector<double> phrase_scores(std::span<const double> logits, const std::vector<std::vector<int>>& spans,
                                  PhrasePooling pooling) {
  std::vector<double> out;
  out.reserve(spans.size());
  for (const auto& span : spans) {
    if (span.empty()) throw Error("phrase_scores: empty span");
    double acc = pooling == PhrasePooling::kMax ? -INFINITY : 0.0;
    for (int t : span) {
      if (t < 0 || static_cast<std::size_t>(t) >= logits.size()) throw ShapeError("phrase_scores: span out of range");
      const double v = logits[static_cast<std::size_t>(t)];
      acc = pooling == PhrasePooling::kMax ? std::max(acc, v) : acc + v;
    }
    if (pooling == PhrasePooling::kMean) acc /= static_cast<double>(span.size());
    out.push_back(1.0 / (1.0 + std::exp(-acc)));
  }
  return out;
}

std::map<int, double> average_precision(std::span<const Detection> detections, std::span<const GroundTruthBox> truths,
                                        double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw Error("average_precision: IoU threshold outside (0, 1)");
  std::map<int, std::vector<std::size_t>> gt_by_cat;
  for (std::size_t i = 0; i < truths.size(); ++i) gt_by_cat[truths[i].category].push_back(i);

  std::map<int, double> ap;
  for (const auto& [cat, gts] : gt_by_cat) {
    std::vector<std::size_t> dets;
    for (std::size_t i = 0; i < detections.size(); ++i)
      if (detections[i].category == cat) dets.push_back(i);
    std::stable_sort(dets.begin(), dets.end(),
                     [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });

    std::map<int, std::vector<std::size_t>> gt_by_image;
    for (std::size_t gi : gts) gt_by_image[truths[gi].image].push_back(gi);
    std::vector<char> taken(truths.size(), 0);
    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (std::size_t di : dets) {
      const Detection& d = detections[di];
      double best = -1.0;
      std::ptrdiff_t best_gt = -1;
      const auto it = gt_by_image.find(d.image);
      for (std::size_t gi : it == gt_by_image.end() ? std::vector<std::size_t>{} : it->second) {
        if (taken[gi]) continue;
        const double o = iou(d.box, truths[gi].box);
        if (o >= iou_threshold && o > best) {
          best = o;
          best_gt = static_cast<std::ptrdiff_t>(gi);
        }
      }
      if (best_gt >= 0) {
        taken[static_cast<std::size_t>(best_gt)] = 1;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
    }
    // Precision envelope from the right, then sum over recall increments.
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double area = 0, prev_recall = 0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      area += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
    ap[cat] = area;
  }
  return ap;
}

double mean_ap(const std::map<int, double>& per_category) {
  if (per_category.empty()) return 0.0;
  double s = 0;
  for (const auto& [cat, v] : per_category) s += v;
  return s / static_cast<double>(per_category.size());
}

double mean_ap_coco(std::span<const Detection> detections, std::span<const GroundTruthBox> truths) {
  double s = 0;
  for (int i = 0; i < 10; ++i) s += mean_ap(average_precision(detections, truths, 0.5 + 0.05 * i));
  return s / 10.0;
}

int argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw Error("argmax over an empty list");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

bool rec_top1(std::span<const double> scores, std::span<const Box> boxes, const Box& target, double iou_threshold) {
  if (scores.size() != boxes.size()) throw ShapeError("rec_top1: one box per score required");
  return iou(boxes[static_cast<std::size_t>(argmax_lowest(scores))], target) >= iou_threshold;
}

}  // namespace gdino
