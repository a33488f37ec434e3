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

#include "gdino/loss.hpp"

#include <algorithm>
#include <cmath>

#include "gdino/boxes.hpp"

namespace gdino {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const std::vector<int>& span_for(bool class_agnostic, const GroundTruthSet& gt, int k) {
  static const std::vector<int> kAgnostic = {0};
  return class_agnostic ? kAgnostic : gt.spans[static_cast<std::size_t>(k)];
}

void check_gt(const GroundTruthSet& gt, std::int64_t columns, bool agnostic) {
  if (gt.spans.size() != gt.boxes.size()) throw ShapeError("ground truth: one span per box required");
  if (agnostic) return;
  for (const auto& s : gt.spans) {
    if (s.empty()) throw Error("ground truth: empty phrase span");
    for (int t : s)
      if (t < 0 || t >= columns) throw ShapeError("ground truth: span token outside the prompt");
  }
}

}  // namespace

double focal_match_cost(double p, double alpha, double gamma) {
  constexpr double kEps = 1e-8;
  const double pos = alpha * std::pow(1.0 - p, gamma) * -std::log(p + kEps);
  const double neg = (1.0 - alpha) * std::pow(p, gamma) * -std::log(1.0 - p + kEps);
  return pos - neg;
}

template <typename T>
std::vector<double> match_cost_matrix(const LayerPrediction<T>& pred, const GroundTruthSet& gt, const LossConfig& cfg) {
  const std::int64_t nq = pred.boxes.dim(0), nt = pred.logits.dim(1);
  const int m = gt.size();
  check_gt(gt, nt, pred.class_agnostic);
  const auto logits = pred.logits.value();
  const auto boxes = pred.boxes.value();
  std::vector<double> cost(static_cast<std::size_t>(nq) * m);
  for (std::int64_t q = 0; q < nq; ++q) {
    double b[4];
    for (int c = 0; c < 4; ++c) b[c] = static_cast<double>(boxes[static_cast<std::size_t>(q * 4 + c)]);
    const Box qbox = from_cxcywh(b[0], b[1], b[2], b[3]);
    for (int k = 0; k < m; ++k) {
      const auto& span = span_for(pred.class_agnostic, gt, k);
      double p = 0;
      for (int t : span) p += sigmoid(static_cast<double>(logits[static_cast<std::size_t>(q * nt + t)]));
      p /= static_cast<double>(span.size());
      const auto& g = gt.boxes[static_cast<std::size_t>(k)];
      double l1 = 0;
      for (int c = 0; c < 4; ++c) l1 += std::abs(b[c] - g[c]);
      const double gi = giou(qbox, from_cxcywh(g[0], g[1], g[2], g[3]));
      cost[static_cast<std::size_t>(q * m + k)] =
          cfg.match_class * focal_match_cost(p, cfg.focal_alpha, cfg.focal_gamma) + cfg.match_l1 * l1 +
          cfg.match_giou * (1.0 - gi);
    }
  }
  return cost;
}

template <typename T>
Var<T> focal_contrastive_loss(Var<T> logits, const Assignment& assignment, const GroundTruthSet& gt,
                              const Mask& columns, double alpha, double gamma, bool class_agnostic) {
  const std::int64_t nq = logits.dim(0), nt = logits.dim(1);
  if (static_cast<std::int64_t>(columns.size()) != nt) throw ShapeError("focal loss: column mask length mismatch");
  std::vector<T> targets(static_cast<std::size_t>(nq * nt), T(0));
  Mask valid(static_cast<std::size_t>(nq * nt), 0);
  for (std::int64_t q = 0; q < nq; ++q)
    for (std::int64_t t = 0; t < nt; ++t) valid[static_cast<std::size_t>(q * nt + t)] = columns[static_cast<std::size_t>(t)];
  for (const auto& [q, k] : assignment.pairs) {
    for (int t : span_for(class_agnostic, gt, k)) targets[static_cast<std::size_t>(q * nt + t)] = T(1);
  }
  Var<T> loss = sigmoid_focal_loss(logits, std::span<const T>(targets), valid, static_cast<T>(alpha),
                                   static_cast<T>(gamma));
  const double norm = std::max<std::size_t>(1, assignment.pairs.size());
  return scale(loss, static_cast<T>(1.0 / norm));
}

template <typename T>
LossBreakdown<T> total_loss(std::span<const LayerPrediction<T>> layers, const GroundTruthSet& gt, const Mask& columns,
                            const LossConfig& cfg) {
  if (layers.empty()) throw Error("total_loss: no predictions");
  LossBreakdown<T> out;
  const int m = gt.size();
  const T inv_m = static_cast<T>(1.0 / std::max(1, m));
  for (const auto& pred : layers) {
    const std::int64_t nq = pred.boxes.dim(0);
    Assignment a;
    if (m > 0) {
      a = hungarian(match_cost_matrix(pred, gt, cfg), static_cast<int>(nq), m);
    } else {
      for (int q = 0; q < nq; ++q) a.unmatched.push_back(q);
    }
    const Mask agnostic_cols = {1};
    const Mask& cols = pred.class_agnostic ? agnostic_cols : columns;
    Var<T> cls =
        focal_contrastive_loss(pred.logits, a, gt, cols, cfg.focal_alpha, cfg.focal_gamma, pred.class_agnostic);
    Var<T> weighted = scale(cls, static_cast<T>(cfg.loss_class));
    LayerLoss ll;
    ll.cls = static_cast<double>(cls.item());
    if (m > 0) {
      std::vector<std::int64_t> qidx;
      Tensor<T> target(Shape{m, 4});
      for (const auto& [q, k] : a.pairs) {
        qidx.push_back(q);
        for (int c = 0; c < 4; ++c) target.at(k, c) = static_cast<T>(gt.boxes[static_cast<std::size_t>(k)][c]);
      }
      Var<T> matched = gather_rows(pred.boxes, qidx);
      Var<T> tgt = pred.boxes.graph().constant(std::move(target));
      Var<T> l1 = scale(sum(abs(sub(matched, tgt))), inv_m);
      Var<T> gi = scale(sum(add_scalar(neg(giou_rows(matched, tgt)), T(1))), inv_m);
      ll.l1 = static_cast<double>(l1.item());
      ll.giou = static_cast<double>(gi.item());
      weighted = add(weighted, add(scale(l1, static_cast<T>(cfg.loss_l1)), scale(gi, static_cast<T>(cfg.loss_giou))));
    }
    ll.weighted = static_cast<double>(weighted.item());
    out.cls += ll.cls;
    out.l1 += ll.l1;
    out.giou += ll.giou;
    out.layers.push_back(ll);
    out.assignments.push_back(std::move(a));
    out.total_var = out.total_var.valid() ? add(out.total_var, weighted) : weighted;
  }
  out.total = static_cast<double>(out.total_var.item());
  return out;
}

#define GDINO_INSTANTIATE(T)                                                                                     \
  template std::vector<double> match_cost_matrix<T>(const LayerPrediction<T>&, const GroundTruthSet&,            \
                                                    const LossConfig&);                                          \
  template Var<T> focal_contrastive_loss<T>(Var<T>, const Assignment&, const GroundTruthSet&, const Mask&, double, \
                                            double, bool);                                                             \
  template LossBreakdown<T> total_loss<T>(std::span<const LayerPrediction<T>>, const GroundTruthSet&, const Mask&, \
                                          const LossConfig&);
GDINO_INSTANTIATE(float)
GDINO_INSTANTIATE(double)
#undef GDINO_INSTANTIATE

}  // namespace gdino
