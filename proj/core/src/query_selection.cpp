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

#include "gdino/query_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gdino {

Selection top_k(std::span<const double> scores, std::int64_t k) {
  const auto n = static_cast<std::int64_t>(scores.size());
  if (k < 0 || k > n) throw ShapeError("top_k: asked for " + std::to_string(k) + " of " + std::to_string(n));
  for (double s : scores)
    if (std::isnan(s)) throw NonFiniteError("top_k: NaN score");
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](std::int64_t a, std::int64_t b) {
    const double sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
    return sa > sb || (sa == sb && a < b);
  });
  Selection sel;
  sel.indices.assign(order.begin(), order.begin() + k);
  for (auto i : sel.indices) sel.scores.push_back(scores[static_cast<std::size_t>(i)]);
  return sel;
}

Selection select_from_logits(std::span<const double> logits, std::int64_t n, std::int64_t m, const Mask& valid,
                             std::int64_t k) {
  if (static_cast<std::int64_t>(logits.size()) != n * m || static_cast<std::int64_t>(valid.size()) != m) {
    throw ShapeError("select_from_logits: shape mismatch");
  }
  if (std::none_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; })) {
    throw Error("query selection needs at least one valid text token");
  }
  std::vector<double> scores(static_cast<std::size_t>(n), -INFINITY);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j)
      if (valid[static_cast<std::size_t>(j)]) scores[i] = std::max(scores[i], logits[static_cast<std::size_t>(i * m + j)]);
  return top_k(scores, k);
}

template <typename T>
Selection language_guided_select(const Tensor<T>& image, const Tensor<T>& text, const Mask& valid, std::int64_t k) {
  if (image.rank() != 2 || text.rank() != 2 || image.dim(1) != text.dim(1)) {
    throw ShapeError("language_guided_select: image " + shape_str(image.shape) + " vs text " + shape_str(text.shape));
  }
  const std::int64_t n = image.dim(0), m = text.dim(0), d = image.dim(1);
  if (static_cast<std::int64_t>(valid.size()) != m) throw ShapeError("language_guided_select: mask length mismatch");
  std::vector<double> logits(static_cast<std::size_t>(n * m), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      if (!valid[static_cast<std::size_t>(j)]) continue;
      double acc = 0.0;
      for (std::int64_t c = 0; c < d; ++c)
        acc += static_cast<double>(image.data[i * d + c]) * static_cast<double>(text.data[j * d + c]);
      logits[static_cast<std::size_t>(i * m + j)] = acc;
    }
  return select_from_logits(logits, n, m, valid, k);
}

template <typename T>
Tensor<T> anchor_priors(const FeaturePyramid<T>& pyramid, std::span<const std::int64_t> indices) {
  Tensor<T> out(Shape{static_cast<std::int64_t>(indices.size()), 4});
  for (std::size_t q = 0; q < indices.size(); ++q) {
    const auto& loc = pyramid.location.at(static_cast<std::size_t>(indices[q]));
    const auto& lv = pyramid.levels[static_cast<std::size_t>(loc.level)];
    const double stride = pyramid.strides[static_cast<std::size_t>(loc.level)];
    const auto i = static_cast<std::int64_t>(q);
    out.at(i, 0) = static_cast<T>((loc.col + 0.5) / static_cast<double>(lv.width));
    out.at(i, 1) = static_cast<T>((loc.row + 0.5) / static_cast<double>(lv.height));
    out.at(i, 2) = static_cast<T>(std::clamp(2.0 * stride / pyramid.image_width, 0.01, 0.9));
    out.at(i, 3) = static_cast<T>(std::clamp(2.0 * stride / pyramid.image_height, 0.01, 0.9));
  }
  return out;
}

template <typename T>
QuerySelector<T>::QuerySelector(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng)
    : store_(&store),
      proj_(store, "query_selection.proj", cfg.d_model, cfg.d_model, rng),
      norm_(store, "query_selection.norm", cfg.d_model),
      objectness_(store, "query_selection.objectness", cfg.d_model, 1, rng),
      num_queries_(cfg.num_queries) {
  const std::int64_t d = cfg.d_model;
  const std::int64_t widths[] = {d, d, d, 4};
  box_head_ = nn::Mlp<T>(store, "query_selection.box_head", widths, rng, ParamGroup::kDefault, /*zero_last=*/true);
  Tensor<T> content(Shape{cfg.num_queries, d});
  for (auto& v : content.data) v = static_cast<T>(rng.normal());
  content_ = store.add("query_selection.content", std::move(content));
  logit_bias_ = store.add("query_selection.logit_bias", Tensor<T>::full(Shape{1}, static_cast<T>(kInitialLogitBias)));
  store[objectness_.bias_id()].value.data[0] = static_cast<T>(kInitialLogitBias);
}

template <typename T>
QuerySet<T> QuerySelector<T>::forward(Graph<T>& g, const FeaturePyramid<T>& pyramid, Var<T> memory, Var<T> text,
                                      const Mask& valid, bool static_selection) const {
  const std::int64_t n = memory.dim(0);
  const std::int64_t d = memory.dim(1);
  if (num_queries_ > n) {
    throw ShapeError("cannot select " + std::to_string(num_queries_) + " queries from " + std::to_string(n) +
                     " image tokens");
  }
  Var<T> mem = norm_(g, proj_(g, memory));
  QuerySet<T> qs;
  Var<T> objectness;
  if (static_selection) {
    objectness = objectness_(g, mem);
    const auto v = objectness.value();
    qs.selection = top_k(std::vector<double>(v.begin(), v.end()), num_queries_);
  } else {
    qs.selection = language_guided_select(mem.tensor(), text.tensor(), valid, num_queries_);
  }
  const auto& idx = qs.selection.indices;
  qs.prior = anchor_priors(pyramid, idx);
  Var<T> selected = gather_rows(mem, idx);
  Var<T> delta = box_head_(g, selected);
  qs.enc_boxes = sigmoid(add(inverse_sigmoid(g.constant(qs.prior)), delta));
  qs.anchors = qs.enc_boxes.tensor();
  if (static_selection) {
    qs.enc_logits = gather_rows(objectness, idx);
    qs.enc_class_agnostic = true;
  } else {
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    qs.enc_logits = add_scalar_var(scale(matmul_nt(selected, text), inv_sqrt_d), g.param(*store_, logit_bias_));
  }
  qs.content = g.param(*store_, content_);
  return qs;
}

template Selection language_guided_select<float>(const Tensor<float>&, const Tensor<float>&, const Mask&, std::int64_t);
template Selection language_guided_select<double>(const Tensor<double>&, const Tensor<double>&, const Mask&,
                                                  std::int64_t);
template Tensor<float> anchor_priors<float>(const FeaturePyramid<float>&, std::span<const std::int64_t>);
template Tensor<double> anchor_priors<double>(const FeaturePyramid<double>&, std::span<const std::int64_t>);
template class QuerySelector<float>;
template class QuerySelector<double>;

}  // namespace gdino
