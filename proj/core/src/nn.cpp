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

#include "gdino/nn.hpp"

#include <cmath>
#include <numbers>

namespace gdino::nn {
namespace {

template <typename T>
Tensor<T> xavier(Rng& rng, std::int64_t in, std::int64_t out) {
  Tensor<T> t(Shape{in, out});
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

template <typename T>
Linear<T>::Linear(ParamStore<T>& store, const std::string& name, std::int64_t in, std::int64_t out, Rng& rng,
                  ParamGroup group, Init init, bool bias)
    : store_(&store), in_(in), out_(out) {
  weight_ = store.add(name + ".weight", init == Init::kZero ? Tensor<T>(Shape{in, out}) : xavier<T>(rng, in, out),
                      group);
  if (bias) bias_ = store.add(name + ".bias", Tensor<T>(Shape{out}), group);
}

template <typename T>
Var<T> Linear<T>::operator()(Graph<T>& g, Var<T> x) const {
  return linear(x, g.param(*store_, weight_), bias_ >= 0 ? g.param(*store_, bias_) : Var<T>());
}

template <typename T>
LayerNorm<T>::LayerNorm(ParamStore<T>& store, const std::string& name, std::int64_t dim, ParamGroup group)
    : store_(&store) {
  gamma_ = store.add(name + ".gamma", Tensor<T>::full(Shape{dim}, T(1)), group);
  beta_ = store.add(name + ".beta", Tensor<T>(Shape{dim}), group);
}

template <typename T>
Var<T> LayerNorm<T>::operator()(Graph<T>& g, Var<T> x) const {
  return layer_norm(x, g.param(*store_, gamma_), g.param(*store_, beta_));
}

template <typename T>
Mlp<T>::Mlp(ParamStore<T>& store, const std::string& name, std::span<const std::int64_t> widths, Rng& rng,
            ParamGroup group, bool zero_last) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    layers_.emplace_back(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng, group,
                         last && zero_last ? Init::kZero : Init::kXavier);
  }
}

template <typename T>
Var<T> Mlp<T>::operator()(Graph<T>& g, Var<T> x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](g, x);
    if (i + 1 < layers_.size()) x = relu(x);
  }
  return x;
}

template <typename T>
FeedForward<T>::FeedForward(ParamStore<T>& store, const std::string& name, std::int64_t dim, std::int64_t hidden,
                            Rng& rng, ParamGroup group)
    : up_(store, name + ".up", dim, hidden, rng, group), down_(store, name + ".down", hidden, dim, rng, group) {}

template <typename T>
Var<T> FeedForward<T>::operator()(Graph<T>& g, Var<T> x) const {
  return down_(g, relu(up_(g, x)));
}

template <typename T>
Attention<T>::Attention(ParamStore<T>& store, const std::string& name, std::int64_t dim, int heads, Rng& rng,
                        ParamGroup group)
    : q_(store, name + ".q", dim, dim, rng, group),
      k_(store, name + ".k", dim, dim, rng, group),
      v_(store, name + ".v", dim, dim, rng, group),
      out_(store, name + ".out", dim, dim, rng, group),
      heads_(heads) {}

template <typename T>
Var<T> Attention<T>::operator()(Graph<T>& g, Var<T> query, Var<T> key, Var<T> value, const AttnMask& mask) const {
  Var<T> attended = multi_head_attention(q_(g, query), k_(g, key), v_(g, value), heads_, mask);
  return out_(g, attended);
}

template <typename T>
DeformableAttention<T>::DeformableAttention(ParamStore<T>& store, const std::string& name, std::int64_t dim,
                                            int heads, int levels, int points, Rng& rng)
    : value_(store, name + ".value", dim, dim, rng),
      offsets_(store, name + ".offsets", dim, static_cast<std::int64_t>(heads) * levels * points * 2, rng,
               ParamGroup::kDefault, Init::kZero),
      weights_(store, name + ".weights", dim, static_cast<std::int64_t>(heads) * levels * points, rng,
               ParamGroup::kDefault, Init::kZero),
      out_(store, name + ".out", dim, dim, rng),
      heads_(heads),
      levels_(levels),
      points_(points) {
  // Each head starts looking in its own direction, farther for later points.
  auto& bias = store[offsets_.bias_id()].value;
  for (int h = 0; h < heads; ++h) {
    const double theta = 2.0 * std::numbers::pi * h / heads;
    double cx = std::cos(theta), cy = std::sin(theta);
    const double norm = std::max(std::abs(cx), std::abs(cy));
    cx /= norm;
    cy /= norm;
    for (int l = 0; l < levels; ++l)
      for (int p = 0; p < points; ++p) {
        const std::int64_t idx = ((static_cast<std::int64_t>(h) * levels + l) * points + p) * 2;
        bias[idx] = static_cast<T>(cx * (p + 1));
        bias[idx + 1] = static_cast<T>(cy * (p + 1));
      }
  }
}

template <typename T>
Var<T> DeformableAttention<T>::operator()(Graph<T>& g, Var<T> query, const Tensor<T>& reference, Var<T> value,
                                          std::span<const LevelShape> levels) const {
  if (static_cast<int>(levels.size()) != levels_) throw ShapeError("deformable attention: level count mismatch");
  const std::int64_t nq = query.dim(0);
  const std::int64_t samples = static_cast<std::int64_t>(levels_) * points_;
  Var<T> offsets = offsets_(g, query);
  Var<T> logits = reshape(weights_(g, query), Shape{nq * heads_, samples});
  Var<T> weights = reshape(masked_softmax(logits, Mask{}), Shape{nq, heads_ * samples});
  Var<T> sampled = deform_sample(value_(g, value), levels, reference, offsets, weights, heads_, points_);
  return out_(g, sampled);
}

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class Mlp<float>;
template class Mlp<double>;
template class FeedForward<float>;
template class FeedForward<double>;
template class Attention<float>;
template class Attention<double>;
template class DeformableAttention<float>;
template class DeformableAttention<double>;

}  // namespace gdino::nn
