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

#include <span>
#include <string>
#include <vector>

#include "gdino/attention_ops.hpp"
#include "gdino/ops.hpp"
#include "gdino/params.hpp"
#include "gdino/rng.hpp"

// Parameterized building blocks. Each block registers its tensors in a
// ParamStore under a dotted name prefix and keeps only the parameter ids.
namespace gdino::nn {

// Multiplies away the rows of x [n, d] whose keep[i] is 0.
template <typename T>
Var<T> zero_rows(Var<T> x, const Mask& keep) {
  const std::int64_t n = x.dim(0), d = x.dim(1);
  if (static_cast<std::int64_t>(keep.size()) != n) throw ShapeError("zero_rows: mask length mismatch");
  Tensor<T> m(Shape{n, d});
  for (std::int64_t i = 0; i < n; ++i)
    if (keep[static_cast<std::size_t>(i)]) std::fill_n(m.data.begin() + i * d, d, T(1));
  return mul(x, x.graph().constant(std::move(m)));
}

enum class Init { kXavier, kZero };

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, std::int64_t in, std::int64_t out, Rng& rng,
         ParamGroup group = ParamGroup::kDefault, Init init = Init::kXavier, bool bias = true);

  Var<T> operator()(Graph<T>& g, Var<T> x) const;

  int weight_id() const { return weight_; }
  int bias_id() const { return bias_; }
  std::int64_t in_features() const { return in_; }
  std::int64_t out_features() const { return out_; }

 private:
  const ParamStore<T>* store_ = nullptr;
  int weight_ = -1;
  int bias_ = -1;
  std::int64_t in_ = 0, out_ = 0;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore<T>& store, const std::string& name, std::int64_t dim,
            ParamGroup group = ParamGroup::kDefault);
  Var<T> operator()(Graph<T>& g, Var<T> x) const;

 private:
  const ParamStore<T>* store_ = nullptr;
  int gamma_ = -1, beta_ = -1;
};

// Linear layers with ReLU in between (none after the last).
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore<T>& store, const std::string& name, std::span<const std::int64_t> widths, Rng& rng,
      ParamGroup group = ParamGroup::kDefault, bool zero_last = false);
  Var<T> operator()(Graph<T>& g, Var<T> x) const;
  const std::vector<Linear<T>>& layers() const { return layers_; }

 private:
  std::vector<Linear<T>> layers_;
};

template <typename T>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParamStore<T>& store, const std::string& name, std::int64_t dim, std::int64_t hidden, Rng& rng,
              ParamGroup group = ParamGroup::kDefault);
  Var<T> operator()(Graph<T>& g, Var<T> x) const;

 private:
  Linear<T> up_, down_;
};

// Standard multi-head attention with input and output projections.
template <typename T>
class Attention {
 public:
  Attention() = default;
  Attention(ParamStore<T>& store, const std::string& name, std::int64_t dim, int heads, Rng& rng,
            ParamGroup group = ParamGroup::kDefault);
  Var<T> operator()(Graph<T>& g, Var<T> query, Var<T> key, Var<T> value, const AttnMask& mask) const;

  const Linear<T>& out_proj() const { return out_; }

 private:
  Linear<T> q_, k_, v_, out_;
  int heads_ = 1;
};

// Multi-scale deformable attention: per-query sampling offsets and weights
// predicted from the query, values projected from the flattened pyramid.
template <typename T>
class DeformableAttention {
 public:
  DeformableAttention() = default;
  DeformableAttention(ParamStore<T>& store, const std::string& name, std::int64_t dim, int heads, int levels,
                      int points, Rng& rng);
  Var<T> operator()(Graph<T>& g, Var<T> query, const Tensor<T>& reference, Var<T> value,
                    std::span<const LevelShape> levels) const;

  const Linear<T>& offsets() const { return offsets_; }
  const Linear<T>& out_proj() const { return out_; }

 private:
  Linear<T> value_, offsets_, weights_, out_;
  int heads_ = 1, levels_ = 1, points_ = 1;
};

}  // namespace gdino::nn
