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
#include <span>

#include "gdino/tensor.hpp"

namespace gdino {

// Which (query, key) pairs may interact. Both parts are optional.
struct AttnMask {
  Mask keys;   // [m]; 0 marks an invalid key (e.g. a padded text token)
  Mask pairs;  // [n * m]; 0 blocks query i from key j

  bool allowed(std::int64_t i, std::int64_t j, std::int64_t m) const {
    if (!keys.empty() && !keys[static_cast<std::size_t>(j)]) return false;
    if (!pairs.empty() && !pairs[static_cast<std::size_t>(i * m + j)]) return false;
    return true;
  }
};

// Scaled dot-product attention on already-projected inputs:
// q [n, d], k [m, d], v [m, d] split into `heads` column groups. Each output
// row sums only over its allowed keys in increasing key order, so blocked keys
// have no influence at all (not even through rounding). A query with no
// allowed key outputs zeros.
template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, int heads, const AttnMask& mask);

struct LevelShape {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t start = 0;  // first flat token index of this level
};

// Multi-scale deformable sampling.
//   value     [N, d]           flattened pyramid, heads split along columns
//   reference [Nq, 2] (cx, cy) or [Nq, 4] (cx, cy, w, h), normalized, constant
//   offsets   [Nq, heads*L*P*2] (x, y) per head/level/point
//   weights   [Nq, heads*L*P]   already normalized per head
// Point locations: 2-d reference -> ref + offset / (W_l, H_l);
// 4-d reference -> ref_xy + offset / P * ref_wh / 2. Sampling is bilinear with
// zero padding on pixel-center coordinates (loc * size - 0.5).
template <typename T>
Var<T> deform_sample(Var<T> value, std::span<const LevelShape> levels, const Tensor<T>& reference,
                     Var<T> offsets, Var<T> weights, int heads, int points);

}  // namespace gdino
