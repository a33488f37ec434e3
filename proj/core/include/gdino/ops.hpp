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
#include <vector>

#include "gdino/tensor.hpp"

// Differentiable operations on Graph nodes. Shapes must match exactly; the
// only broadcast is a trailing-dimension vector applied to every leading row
// (the `_row` variants). Everything else needs an explicit reshape.
namespace gdino {

// Elementwise, identical shapes.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> div(Var<T> a, Var<T> b);
template <typename T> Var<T> minimum(Var<T> a, Var<T> b);
template <typename T> Var<T> maximum(Var<T> a, Var<T> b);

// b has shape [n] where n is the last dimension of a.
template <typename T> Var<T> add_row(Var<T> a, Var<T> b);
template <typename T> Var<T> mul_row(Var<T> a, Var<T> b);
// b has a single element, added to every entry of a.
template <typename T> Var<T> add_scalar_var(Var<T> a, Var<T> b);

template <typename T> Var<T> scale(Var<T> a, T s);
template <typename T> Var<T> add_scalar(Var<T> a, T s);
template <typename T> Var<T> neg(Var<T> a);
template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> exp(Var<T> a);
template <typename T> Var<T> log(Var<T> a);
template <typename T> Var<T> abs(Var<T> a);
// Gradient is zero where the input was clipped.
template <typename T> Var<T> clamp(Var<T> a, T lo, T hi);
// log(x / (1 - x)) with x clamped to [eps, 1 - eps].
template <typename T> Var<T> inverse_sigmoid(Var<T> a, T eps = T(1e-5));

template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
// [m, n] -> [m]
template <typename T> Var<T> sum_cols(Var<T> a);

template <typename T> Var<T> reshape(Var<T> a, Shape shape);
template <typename T> Var<T> transpose(Var<T> a);
template <typename T> Var<T> detach(Var<T> a);

// Row selection on a rank-2 tensor; indices may repeat (gradients accumulate).
template <typename T> Var<T> gather_rows(Var<T> a, std::span<const std::int64_t> rows);
template <typename T> Var<T> slice_rows(Var<T> a, std::int64_t start, std::int64_t count);
template <typename T> Var<T> slice_cols(Var<T> a, std::int64_t start, std::int64_t count);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <typename T> Var<T> concat_cols(std::span<const Var<T>> parts);

// [m, k] x [k, n] -> [m, n]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
// [m, k] x [n, k]^T -> [m, n]
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);
// x [m, k] * w [k, n] + b [n]; pass an invalid Var for no bias.
template <typename T> Var<T> linear(Var<T> x, Var<T> w, Var<T> b);
// Normalizes each row of x [m, n] then applies gamma/beta [n].
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

// Row softmax over the last dimension of x [m, n]. `mask` is empty (all
// allowed) or m*n bytes. Masked entries are exactly 0; a row with no allowed
// entry is all zeros and passes no gradient.
template <typename T> Var<T> masked_softmax(Var<T> x, const Mask& mask);
// Mean over rows of -log softmax(logits)[target].
template <typename T> Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::int64_t> targets);

// Sum over entries with valid[i] != 0 of the binary focal loss
//   -alpha_t (1 - p_t)^gamma log(p_t),  p = sigmoid(logit).
// targets and valid are laid out like logits.
template <typename T>
Var<T> sigmoid_focal_loss(Var<T> logits, std::span<const T> targets, const Mask& valid, T alpha, T gamma);

// x: [H, W, C_in]; w: [k*k*C_in, C_out] in (ky, kx, c) order; b: [C_out].
// Zero padding. Output [H_out, W_out, C_out].
template <typename T> Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int kernel, int stride, int pad);

}  // namespace gdino
