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

// Slow reference implementations the library is checked against. Each one
// takes the most direct route, sharing no code with the library.
namespace gdino::testing {

// Minimum over every injective ground-truth -> query map of the summed cost,
// by enumerating all permutations of the n queries.
double brute_force_assignment_cost(std::span<const double> cost, int n, int m);

// Token scores as the row max of the full image-text product over valid
// columns, then a full stable sort by descending score; first k indices.
std::vector<std::int64_t> brute_force_select(const Tensor<float>& image, const Tensor<float>& text, const Mask& valid,
                                             std::int64_t k);

// Same on a ready logit matrix [n, m].
std::vector<std::int64_t> brute_force_select(std::span<const double> logits, std::int64_t n, std::int64_t m,
                                             const Mask& valid, std::int64_t k);

}  // namespace gdino::testing
