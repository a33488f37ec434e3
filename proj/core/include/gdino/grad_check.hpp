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

#include <functional>

#include "gdino/tensor.hpp"

namespace gdino {

struct GradCheckResult {
  double max_rel_error = 0;
  std::int64_t worst_index = -1;
  double analytic = 0;  // at worst_index
  double numeric = 0;   // at worst_index
};

// Builds a fresh graph around a leaf variable and returns a scalar.
using ScalarFn = std::function<Var<double>(Graph<double>&, Var<double>)>;

// Compares reverse-mode gradients of f at `point` with central differences.
// Error per coordinate is |analytic - numeric| / max(1, |analytic|); only
// coordinates with coords[i] != 0 are compared when `coords` is non-empty.
// Throws Error when eps is too small to perturb some checked coordinate.
GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& point, double eps, const Mask& coords = {});

}  // namespace gdino
