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
#include <vector>

#include "gdino/config.hpp"
#include "gdino/params.hpp"

namespace gdino {

// Global L2 norm over a gradient map, accumulated in double in key order.
double grad_norm(const std::map<int, Tensor<float>>& grads);

// Scales every gradient by max_norm / (norm + 1e-6) when norm exceeds
// max_norm; returns the norm before clipping. max_norm <= 0 disables.
double clip_grad_norm(std::map<int, Tensor<float>>& grads, double max_norm);

// Adam with decoupled weight decay. Backbone parameter groups use
// lr * backbone_lr_mult; the rate ramps linearly over warmup_steps.
class AdamW {
 public:
  AdamW(const OptimConfig& cfg, const ParamStore<float>& store);

  double learning_rate(int step) const;

  // Applies one update from `grads` (parameters without a gradient are left
  // untouched) and advances the step counter.
  void step(ParamStore<float>& store, const std::map<int, Tensor<float>>& grads);

  int steps_taken() const { return t_; }

 private:
  OptimConfig cfg_;
  std::vector<std::vector<float>> m_, v_;
  int t_ = 0;
};

}  // namespace gdino
