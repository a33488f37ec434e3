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

#include "gdino/optim.hpp"

#include <cmath>

namespace gdino {

double grad_norm(const std::map<int, Tensor<float>>& grads) {
  double sq = 0;
  for (const auto& [id, g] : grads)
    for (float v : g.data) sq += static_cast<double>(v) * v;
  return std::sqrt(sq);
}

double clip_grad_norm(std::map<int, Tensor<float>>& grads, double max_norm) {
  const double norm = grad_norm(grads);
  if (max_norm > 0 && norm > max_norm) {
    const auto s = static_cast<float>(max_norm / (norm + 1e-6));
    for (auto& [id, g] : grads)
      for (float& v : g.data) v *= s;
  }
  return norm;
}

AdamW::AdamW(const OptimConfig& cfg, const ParamStore<float>& store) : cfg_(cfg) {
  for (const auto& p : store.all()) {
    m_.emplace_back(p.value.data.size(), 0.0f);
    v_.emplace_back(p.value.data.size(), 0.0f);
  }
}

double AdamW::learning_rate(int step) const {
  if (cfg_.warmup_steps > 0 && step < cfg_.warmup_steps) {
    return cfg_.lr * static_cast<double>(step + 1) / static_cast<double>(cfg_.warmup_steps);
  }
  return cfg_.lr;
}

void AdamW::step(ParamStore<float>& store, const std::map<int, Tensor<float>>& grads) {
  if (static_cast<std::size_t>(store.size()) != m_.size()) throw Error("optimizer: parameter store changed size");
  const double base_lr = learning_rate(t_);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (const auto& [id, g] : grads) {
    auto& p = store[id];
    if (g.data.size() != p.value.data.size()) throw ShapeError("optimizer: gradient shape mismatch for " + p.name);
    const double lr = p.group == ParamGroup::kDefault ? base_lr : base_lr * cfg_.backbone_lr_mult;
    auto& m = m_[static_cast<std::size_t>(id)];
    auto& v = v_[static_cast<std::size_t>(id)];
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double gi = g.data[i];
      m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi);
      v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi);
      const double mhat = m[i] / bc1, vhat = v[i] / bc2;
      double w = p.value.data[i];
      w -= lr * cfg_.weight_decay * w;
      w -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      p.value.data[i] = static_cast<float>(w);
    }
  }
}

}  // namespace gdino
