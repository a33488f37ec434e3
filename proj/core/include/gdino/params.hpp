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

#include <string>
#include <vector>

#include "gdino/tensor.hpp"

namespace gdino {

// Optimizer groups; backbones train at a discounted learning rate.
enum class ParamGroup { kDefault, kImageBackbone, kTextBackbone };

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  ParamGroup group = ParamGroup::kDefault;
};

// Owns every trainable tensor of a model, in registration order.
template <typename T>
class ParamStore {
 public:
  int add(std::string name, Tensor<T> init, ParamGroup group = ParamGroup::kDefault);

  int size() const { return static_cast<int>(params_.size()); }
  Parameter<T>& operator[](int id) { return params_.at(static_cast<std::size_t>(id)); }
  const Parameter<T>& operator[](int id) const { return params_.at(static_cast<std::size_t>(id)); }
  // -1 when absent.
  int find(const std::string& name) const;
  std::int64_t total_scalars() const;

  std::vector<Parameter<T>>& all() { return params_; }
  const std::vector<Parameter<T>>& all() const { return params_; }

 private:
  std::vector<Parameter<T>> params_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace gdino
