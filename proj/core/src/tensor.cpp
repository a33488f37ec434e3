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

#include "gdino/tensor.hpp"

#include <cmath>
#include <sstream>

#include "gdino/params.hpp"

namespace gdino {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> t) {
  Node n;
  n.op = "constant";
  n.shape = std::move(t.shape);
  n.value = std::move(t.data);
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Graph<T>::variable(Tensor<T> t) {
  Var<T> v = constant(std::move(t));
  node(v.id()).op = "variable";
  node(v.id()).requires_grad = grad_enabled_;
  return v;
}

template <typename T>
Var<T> Graph<T>::param(const ParamStore<T>& store, int id) {
  if (store_ != nullptr && store_ != &store) {
    throw Error("graph already bound to a different parameter store");
  }
  store_ = &store;
  if (auto it = param_nodes_.find(id); it != param_nodes_.end()) return Var<T>(this, it->second);
  Node n;
  n.op = "param";
  n.shape = store[id].value.shape;
  n.value = store[id].value.data;
  n.requires_grad = grad_enabled_;
  n.param_id = id;
  nodes_.push_back(std::move(n));
  const int node_id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(id, node_id);
  return Var<T>(this, node_id);
}

template <typename T>
Var<T> Graph<T>::emit(std::string_view op, Shape shape, std::vector<T> value, std::vector<int> inputs,
                      BackwardFn backward) {
  if (static_cast<std::int64_t>(value.size()) != numel(shape)) {
    throw ShapeError(std::string(op) + ": produced " + std::to_string(value.size()) +
                     " values for shape " + shape_str(shape));
  }
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!std::isfinite(value[i])) {
      throw NonFiniteError("non-finite value produced by op '" + std::string(op) + "' (node " +
                           std::to_string(nodes_.size()) + ", element " + std::to_string(i) + ")");
    }
  }
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.value = std::move(value);
  bool any = false;
  for (int in : inputs) any = any || node(in).requires_grad;
  n.requires_grad = grad_enabled_ && any;
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
std::vector<T>& Graph<T>::grad_buffer(int id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
  return n.grad;
}

template <typename T>
std::map<int, Tensor<T>> Graph<T>::backward(Var<T> loss) {
  if (!loss.valid() || &loss.graph() != this) throw Error("loss does not belong to this graph");
  Node& root = node(loss.id());
  if (root.value.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(root.shape));
  }
  for (auto& n : nodes_) n.grad.clear();
  grad_buffer(loss.id())[0] = T(1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (!std::isfinite(n.grad[i])) {
        throw NonFiniteError("non-finite gradient at node " + std::to_string(id) + " (op '" +
                             std::string(n.op) + "')");
      }
    }
    n.backward(*this, id);
  }
  std::map<int, Tensor<T>> grads;
  for (const auto& [param, node_id] : param_nodes_) {
    const Node& n = node(node_id);
    Tensor<T> g(n.shape);
    if (!n.grad.empty()) g.data = n.grad;
    grads.emplace(param, std::move(g));
  }
  return grads;
}

template <typename T>
Tensor<T> Graph<T>::grad(Var<T> v) const {
  const Node& n = node(v.id());
  Tensor<T> g(n.shape);
  if (!n.grad.empty()) g.data = n.grad;
  return g;
}

template <typename T>
int ParamStore<T>::add(std::string name, Tensor<T> init, ParamGroup group) {
  if (find(name) >= 0) throw Error("duplicate parameter name '" + name + "'");
  params_.push_back(Parameter<T>{std::move(name), std::move(init), group});
  return static_cast<int>(params_.size()) - 1;
}

template <typename T>
int ParamStore<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

template <typename T>
std::int64_t ParamStore<T>::total_scalars() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Graph<float>;
template class Graph<double>;
template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace gdino
