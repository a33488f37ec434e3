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

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gdino {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::int64_t>;
// Byte-per-entry boolean buffer; keeps spans and memcmp usable.
using Mask = std::vector<std::uint8_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array. Value type; copying copies the data.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), T(0)) {}
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }

  static Tensor full(Shape s, T value) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int i) const { return shape.at(i < 0 ? shape.size() + i : i); }
  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  T& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * shape.back() + c)]; }
  const T& at(std::int64_t r, std::int64_t c) const {
    return data[static_cast<std::size_t>(r * shape.back() + c)];
  }
};

template <typename T>
class Graph;
template <typename T>
class ParamStore;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph<T>& graph() const { return *graph_; }
  int id() const { return id_; }

  const Shape& shape() const;
  std::int64_t dim(int i) const;
  std::int64_t numel() const;
  std::span<const T> value() const;
  T item() const;
  Tensor<T> tensor() const;

 private:
  Graph<T>* graph_ = nullptr;
  int id_ = -1;
};

// Define-by-run tape. Nodes are appended in creation order, which is a
// topological order; backward walks it in reverse.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  struct Node {
    std::string_view op;
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<int> inputs;
    bool requires_grad = false;
    int param_id = -1;
    BackwardFn backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // With grad disabled no backward closures are recorded (inference mode).
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> t);
  Var<T> variable(Tensor<T> t);
  // Binds parameter `id` of `store`; repeated calls return the same node.
  Var<T> param(const ParamStore<T>& store, int id);

  // Appends an op result. Throws NonFiniteError if any output scalar is NaN/Inf.
  Var<T> emit(std::string_view op, Shape shape, std::vector<T> value, std::vector<int> inputs,
              BackwardFn backward);

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  bool needs_grad(int id) const { return node(id).requires_grad; }
  // Gradient buffer of `id`, zero-allocated on first access.
  std::vector<T>& grad_buffer(int id);

  // Reverse-mode sweep from a scalar loss. Returns d(loss)/d(param) for every
  // parameter bound to this graph (zeros when not reachable from the loss).
  std::map<int, Tensor<T>> backward(Var<T> loss);

  // Gradient of an arbitrary node after backward(); zeros if none reached it.
  Tensor<T> grad(Var<T> v) const;

 private:
  std::deque<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
  const ParamStore<T>* store_ = nullptr;
  bool grad_enabled_ = true;
};

template <typename T>
const Shape& Var<T>::shape() const {
  return graph_->node(id_).shape;
}
template <typename T>
std::int64_t Var<T>::dim(int i) const {
  const Shape& s = shape();
  return s.at(i < 0 ? s.size() + i : i);
}
template <typename T>
std::int64_t Var<T>::numel() const {
  return static_cast<std::int64_t>(graph_->node(id_).value.size());
}
template <typename T>
std::span<const T> Var<T>::value() const {
  return graph_->node(id_).value;
}
template <typename T>
T Var<T>::item() const {
  const auto& v = graph_->node(id_).value;
  if (v.size() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape()));
  return v[0];
}
template <typename T>
Tensor<T> Var<T>::tensor() const {
  const auto& n = graph_->node(id_);
  return Tensor<T>(n.shape, n.value);
}

extern template struct Tensor<float>;
extern template struct Tensor<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace gdino
