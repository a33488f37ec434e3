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

#include "gdino/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gdino/kernels.hpp"

namespace gdino {
namespace {

template <typename T>
Graph<T>& same_graph(Var<T> a, Var<T> b, const char* op) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) {
    throw Error(std::string(op) + ": operands belong to different graphs");
  }
  return a.graph();
}

template <typename T>
void require_same_shape(Var<T> a, Var<T> b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(Var<T> a, int rank, const char* op) {
  if (static_cast<int>(a.shape().size()) != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

// Elementwise unary op: forward f(x), backward dx = go * df(x, y).
template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, const char* op, F f, DF df) {
  const auto av = a.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const int ia = a.id();
  return a.graph().emit(op, a.shape(), std::move(out), {ia}, [ia, df](Graph<T>& g, int self) {
    const auto& n = g.node(self);
    const auto& x = g.node(ia).value;
    auto& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * df(x[i], n.value[i]);
  });
}

template <typename T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "add");
  require_same_shape(a, b, "add");
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const int ia = a.id(), ib = b.id();
  return g.emit("add", a.shape(), std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    if (g.needs_grad(ia)) accumulate(g.grad_buffer(ia), go);
    if (g.needs_grad(ib)) accumulate(g.grad_buffer(ib), go);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "sub");
  require_same_shape(a, b, "sub");
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const int ia = a.id(), ib = b.id();
  return g.emit("sub", a.shape(), std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    if (g.needs_grad(ia)) accumulate(g.grad_buffer(ia), go);
    if (g.needs_grad(ib)) {
      auto& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "mul");
  require_same_shape(a, b, "mul");
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return g.emit("mul", a.shape(), std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    const auto& x = g.node(ia).value;
    const auto& y = g.node(ib).value;
    if (g.needs_grad(ia)) {
      auto& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * y[i];
    }
    if (g.needs_grad(ib)) {
      auto& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * x[i];
    }
  });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "div");
  require_same_shape(a, b, "div");
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  const int ia = a.id(), ib = b.id();
  return g.emit("div", a.shape(), std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, int self) {
    const auto& n = g.node(self);
    const auto& y = g.node(ib).value;
    if (g.needs_grad(ia)) {
      auto& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] / y[i];
    }
    if (g.needs_grad(ib)) {
      auto& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i] * n.value[i] / y[i];
    }
  });
}

namespace {
template <typename T>
Var<T> select_op(Var<T> a, Var<T> b, bool take_min, const char* op) {
  Graph<T>& g = same_graph(a, b, op);
  require_same_shape(a, b, op);
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  Mask from_a(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Ties route the gradient to the first operand.
    from_a[i] = take_min ? (av[i] <= bv[i]) : (av[i] >= bv[i]);
    out[i] = from_a[i] ? av[i] : bv[i];
  }
  const int ia = a.id(), ib = b.id();
  return g.emit(op, a.shape(), std::move(out), {ia, ib},
                [ia, ib, from_a = std::move(from_a)](Graph<T>& g, int self) {
                  const auto& go = g.node(self).grad;
                  if (g.needs_grad(ia)) {
                    auto& ga = g.grad_buffer(ia);
                    for (std::size_t i = 0; i < ga.size(); ++i)
                      if (from_a[i]) ga[i] += go[i];
                  }
                  if (g.needs_grad(ib)) {
                    auto& gb = g.grad_buffer(ib);
                    for (std::size_t i = 0; i < gb.size(); ++i)
                      if (!from_a[i]) gb[i] += go[i];
                  }
                });
}
}  // namespace

template <typename T>
Var<T> minimum(Var<T> a, Var<T> b) {
  return select_op(a, b, true, "minimum");
}

template <typename T>
Var<T> maximum(Var<T> a, Var<T> b) {
  return select_op(a, b, false, "maximum");
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "add_row");
  const std::int64_t n = b.numel();
  if (b.shape().size() != 1 || a.shape().empty() || a.shape().back() != n) {
    throw ShapeError("add_row: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
  }
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % n];
  const int ia = a.id(), ib = b.id();
  return g.emit("add_row", a.shape(), std::move(out), {ia, ib}, [ia, ib, n](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    if (g.needs_grad(ia)) accumulate(g.grad_buffer(ia), go);
    if (g.needs_grad(ib)) {
      auto& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i % n] += go[i];
    }
  });
}

template <typename T>
Var<T> mul_row(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "mul_row");
  const std::int64_t n = b.numel();
  if (b.shape().size() != 1 || a.shape().empty() || a.shape().back() != n) {
    throw ShapeError("mul_row: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i % n];
  const int ia = a.id(), ib = b.id();
  return g.emit("mul_row", a.shape(), std::move(out), {ia, ib}, [ia, ib, n](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    const auto& x = g.node(ia).value;
    const auto& y = g.node(ib).value;
    if (g.needs_grad(ia)) {
      auto& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * y[i % n];
    }
    if (g.needs_grad(ib)) {
      auto& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i % n] += go[i] * x[i];
    }
  });
}

template <typename T>
Var<T> add_scalar_var(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "add_scalar_var");
  if (b.numel() != 1) throw ShapeError("add_scalar_var: bias must have one element");
  const auto av = a.value();
  const T s = b.value()[0];
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + s;
  const int ia = a.id(), ib = b.id();
  return g.emit("add_scalar_var", a.shape(), std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    if (g.needs_grad(ia)) accumulate(g.grad_buffer(ia), go);
    if (g.needs_grad(ib)) {
      T total = 0;
      for (T v : go) total += v;
      g.grad_buffer(ib)[0] += total;
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  return unary<T>(a, "scale", [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T s) {
  return unary<T>(a, "add_scalar", [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> neg(Var<T> a) {
  return unary<T>(a, "neg", [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> relu(Var<T> a) {
  return unary<T>(
      a, "relu", [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary<T>(
      a, "sigmoid",
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary<T>(a, "exp", [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> a) {
  return unary<T>(a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> abs(Var<T> a) {
  return unary<T>(
      a, "abs", [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  return unary<T>(
      a, "clamp", [lo, hi](T x) { return std::clamp(x, lo, hi); },
      [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> inverse_sigmoid(Var<T> a, T eps) {
  return unary<T>(
      a, "inverse_sigmoid",
      [eps](T x) {
        const T p = std::clamp(x, eps, T(1) - eps);
        return std::log(p / (T(1) - p));
      },
      [eps](T x, T) {
        if (x < eps || x > T(1) - eps) return T(0);
        return T(1) / (x * (T(1) - x));
      });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T total = 0;
  for (T v : a.value()) total += v;
  const int ia = a.id();
  return a.graph().emit("sum", Shape{}, {total}, {ia}, [ia](Graph<T>& g, int self) {
    const T go = g.node(self).grad[0];
    for (auto& v : g.grad_buffer(ia)) v += go;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const auto n = a.numel();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> sum_cols(Var<T> a) {
  require_rank(a, 2, "sum_cols");
  const std::int64_t m = a.dim(0), n = a.dim(1);
  const auto av = a.value();
  std::vector<T> out(static_cast<std::size_t>(m), T(0));
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i] += av[i * n + j];
  const int ia = a.id();
  return a.graph().emit("sum_cols", Shape{m}, std::move(out), {ia}, [ia, m, n](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    auto& ga = g.grad_buffer(ia);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) ga[i * n + j] += go[i];
  });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<T> out(a.value().begin(), a.value().end());
  const int ia = a.id();
  return a.graph().emit("reshape", std::move(shape), std::move(out), {ia}, [ia](Graph<T>& g, int self) {
    accumulate(g.grad_buffer(ia), g.node(self).grad);
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  require_rank(a, 2, "transpose");
  const std::int64_t m = a.dim(0), n = a.dim(1);
  std::vector<T> out(a.value().size());
  kernels::transpose(a.value().data(), out.data(), m, n);
  const int ia = a.id();
  return a.graph().emit("transpose", Shape{n, m}, std::move(out), {ia}, [ia, m, n](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    auto& ga = g.grad_buffer(ia);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) ga[i * n + j] += go[j * m + i];
  });
}

template <typename T>
Var<T> detach(Var<T> a) {
  return a.graph().constant(a.tensor());
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::span<const std::int64_t> rows) {
  require_rank(a, 2, "gather_rows");
  const std::int64_t m = a.dim(0), n = a.dim(1);
  const auto k = static_cast<std::int64_t>(rows.size());
  std::vector<T> out(static_cast<std::size_t>(k * n));
  const auto av = a.value();
  for (std::int64_t r = 0; r < k; ++r) {
    const std::int64_t src = rows[r];
    if (src < 0 || src >= m) throw ShapeError("gather_rows: index " + std::to_string(src) + " out of range");
    std::copy_n(av.begin() + src * n, n, out.begin() + r * n);
  }
  const int ia = a.id();
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  return a.graph().emit("gather_rows", Shape{k, n}, std::move(out), {ia},
                        [ia, n, idx = std::move(idx)](Graph<T>& g, int self) {
                          const auto& go = g.node(self).grad;
                          auto& ga = g.grad_buffer(ia);
                          for (std::size_t r = 0; r < idx.size(); ++r)
                            for (std::int64_t j = 0; j < n; ++j) ga[idx[r] * n + j] += go[r * n + j];
                        });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::int64_t start, std::int64_t count) {
  if (a.shape().empty() || start < 0 || count < 0 || start + count > a.dim(0)) {
    throw ShapeError("slice_rows out of range on " + shape_str(a.shape()));
  }
  const std::int64_t row = a.numel() / std::max<std::int64_t>(a.dim(0), 1);
  Shape shape = a.shape();
  shape[0] = count;
  std::vector<T> out(a.value().begin() + start * row, a.value().begin() + (start + count) * row);
  const int ia = a.id();
  return a.graph().emit("slice_rows", std::move(shape), std::move(out), {ia},
                        [ia, start, row](Graph<T>& g, int self) {
                          const auto& go = g.node(self).grad;
                          auto& ga = g.grad_buffer(ia);
                          for (std::size_t i = 0; i < go.size(); ++i) ga[start * row + i] += go[i];
                        });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::int64_t start, std::int64_t count) {
  require_rank(a, 2, "slice_cols");
  const std::int64_t m = a.dim(0), n = a.dim(1);
  if (start < 0 || count < 0 || start + count > n) throw ShapeError("slice_cols out of range");
  std::vector<T> out(static_cast<std::size_t>(m * count));
  const auto av = a.value();
  for (std::int64_t i = 0; i < m; ++i) std::copy_n(av.begin() + i * n + start, count, out.begin() + i * count);
  const int ia = a.id();
  return a.graph().emit("slice_cols", Shape{m, count}, std::move(out), {ia},
                        [ia, m, n, start, count](Graph<T>& g, int self) {
                          const auto& go = g.node(self).grad;
                          auto& ga = g.grad_buffer(ia);
                          for (std::int64_t i = 0; i < m; ++i)
                            for (std::int64_t j = 0; j < count; ++j) ga[i * n + start + j] += go[i * count + j];
                        });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  Graph<T>& g = parts[0].graph();
  Shape shape = parts[0].shape();
  if (shape.empty()) throw ShapeError("concat_rows needs rank >= 1");
  std::int64_t rows = 0;
  std::vector<T> out;
  std::vector<int> ids;
  std::vector<std::int64_t> offsets;
  for (const auto& p : parts) {
    same_graph(parts[0], p, "concat_rows");
    Shape tail_a(shape.begin() + 1, shape.end()), tail_b(p.shape().begin() + 1, p.shape().end());
    if (p.shape().empty() || tail_a != tail_b) throw ShapeError("concat_rows: trailing shape mismatch");
    offsets.push_back(static_cast<std::int64_t>(out.size()));
    out.insert(out.end(), p.value().begin(), p.value().end());
    rows += p.dim(0);
    ids.push_back(p.id());
  }
  shape[0] = rows;
  return g.emit("concat_rows", std::move(shape), std::move(out), ids, [ids, offsets](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.needs_grad(ids[k])) continue;
      auto& gp = g.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[offsets[k] + i];
    }
  });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  Graph<T>& g = parts[0].graph();
  const std::int64_t m = parts[0].dim(0);
  std::int64_t total = 0;
  std::vector<int> ids;
  std::vector<std::int64_t> widths;
  for (const auto& p : parts) {
    same_graph(parts[0], p, "concat_cols");
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw ShapeError("concat_cols: row count mismatch");
    widths.push_back(p.dim(1));
    total += p.dim(1);
    ids.push_back(p.id());
  }
  std::vector<T> out(static_cast<std::size_t>(m * total));
  std::int64_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].value();
    for (std::int64_t i = 0; i < m; ++i)
      std::copy_n(v.begin() + i * widths[k], widths[k], out.begin() + i * total + col);
    col += widths[k];
  }
  return g.emit("concat_cols", Shape{m, total}, std::move(out), ids,
                [ids, widths, m, total](Graph<T>& g, int self) {
                  const auto& go = g.node(self).grad;
                  std::int64_t col = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (g.needs_grad(ids[k])) {
                      auto& gp = g.grad_buffer(ids[k]);
                      for (std::int64_t i = 0; i < m; ++i)
                        for (std::int64_t j = 0; j < widths[k]; ++j)
                          gp[i * widths[k] + j] += go[i * total + col + j];
                    }
                    col += widths[k];
                  }
                });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "matmul");
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<T> out(static_cast<std::size_t>(m * n), T(0));
  kernels::gemm_acc(a.value().data(), b.value().data(), out.data(), m, k, n);
  const int ia = a.id(), ib = b.id();
  return g.emit("matmul", Shape{m, n}, std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    if (g.needs_grad(ia)) {
      std::vector<T> bt(static_cast<std::size_t>(k * n));
      kernels::transpose(g.node(ib).value.data(), bt.data(), k, n);
      kernels::gemm_acc(go.data(), bt.data(), g.grad_buffer(ia).data(), m, n, k);
    }
    if (g.needs_grad(ib)) {
      kernels::gemm_tn_acc(g.node(ia).value.data(), go.data(), g.grad_buffer(ib).data(), k, m, n);
    }
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b, "matmul_nt");
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  std::vector<T> bt(static_cast<std::size_t>(k * n));
  kernels::transpose(b.value().data(), bt.data(), n, k);
  std::vector<T> out(static_cast<std::size_t>(m * n), T(0));
  kernels::gemm_acc(a.value().data(), bt.data(), out.data(), m, k, n);
  const int ia = a.id(), ib = b.id();
  return g.emit("matmul_nt", Shape{m, n}, std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    if (g.needs_grad(ia)) kernels::gemm_acc(go.data(), g.node(ib).value.data(), g.grad_buffer(ia).data(), m, n, k);
    if (g.needs_grad(ib)) {
      kernels::gemm_tn_acc(go.data(), g.node(ia).value.data(), g.grad_buffer(ib).data(), n, m, k);
    }
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  Graph<T>& g = same_graph(x, w, "linear");
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::int64_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k) throw ShapeError("linear: " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
  const bool has_bias = b.valid();
  if (has_bias && (b.shape().size() != 1 || b.dim(0) != n)) throw ShapeError("linear: bias shape");
  std::vector<T> out(static_cast<std::size_t>(m * n), T(0));
  if (has_bias) {
    const auto bv = b.value();
    for (std::int64_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * n);
  }
  kernels::gemm_acc(x.value().data(), w.value().data(), out.data(), m, k, n);
  std::vector<int> inputs{x.id(), w.id()};
  if (has_bias) inputs.push_back(b.id());
  const int ix = x.id(), iw = w.id(), ib = has_bias ? b.id() : -1;
  return g.emit("linear", Shape{m, n}, std::move(out), inputs, [ix, iw, ib, m, k, n](Graph<T>& g, int self) {
    const auto& go = g.node(self).grad;
    if (g.needs_grad(ix)) {
      std::vector<T> wt(static_cast<std::size_t>(k * n));
      kernels::transpose(g.node(iw).value.data(), wt.data(), k, n);
      kernels::gemm_acc(go.data(), wt.data(), g.grad_buffer(ix).data(), m, n, k);
    }
    if (g.needs_grad(iw)) {
      kernels::gemm_tn_acc(g.node(ix).value.data(), go.data(), g.grad_buffer(iw).data(), k, m, n);
    }
    if (ib >= 0 && g.needs_grad(ib)) {
      auto& gb = g.grad_buffer(ib);
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  Graph<T>& g = same_graph(x, gamma, "layer_norm");
  const std::int64_t n = x.shape().empty() ? 0 : x.shape().back();
  if (n == 0 || gamma.numel() != n || beta.numel() != n) throw ShapeError("layer_norm: parameter shape");
  const std::int64_t m = x.numel() / n;
  const auto xv = x.value(), gv = gamma.value(), bv = beta.value();
  std::vector<T> out(xv.size());
  std::vector<T> xhat(xv.size());
  std::vector<T> rstd(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    double mu = 0;
    for (std::int64_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const T r = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    rstd[i] = r;
    for (std::int64_t j = 0; j < n; ++j) {
      const T h = static_cast<T>((row[j] - mu)) * r;
      xhat[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return g.emit("layer_norm", x.shape(), std::move(out), {ix, ig, ib},
                [ix, ig, ib, m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Graph<T>& g, int self) {
                  const auto& go = g.node(self).grad;
                  const auto& gv = g.node(ig).value;
                  if (g.needs_grad(ig) || g.needs_grad(ib)) {
                    auto& gg = g.grad_buffer(ig);
                    auto& gb = g.grad_buffer(ib);
                    for (std::int64_t i = 0; i < m; ++i)
                      for (std::int64_t j = 0; j < n; ++j) {
                        gg[j] += go[i * n + j] * xhat[i * n + j];
                        gb[j] += go[i * n + j];
                      }
                  }
                  if (g.needs_grad(ix)) {
                    auto& gx = g.grad_buffer(ix);
                    for (std::int64_t i = 0; i < m; ++i) {
                      double s1 = 0, s2 = 0;
                      for (std::int64_t j = 0; j < n; ++j) {
                        const double dh = go[i * n + j] * gv[j];
                        s1 += dh;
                        s2 += dh * xhat[i * n + j];
                      }
                      s1 /= static_cast<double>(n);
                      s2 /= static_cast<double>(n);
                      for (std::int64_t j = 0; j < n; ++j) {
                        const double dh = go[i * n + j] * gv[j];
                        gx[i * n + j] += static_cast<T>(rstd[i] * (dh - s1 - xhat[i * n + j] * s2));
                      }
                    }
                  }
                });
}

template <typename T>
Var<T> masked_softmax(Var<T> x, const Mask& mask) {
  if (x.shape().empty()) throw ShapeError("masked_softmax on scalar");
  const std::int64_t n = x.shape().back();
  const std::int64_t m = n == 0 ? 0 : x.numel() / n;
  if (!mask.empty() && static_cast<std::int64_t>(mask.size()) != x.numel()) {
    throw ShapeError("masked_softmax: mask has " + std::to_string(mask.size()) + " entries for logits " +
                     shape_str(x.shape()));
  }
  const auto xv = x.value();
  std::vector<T> out(xv.size(), T(0));
  for (std::int64_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    const std::uint8_t* allow = mask.empty() ? nullptr : mask.data() + i * n;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::int64_t j = 0; j < n; ++j)
      if (!allow || allow[j]) mx = std::max(mx, row[j]);
    if (mx == -std::numeric_limits<T>::infinity()) continue;  // fully masked row
    double z = 0;
    for (std::int64_t j = 0; j < n; ++j)
      if (!allow || allow[j]) z += std::exp(static_cast<double>(row[j] - mx));
    for (std::int64_t j = 0; j < n; ++j)
      if (!allow || allow[j]) out[i * n + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / z);
  }
  const int ix = x.id();
  return x.graph().emit("masked_softmax", x.shape(), std::move(out), {ix}, [ix, m, n](Graph<T>& g, int self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(ix);
    for (std::int64_t i = 0; i < m; ++i) {
      const T* y = node.value.data() + i * n;
      const T* go = node.grad.data() + i * n;
      double dot = 0;
      for (std::int64_t j = 0; j < n; ++j) dot += static_cast<double>(go[j]) * y[j];
      // y == 0 at masked entries, so they receive exactly zero gradient.
      for (std::int64_t j = 0; j < n; ++j) gx[i * n + j] += static_cast<T>(y[j] * (go[j] - dot));
    }
  });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::int64_t> targets) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::int64_t m = logits.dim(0), n = logits.dim(1);
  if (static_cast<std::int64_t>(targets.size()) != m) throw ShapeError("softmax_cross_entropy: target count");
  const auto xv = logits.value();
  std::vector<T> prob(xv.size());
  double loss = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || targets[i] >= n) throw ShapeError("softmax_cross_entropy: target out of range");
    const T* row = xv.data() + i * n;
    const T mx = *std::max_element(row, row + n);
    double z = 0;
    for (std::int64_t j = 0; j < n; ++j) z += std::exp(static_cast<double>(row[j] - mx));
    for (std::int64_t j = 0; j < n; ++j) prob[i * n + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / z);
    loss += std::log(z) - static_cast<double>(row[targets[i]] - mx);
  }
  loss /= static_cast<double>(std::max<std::int64_t>(m, 1));
  const int ix = logits.id();
  std::vector<std::int64_t> tg(targets.begin(), targets.end());
  return logits.graph().emit("softmax_cross_entropy", Shape{}, {static_cast<T>(loss)}, {ix},
                             [ix, m, n, prob = std::move(prob), tg = std::move(tg)](Graph<T>& g, int self) {
                               const T go = g.node(self).grad[0] / static_cast<T>(std::max<std::int64_t>(m, 1));
                               auto& gx = g.grad_buffer(ix);
                               for (std::int64_t i = 0; i < m; ++i)
                                 for (std::int64_t j = 0; j < n; ++j)
                                   gx[i * n + j] += go * (prob[i * n + j] - (j == tg[i] ? T(1) : T(0)));
                             });
}

template <typename T>
Var<T> sigmoid_focal_loss(Var<T> logits, std::span<const T> targets, const Mask& valid, T alpha, T gamma) {
  const auto n = static_cast<std::size_t>(logits.numel());
  if (targets.size() != n || (!valid.empty() && valid.size() != n)) {
    throw ShapeError("sigmoid_focal_loss: targets/valid size mismatch for " + shape_str(logits.shape()));
  }
  const auto xv = logits.value();
  std::vector<T> dloss(n, T(0));
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const double x = xv[i];
    const double y = targets[i];
    const double p = 1.0 / (1.0 + std::exp(-x));
    // Stable BCE with logits: max(x,0) - x*y + log(1 + exp(-|x|)).
    const double ce = std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    const double pt = p * y + (1 - p) * (1 - y);
    const double at = alpha * y + (1 - alpha) * (1 - y);
    const double mod = std::pow(1 - pt, static_cast<double>(gamma));
    total += at * mod * ce;
    // d/dx [ (1-pt)^g * ce ]: dce/dx = p - y; dpt/dx = (2y - 1) p (1 - p).
    const double dpt = (2 * y - 1) * p * (1 - p);
    const double dmod = (1 - pt) > 0 ? -gamma * std::pow(1 - pt, static_cast<double>(gamma) - 1) * dpt : 0.0;
    dloss[i] = static_cast<T>(at * (dmod * ce + mod * (p - y)));
  }
  const int ix = logits.id();
  return logits.graph().emit("sigmoid_focal_loss", Shape{}, {static_cast<T>(total)}, {ix},
                             [ix, dloss = std::move(dloss)](Graph<T>& g, int self) {
                               const T go = g.node(self).grad[0];
                               auto& gx = g.grad_buffer(ix);
                               for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go * dloss[i];
                             });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int kernel, int stride, int pad) {
  Graph<T>& g = same_graph(x, w, "conv2d");
  require_rank(x, 3, "conv2d");
  require_rank(w, 2, "conv2d");
  const std::int64_t h = x.dim(0), wd = x.dim(1), c = x.dim(2);
  const std::int64_t patch = static_cast<std::int64_t>(kernel) * kernel * c;
  const std::int64_t co = w.dim(1);
  if (w.dim(0) != patch) throw ShapeError("conv2d: weight " + shape_str(w.shape()) + " for input " + shape_str(x.shape()));
  if (b.valid() && b.numel() != co) throw ShapeError("conv2d: bias shape");
  const std::int64_t ho = (h + 2 * pad - kernel) / stride + 1;
  const std::int64_t wo = (wd + 2 * pad - kernel) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: input too small");
  const std::int64_t rows = ho * wo;
  // im2col
  std::vector<T> cols(static_cast<std::size_t>(rows * patch), T(0));
  const auto xv = x.value();
  for (std::int64_t oy = 0; oy < ho; ++oy)
    for (std::int64_t ox = 0; ox < wo; ++ox) {
      T* dst = cols.data() + (oy * wo + ox) * patch;
      for (int ky = 0; ky < kernel; ++ky) {
        const std::int64_t iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          const std::int64_t ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= wd) continue;
          std::copy_n(xv.data() + (iy * wd + ix) * c, c, dst + (ky * kernel + kx) * c);
        }
      }
    }
  std::vector<T> out(static_cast<std::size_t>(rows * co), T(0));
  if (b.valid()) {
    const auto bv = b.value();
    for (std::int64_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), out.begin() + r * co);
  }
  kernels::gemm_acc(cols.data(), w.value().data(), out.data(), rows, patch, co);
  std::vector<int> inputs{x.id(), w.id()};
  if (b.valid()) inputs.push_back(b.id());
  const int ixn = x.id(), iw = w.id(), ib = b.valid() ? b.id() : -1;
  return g.emit("conv2d", Shape{ho, wo, co}, std::move(out), inputs,
                [=, cols = std::move(cols)](Graph<T>& g, int self) {
                  const auto& go = g.node(self).grad;
                  if (g.needs_grad(iw)) {
                    kernels::gemm_tn_acc(cols.data(), go.data(), g.grad_buffer(iw).data(), patch, rows, co);
                  }
                  if (ib >= 0 && g.needs_grad(ib)) {
                    auto& gb = g.grad_buffer(ib);
                    for (std::int64_t r = 0; r < rows; ++r)
                      for (std::int64_t j = 0; j < co; ++j) gb[j] += go[r * co + j];
                  }
                  if (g.needs_grad(ixn)) {
                    std::vector<T> wt(static_cast<std::size_t>(patch * co));
                    kernels::transpose(g.node(iw).value.data(), wt.data(), patch, co);
                    std::vector<T> dcols(cols.size(), T(0));
                    kernels::gemm_acc(go.data(), wt.data(), dcols.data(), rows, co, patch);
                    auto& gx = g.grad_buffer(ixn);
                    for (std::int64_t oy = 0; oy < ho; ++oy)
                      for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const T* src = dcols.data() + (oy * wo + ox) * patch;
                        for (int ky = 0; ky < kernel; ++ky) {
                          const std::int64_t iy = oy * stride - pad + ky;
                          if (iy < 0 || iy >= h) continue;
                          for (int kx = 0; kx < kernel; ++kx) {
                            const std::int64_t ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            T* dst = gx.data() + (iy * wd + ix) * c;
                            const T* s = src + (ky * kernel + kx) * c;
                            for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += s[ch];
                          }
                        }
                      }
                  }
                });
}

#define GDINO_INSTANTIATE_OPS(T)                                                                   \
  template Var<T> add(Var<T>, Var<T>);                                                             \
  template Var<T> sub(Var<T>, Var<T>);                                                             \
  template Var<T> mul(Var<T>, Var<T>);                                                             \
  template Var<T> div(Var<T>, Var<T>);                                                             \
  template Var<T> minimum(Var<T>, Var<T>);                                                         \
  template Var<T> maximum(Var<T>, Var<T>);                                                         \
  template Var<T> add_row(Var<T>, Var<T>);                                                         \
  template Var<T> mul_row(Var<T>, Var<T>);                                                         \
  template Var<T> add_scalar_var(Var<T>, Var<T>);                                                  \
  template Var<T> scale(Var<T>, T);                                                                \
  template Var<T> add_scalar(Var<T>, T);                                                           \
  template Var<T> neg(Var<T>);                                                                     \
  template Var<T> relu(Var<T>);                                                                    \
  template Var<T> sigmoid(Var<T>);                                                                 \
  template Var<T> exp(Var<T>);                                                                     \
  template Var<T> log(Var<T>);                                                                     \
  template Var<T> abs(Var<T>);                                                                     \
  template Var<T> clamp(Var<T>, T, T);                                                             \
  template Var<T> inverse_sigmoid(Var<T>, T);                                                      \
  template Var<T> sum(Var<T>);                                                                     \
  template Var<T> mean(Var<T>);                                                                    \
  template Var<T> sum_cols(Var<T>);                                                                \
  template Var<T> reshape(Var<T>, Shape);                                                          \
  template Var<T> transpose(Var<T>);                                                               \
  template Var<T> detach(Var<T>);                                                                  \
  template Var<T> gather_rows(Var<T>, std::span<const std::int64_t>);                              \
  template Var<T> slice_rows(Var<T>, std::int64_t, std::int64_t);                                  \
  template Var<T> slice_cols(Var<T>, std::int64_t, std::int64_t);                                  \
  template Var<T> concat_rows(std::span<const Var<T>>);                                            \
  template Var<T> concat_cols(std::span<const Var<T>>);                                            \
  template Var<T> matmul(Var<T>, Var<T>);                                                          \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                                       \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                                  \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                           \
  template Var<T> masked_softmax(Var<T>, const Mask&);                                             \
  template Var<T> softmax_cross_entropy(Var<T>, std::span<const std::int64_t>);                    \
  template Var<T> sigmoid_focal_loss(Var<T>, std::span<const T>, const Mask&, T, T);               \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int, int);

GDINO_INSTANTIATE_OPS(float)
GDINO_INSTANTIATE_OPS(double)

#undef GDINO_INSTANTIATE_OPS

}  // namespace gdino
