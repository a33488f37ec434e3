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

#include "gdino/attention_ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gdino {

template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, int heads, const AttnMask& mask) {
  if (&q.graph() != &k.graph() || &q.graph() != &v.graph()) throw Error("attention: mixed graphs");
  if (q.shape().size() != 2 || k.shape().size() != 2 || v.shape() != k.shape() || q.dim(1) != k.dim(1)) {
    throw ShapeError("attention: q " + shape_str(q.shape()) + " k " + shape_str(k.shape()) + " v " +
                     shape_str(v.shape()));
  }
  const std::int64_t n = q.dim(0), m = k.dim(0), d = q.dim(1);
  if (heads <= 0 || d % heads != 0) throw ShapeError("attention: width not divisible by head count");
  if ((!mask.keys.empty() && static_cast<std::int64_t>(mask.keys.size()) != m) ||
      (!mask.pairs.empty() && static_cast<std::int64_t>(mask.pairs.size()) != n * m)) {
    throw ShapeError("attention: mask size mismatch");
  }
  const std::int64_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto qv = q.value(), kv = k.value(), vv = v.value();

  // Allowed key lists per query (shared by all heads).
  std::vector<std::vector<std::int32_t>> keys(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    auto& list = keys[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < m; ++j)
      if (mask.allowed(i, j, m)) list.push_back(static_cast<std::int32_t>(j));
  }

  std::vector<T> out(static_cast<std::size_t>(n * d), T(0));
  // probs[h][i][slot] aligned with keys[i].
  std::vector<std::vector<T>> probs(static_cast<std::size_t>(heads * n));
  std::vector<double> scores;
  std::vector<double> acc(static_cast<std::size_t>(dh));
  for (int h = 0; h < heads; ++h) {
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& list = keys[static_cast<std::size_t>(i)];
      auto& p = probs[static_cast<std::size_t>(h * n + i)];
      p.assign(list.size(), T(0));
      if (list.empty()) continue;
      const T* qi = qv.data() + i * d + h * dh;
      scores.assign(list.size(), 0.0);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < list.size(); ++s) {
        const T* kj = kv.data() + list[s] * d + h * dh;
        double dot = 0;
        for (std::int64_t c = 0; c < dh; ++c) dot += static_cast<double>(qi[c]) * kj[c];
        scores[s] = dot * scale;
        mx = std::max(mx, scores[s]);
      }
      double z = 0;
      for (std::size_t s = 0; s < list.size(); ++s) {
        scores[s] = std::exp(scores[s] - mx);
        z += scores[s];
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t s = 0; s < list.size(); ++s) {
        const double w = scores[s] / z;
        p[s] = static_cast<T>(w);
        const T* vj = vv.data() + list[s] * d + h * dh;
        for (std::int64_t c = 0; c < dh; ++c) acc[c] += w * vj[c];
      }
      T* oi = out.data() + i * d + h * dh;
      for (std::int64_t c = 0; c < dh; ++c) oi[c] = static_cast<T>(acc[c]);
    }
  }

  const int iq = q.id(), ik = k.id(), iv = v.id();
  return q.graph().emit(
      "multi_head_attention", Shape{n, d}, std::move(out), {iq, ik, iv},
      [=, keys = std::move(keys), probs = std::move(probs)](Graph<T>& g, int self) {
        const auto& go = g.node(self).grad;
        const auto& qv = g.node(iq).value;
        const auto& kv = g.node(ik).value;
        const auto& vv = g.node(iv).value;
        const bool need_q = g.needs_grad(iq), need_k = g.needs_grad(ik), need_v = g.needs_grad(iv);
        std::vector<T>* gq = need_q ? &g.grad_buffer(iq) : nullptr;
        std::vector<T>* gk = need_k ? &g.grad_buffer(ik) : nullptr;
        std::vector<T>* gv = need_v ? &g.grad_buffer(iv) : nullptr;
        std::vector<double> dp;
        for (int h = 0; h < heads; ++h) {
          for (std::int64_t i = 0; i < n; ++i) {
            const auto& list = keys[static_cast<std::size_t>(i)];
            if (list.empty()) continue;
            const auto& p = probs[static_cast<std::size_t>(h * n + i)];
            const T* goi = go.data() + i * d + h * dh;
            dp.assign(list.size(), 0.0);
            double pdp = 0;
            for (std::size_t s = 0; s < list.size(); ++s) {
              const T* vj = vv.data() + list[s] * d + h * dh;
              double dot = 0;
              for (std::int64_t c = 0; c < dh; ++c) dot += static_cast<double>(goi[c]) * vj[c];
              dp[s] = dot;
              pdp += dot * p[s];
              if (gv) {
                T* gvj = gv->data() + list[s] * d + h * dh;
                for (std::int64_t c = 0; c < dh; ++c) gvj[c] += p[s] * goi[c];
              }
            }
            if (!gq && !gk) continue;
            const T* qi = qv.data() + i * d + h * dh;
            for (std::size_t s = 0; s < list.size(); ++s) {
              const T ds = static_cast<T>(p[s] * (dp[s] - pdp) * scale);
              const T* kj = kv.data() + list[s] * d + h * dh;
              if (gq) {
                T* gqi = gq->data() + i * d + h * dh;
                for (std::int64_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
              }
              if (gk) {
                T* gkj = gk->data() + list[s] * d + h * dh;
                for (std::int64_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
              }
            }
          }
        }
      });
}

template Var<float> multi_head_attention(Var<float>, Var<float>, Var<float>, int, const AttnMask&);
template Var<double> multi_head_attention(Var<double>, Var<double>, Var<double>, int, const AttnMask&);

}  // namespace gdino
