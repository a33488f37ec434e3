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

#include <cmath>
#include <string>

#include "gdino/attention_ops.hpp"

namespace gdino {
namespace {

struct Corner {
  std::int64_t row = -1;  // flat token index, -1 when outside the map
  double weight = 0;
};

// Bilinear corners of pixel-space point (x, y) on an h-by-w map, plus the
// partial derivatives of each corner weight w.r.t. x and y.
struct Bilinear {
  Corner c[4];
  double dx[4] = {0, 0, 0, 0};
  double dy[4] = {0, 0, 0, 0};
  bool inside = false;
};

Bilinear bilinear(double x, double y, const LevelShape& lv) {
  Bilinear b;
  if (!(y > -1 && x > -1 && y < static_cast<double>(lv.height) && x < static_cast<double>(lv.width))) return b;
  b.inside = true;
  const double y0 = std::floor(y), x0 = std::floor(x);
  const double ly = y - y0, lx = x - x0, hy = 1 - ly, hx = 1 - lx;
  const std::int64_t iy0 = static_cast<std::int64_t>(y0), ix0 = static_cast<std::int64_t>(x0);
  const std::int64_t ys[4] = {iy0, iy0, iy0 + 1, iy0 + 1};
  const std::int64_t xs[4] = {ix0, ix0 + 1, ix0, ix0 + 1};
  const double ws[4] = {hy * hx, hy * lx, ly * hx, ly * lx};
  const double dxs[4] = {-hy, hy, -ly, ly};
  const double dys[4] = {-hx, -lx, hx, lx};
  for (int k = 0; k < 4; ++k) {
    if (ys[k] < 0 || xs[k] < 0 || ys[k] >= lv.height || xs[k] >= lv.width) continue;
    b.c[k] = Corner{lv.start + ys[k] * lv.width + xs[k], ws[k]};
    b.dx[k] = dxs[k];
    b.dy[k] = dys[k];
  }
  return b;
}

}  // namespace

template <typename T>
Var<T> deform_sample(Var<T> value, std::span<const LevelShape> levels, const Tensor<T>& reference,
                     Var<T> offsets, Var<T> weights, int heads, int points) {
  if (&value.graph() != &offsets.graph() || &value.graph() != &weights.graph()) {
    throw Error("deform_sample: mixed graphs");
  }
  if (value.shape().size() != 2 || reference.rank() != 2) throw ShapeError("deform_sample: rank");
  const std::int64_t d = value.dim(1);
  const std::int64_t nq = reference.dim(0);
  const std::int64_t ref_dim = reference.dim(1);
  const auto nl = static_cast<std::int64_t>(levels.size());
  if (ref_dim != 2 && ref_dim != 4) throw ShapeError("deform_sample: reference must be [Nq, 2] or [Nq, 4]");
  if (heads <= 0 || d % heads != 0) throw ShapeError("deform_sample: width not divisible by heads");
  const std::int64_t per_query = heads * nl * points;
  if (offsets.shape() != Shape{nq, per_query * 2} || weights.shape() != Shape{nq, per_query}) {
    throw ShapeError("deform_sample: offsets " + shape_str(offsets.shape()) + " weights " +
                     shape_str(weights.shape()) + " for " + std::to_string(nq) + " queries");
  }
  std::int64_t tokens = 0;
  for (const auto& lv : levels) tokens += lv.height * lv.width;
  if (tokens != value.dim(0)) throw ShapeError("deform_sample: level shapes do not cover value rows");
  for (std::int64_t i = 0; i < reference.size(); ++i) {
    if (std::isnan(reference[i])) throw Error("deform_sample: reference point is NaN");
  }
  const std::int64_t dh = d / heads;

  // Pixel-space sampling location and d(location)/d(offset) per sample.
  auto locate = [&, nl](const std::vector<T>& off, std::int64_t q, int h, std::int64_t l, int p, double& x,
                        double& y, double& sx, double& sy) {
    const auto& lv = levels[static_cast<std::size_t>(l)];
    const std::int64_t idx = ((q * heads + h) * nl + l) * points + p;
    const double ox = off[static_cast<std::size_t>(idx * 2)];
    const double oy = off[static_cast<std::size_t>(idx * 2 + 1)];
    const double rx = reference[q * ref_dim], ry = reference[q * ref_dim + 1];
    double lx, ly;
    if (ref_dim == 2) {
      lx = rx + ox / static_cast<double>(lv.width);
      ly = ry + oy / static_cast<double>(lv.height);
      sx = 1.0;
      sy = 1.0;
    } else {
      const double rw = reference[q * ref_dim + 2], rh = reference[q * ref_dim + 3];
      lx = rx + ox / points * rw * 0.5;
      ly = ry + oy / points * rh * 0.5;
      sx = rw * 0.5 / points * static_cast<double>(lv.width);
      sy = rh * 0.5 / points * static_cast<double>(lv.height);
    }
    x = lx * static_cast<double>(lv.width) - 0.5;
    y = ly * static_cast<double>(lv.height) - 0.5;
  };

  const auto& vv = value.graph().node(value.id()).value;
  const auto& ov = offsets.graph().node(offsets.id()).value;
  const auto& wv = weights.graph().node(weights.id()).value;
  std::vector<T> out(static_cast<std::size_t>(nq * d), T(0));
  for (std::int64_t q = 0; q < nq; ++q)
    for (int h = 0; h < heads; ++h) {
      T* oq = out.data() + q * d + h * dh;
      for (std::int64_t l = 0; l < nl; ++l)
        for (int p = 0; p < points; ++p) {
          double x, y, sx, sy;
          locate(ov, q, h, l, p, x, y, sx, sy);
          const Bilinear b = bilinear(x, y, levels[static_cast<std::size_t>(l)]);
          if (!b.inside) continue;
          const T aw = wv[static_cast<std::size_t>(((q * heads + h) * nl + l) * points + p)];
          for (const auto& c : b.c) {
            if (c.row < 0) continue;
            const T cw = static_cast<T>(c.weight) * aw;
            const T* src = vv.data() + c.row * d + h * dh;
            for (std::int64_t ch = 0; ch < dh; ++ch) oq[ch] += cw * src[ch];
          }
        }
    }

  const int iv = value.id(), io = offsets.id(), iw = weights.id();
  std::vector<LevelShape> lv_copy(levels.begin(), levels.end());
  return value.graph().emit(
      "deform_sample", Shape{nq, d}, std::move(out), {iv, io, iw},
      [=, levels = std::move(lv_copy), reference = reference](Graph<T>& g, int self) {
        const auto& go = g.node(self).grad;
        const auto& vv = g.node(iv).value;
        const auto& ov = g.node(io).value;
        const auto& wv = g.node(iw).value;
        std::vector<T>* gval = g.needs_grad(iv) ? &g.grad_buffer(iv) : nullptr;
        std::vector<T>* goff = g.needs_grad(io) ? &g.grad_buffer(io) : nullptr;
        std::vector<T>* gw = g.needs_grad(iw) ? &g.grad_buffer(iw) : nullptr;
        const std::span<const LevelShape> lvs(levels);
        for (std::int64_t q = 0; q < nq; ++q)
          for (int h = 0; h < heads; ++h) {
            const T* gq = go.data() + q * d + h * dh;
            for (std::int64_t l = 0; l < nl; ++l)
              for (int p = 0; p < points; ++p) {
                const auto& lv = lvs[static_cast<std::size_t>(l)];
                const std::int64_t idx = ((q * heads + h) * nl + l) * points + p;
                const double ox = ov[static_cast<std::size_t>(idx * 2)];
                const double oy = ov[static_cast<std::size_t>(idx * 2 + 1)];
                const double rx = reference[q * ref_dim], ry = reference[q * ref_dim + 1];
                double lx, ly, sx, sy;
                if (ref_dim == 2) {
                  lx = rx + ox / static_cast<double>(lv.width);
                  ly = ry + oy / static_cast<double>(lv.height);
                  sx = sy = 1.0;
                } else {
                  const double rw = reference[q * ref_dim + 2], rh = reference[q * ref_dim + 3];
                  lx = rx + ox / points * rw * 0.5;
                  ly = ry + oy / points * rh * 0.5;
                  sx = rw * 0.5 / points * static_cast<double>(lv.width);
                  sy = rh * 0.5 / points * static_cast<double>(lv.height);
                }
                const double x = lx * static_cast<double>(lv.width) - 0.5;
                const double y = ly * static_cast<double>(lv.height) - 0.5;
                const Bilinear b = bilinear(x, y, lv);
                if (!b.inside) continue;
                const double aw = wv[static_cast<std::size_t>(idx)];
                double dw = 0, dx = 0, dy = 0;
                for (int k = 0; k < 4; ++k) {
                  const Corner& c = b.c[k];
                  if (c.row < 0) continue;
                  const T* src = vv.data() + c.row * d + h * dh;
                  double dot = 0;
                  for (std::int64_t ch = 0; ch < dh; ++ch) dot += static_cast<double>(gq[ch]) * src[ch];
                  dw += c.weight * dot;
                  dx += b.dx[k] * dot;
                  dy += b.dy[k] * dot;
                  if (gval) {
                    T* dst = gval->data() + c.row * d + h * dh;
                    const T cw = static_cast<T>(c.weight * aw);
                    for (std::int64_t ch = 0; ch < dh; ++ch) dst[ch] += cw * gq[ch];
                  }
                }
                if (gw) (*gw)[static_cast<std::size_t>(idx)] += static_cast<T>(dw);
                if (goff) {
                  (*goff)[static_cast<std::size_t>(idx * 2)] += static_cast<T>(aw * dx * sx);
                  (*goff)[static_cast<std::size_t>(idx * 2 + 1)] += static_cast<T>(aw * dy * sy);
                }
              }
          }
      });
}

template Var<float> deform_sample(Var<float>, std::span<const LevelShape>, const Tensor<float>&, Var<float>,
                                  Var<float>, int, int);
template Var<double> deform_sample(Var<double>, std::span<const LevelShape>, const Tensor<double>&, Var<double>,
                                   Var<double>, int, int);

}  // namespace gdino
