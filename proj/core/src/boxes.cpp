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

#include "gdino/boxes.hpp"

#include <algorithm>

namespace gdino {

Box from_cxcywh(double cx, double cy, double w, double h) {
  return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::array<double, 4> to_cxcywh(const Box& b) {
  return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.width(), b.height()};
}

double intersection(const Box& a, const Box& b) {
  const double w = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double h = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double giou(const Box& a, const Box& b) {
  if (a.width() <= 0 || a.height() <= 0 || b.width() <= 0 || b.height() <= 0) {
    throw Error("giou: degenerate box");
  }
  const double inter = intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  const double hull = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  // hull >= union exactly; rounding can make the difference slightly negative.
  return inter / uni - std::max(0.0, hull - uni) / hull;
}

template <typename T>
Var<T> giou_rows(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape() || a.shape().size() != 2 || a.dim(1) != 4) {
    throw ShapeError("giou_rows: expected matching [n, 4] inputs");
  }
  auto col = [](Var<T> x, int c) { return slice_cols(x, c, 1); };
  auto corners = [&](Var<T> x) {
    Var<T> half_w = scale(col(x, 2), T(0.5));
    Var<T> half_h = scale(col(x, 3), T(0.5));
    return std::array<Var<T>, 4>{sub(col(x, 0), half_w), sub(col(x, 1), half_h), add(col(x, 0), half_w),
                                 add(col(x, 1), half_h)};
  };
  const auto ca = corners(a), cb = corners(b);
  Var<T> area_a = mul(col(a, 2), col(a, 3));
  Var<T> area_b = mul(col(b, 2), col(b, 3));
  Var<T> iw = relu(sub(minimum(ca[2], cb[2]), maximum(ca[0], cb[0])));
  Var<T> ih = relu(sub(minimum(ca[3], cb[3]), maximum(ca[1], cb[1])));
  Var<T> inter = mul(iw, ih);
  Var<T> uni = sub(add(area_a, area_b), inter);
  Var<T> hw = sub(maximum(ca[2], cb[2]), minimum(ca[0], cb[0]));
  Var<T> hh = sub(maximum(ca[3], cb[3]), minimum(ca[1], cb[1]));
  Var<T> hull = mul(hw, hh);
  Var<T> g = sub(div(inter, uni), div(sub(hull, uni), hull));
  return reshape(g, Shape{a.dim(0)});
}

template Var<float> giou_rows<float>(Var<float>, Var<float>);
template Var<double> giou_rows<double>(Var<double>, Var<double>);

}  // namespace gdino
