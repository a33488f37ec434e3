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

#include <array>

#include "gdino/ops.hpp"

namespace gdino {

// Corner-form box.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool operator==(const Box&) const = default;
};

Box from_cxcywh(double cx, double cy, double w, double h);
std::array<double, 4> to_cxcywh(const Box& b);

double intersection(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);
// Throws Error on a box with non-positive width or height.
double giou(const Box& a, const Box& b);

// Row-wise generalized IoU of two [n, 4] (cx, cy, w, h) tensors -> [n].
template <typename T>
Var<T> giou_rows(Var<T> a, Var<T> b);

}  // namespace gdino
