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

#include <gtest/gtest.h>

#include "gdino/boxes.hpp"
#include "gdino/rng.hpp"

namespace gdino {
namespace {

Box random_box(Rng& rng) {
  const double x = rng.uniform(0, 1), y = rng.uniform(0, 1);
  return {x, y, x + rng.uniform(0.01, 1), y + rng.uniform(0.01, 1)};
}

TEST(Giou, HandComputedCases) {
  const Box unit{0, 0, 1, 1};
  EXPECT_NEAR(giou(unit, unit), 1.0, 1e-9);
  // Touching only at a corner: IoU 0, hull 4, union 2.
  EXPECT_NEAR(giou(unit, Box{1, 1, 2, 2}), -0.5, 1e-9);
  // Half-area box nested in a full box: hull equals union.
  EXPECT_NEAR(giou(Box{0, 0, 2, 1}, unit), 0.5, 1e-9);
  EXPECT_NEAR(iou(Box{0, 0, 2, 1}, unit), 0.5, 1e-9);
}

TEST(Giou, NeverExceedsIou) {
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    const double g = giou(a, b);
    ASSERT_LE(g, iou(a, b)) << i;
    ASSERT_GE(g, -1.0);
  }
}

TEST(Giou, SymmetricAndTranslationInvariant) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    EXPECT_DOUBLE_EQ(giou(a, b), giou(b, a));
    const Box at{a.x1 + 0.25, a.y1 - 0.5, a.x2 + 0.25, a.y2 - 0.5};
    const Box bt{b.x1 + 0.25, b.y1 - 0.5, b.x2 + 0.25, b.y2 - 0.5};
    EXPECT_NEAR(giou(a, b), giou(at, bt), 1e-12);
  }
}

TEST(Giou, RejectsDegenerateBoxes) {
  EXPECT_THROW(giou(Box{0, 0, 0, 1}, Box{0, 0, 1, 1}), Error);
  EXPECT_THROW(giou(Box{0, 0, 1, 1}, Box{0, 1, 1, 0.5}), Error);
}

TEST(Giou, RowsMatchScalarVersion) {
  Rng rng(17);
  Tensor<double> a(Shape{50, 4}), b(Shape{50, 4});
  for (auto* t : {&a, &b})
    for (std::int64_t i = 0; i < 50; ++i) {
      t->at(i, 0) = rng.uniform(0.2, 0.8);
      t->at(i, 1) = rng.uniform(0.2, 0.8);
      t->at(i, 2) = rng.uniform(0.05, 0.5);
      t->at(i, 3) = rng.uniform(0.05, 0.5);
    }
  Graph<double> g;
  const auto rows = giou_rows(g.constant(a), g.constant(b)).tensor();
  for (std::int64_t i = 0; i < 50; ++i) {
    const Box ba = from_cxcywh(a.at(i, 0), a.at(i, 1), a.at(i, 2), a.at(i, 3));
    const Box bb = from_cxcywh(b.at(i, 0), b.at(i, 1), b.at(i, 2), b.at(i, 3));
    EXPECT_NEAR(rows[i], giou(ba, bb), 1e-12);
  }
}

TEST(Boxes, CenterFormRoundTrip) {
  const Box b = from_cxcywh(0.5, 0.25, 0.2, 0.1);
  EXPECT_DOUBLE_EQ(b.x1, 0.4);
  EXPECT_DOUBLE_EQ(b.y2, 0.3);
  const auto c = to_cxcywh(b);
  EXPECT_NEAR(c[0], 0.5, 1e-15);
  EXPECT_NEAR(c[1], 0.25, 1e-15);
  EXPECT_NEAR(c[2], 0.2, 1e-15);
  EXPECT_NEAR(c[3], 0.1, 1e-15);
}

}  // namespace
}  // namespace gdino
