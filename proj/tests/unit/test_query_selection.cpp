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

#include <cmath>

#include "gdino/query_selection.hpp"
#include "oracles.hpp"

namespace gdino {
namespace {

TEST(QuerySelection, HandExample) {
  const std::vector<double> logits{1, 0, 0, 2, 3, -1, -5, -5};
  const auto sel = select_from_logits(logits, 4, 2, Mask{1, 1}, 2);
  EXPECT_EQ(sel.indices, (std::vector<std::int64_t>{2, 1}));
  EXPECT_EQ(sel.scores, (std::vector<double>{3, 2}));
}

TEST(QuerySelection, TiesGoToTheLowerIndex) {
  const auto sel = top_k(std::vector<double>{1, 5, 5, 0, 5}, 3);
  EXPECT_EQ(sel.indices, (std::vector<std::int64_t>{1, 2, 4}));
}

TEST(QuerySelection, InvalidTokensAreIgnored) {
  const std::vector<double> logits{1, 100, 2, -100};
  const auto sel = select_from_logits(logits, 2, 2, Mask{1, 0}, 1);
  EXPECT_EQ(sel.indices, std::vector<std::int64_t>{1});
  EXPECT_THROW(select_from_logits(logits, 2, 2, Mask{0, 0}, 1), Error);
  EXPECT_THROW(top_k(std::vector<double>{1, 2}, 3), ShapeError);
}

TEST(QuerySelection, MatchesBruteForceOracle) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = rng.uniform_int(1, 2000), m = rng.uniform_int(1, 64), d = rng.uniform_int(1, 16);
    const bool coarse = trial % 4 == 0;  // few distinct values -> many ties
    Tensor<float> image(Shape{n, d}), text(Shape{m, d});
    for (auto* t : {&image, &text})
      for (auto& v : t->data) v = coarse ? static_cast<float>(rng.uniform_int(-2, 2)) : static_cast<float>(rng.normal());
    Mask valid(static_cast<std::size_t>(m));
    for (auto& v : valid) v = rng.uniform() < 0.8;
    valid[static_cast<std::size_t>(rng.uniform_int(0, m - 1))] = 1;
    const auto k = rng.uniform_int(1, std::min<std::int64_t>(n, 900));
    const auto got = language_guided_select(image, text, valid, k);
    ASSERT_EQ(got.indices, testing::brute_force_select(image, text, valid, k)) << "trial " << trial;
  }
}

TEST(QuerySelection, ShiftInvariant) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = rng.uniform_int(1, 300), m = rng.uniform_int(1, 16);
    // Multiples of 1/64 shifted by a multiple of 1/8: every sum is exact.
    std::vector<double> logits(static_cast<std::size_t>(n * m));
    for (auto& v : logits) v = static_cast<double>(rng.uniform_int(-256, 256)) / 64.0;
    const Mask valid(static_cast<std::size_t>(m), 1);
    const auto k = rng.uniform_int(1, n);
    const auto base = select_from_logits(logits, n, m, valid, k);
    const double c = static_cast<double>(rng.uniform_int(-80, 80)) / 8.0;
    for (auto& v : logits) v += c;
    ASSERT_EQ(select_from_logits(logits, n, m, valid, k).indices, base.indices);
  }
}

}  // namespace
}  // namespace gdino
