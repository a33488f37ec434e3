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

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace gdino {

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (query, ground truth), by ground truth
  std::vector<int> unmatched;              // queries without a ground truth, ascending

  double total(std::span<const double> cost, int m) const;
};

// Minimum-cost assignment of every column (ground truth) of an n-by-m cost
// matrix (row-major, queries by ground truths) to a distinct row, m <= n.
// Shortest augmenting paths with potentials; among equal-cost candidates the
// lower index is preferred. Throws on m > n or non-finite costs.
Assignment hungarian(std::span<const double> cost, int n, int m);

}  // namespace gdino
