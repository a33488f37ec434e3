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

#include "gdino/hungarian.hpp"

#include <cmath>
#include <limits>

#include "gdino/tensor.hpp"

namespace gdino {

double Assignment::total(std::span<const double> cost, int m) const {
  double t = 0;
  for (const auto& [q, k] : pairs) t += cost[static_cast<std::size_t>(q) * m + k];
  return t;
}

Assignment hungarian(std::span<const double> cost, int n, int m) {
  if (n < 0 || m < 0 || static_cast<std::size_t>(n) * m != cost.size()) throw ShapeError("hungarian: bad shape");
  if (m > n) {
    throw Error("hungarian: " + std::to_string(m) + " ground truths but only " + std::to_string(n) + " queries");
  }
  for (double c : cost)
    if (!std::isfinite(c)) throw NonFiniteError("hungarian: non-finite cost");

  // Ground truths are the "rows" being assigned (1-based), queries the columns.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto a = [&](int gt, int q) { return cost[static_cast<std::size_t>(q - 1) * m + (gt - 1)]; };
  std::vector<double> u(static_cast<std::size_t>(m) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> owner(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= m; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  std::vector<int> query_of(static_cast<std::size_t>(m), -1);
  for (int j = 1; j <= n; ++j) {
    if (owner[j] != 0) {
      query_of[owner[j] - 1] = j - 1;
    } else {
      out.unmatched.push_back(j - 1);
    }
  }
  for (int k = 0; k < m; ++k) out.pairs.emplace_back(query_of[k], k);
  return out;
}

}  // namespace gdino
