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

#include "gdino/kernels.hpp"

namespace gdino::kernels {

template <typename T>
void gemm_acc(const T* __restrict a, const T* __restrict b, T* __restrict c, std::int64_t m,
              std::int64_t k, std::int64_t n) {
  std::int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* __restrict c0 = c + (i + 0) * n;
    T* __restrict c1 = c + (i + 1) * n;
    T* __restrict c2 = c + (i + 2) * n;
    T* __restrict c3 = c + (i + 3) * n;
    const T* a0 = a + (i + 0) * k;
    const T* a1 = a + (i + 1) * k;
    const T* a2 = a + (i + 2) * k;
    const T* a3 = a + (i + 3) * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const T* __restrict row = b + p * n;
      const T x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      for (std::int64_t j = 0; j < n; ++j) {
        const T v = row[j];
        c0[j] += x0 * v;
        c1[j] += x1 * v;
        c2[j] += x2 * v;
        c3[j] += x3 * v;
      }
    }
  }
  for (; i < m; ++i) {
    T* __restrict c0 = c + i * n;
    const T* a0 = a + i * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const T* __restrict row = b + p * n;
      const T x0 = a0[p];
      for (std::int64_t j = 0; j < n; ++j) c0[j] += x0 * row[j];
    }
  }
}

template <typename T>
void gemm_tn_acc(const T* __restrict a, const T* __restrict b, T* __restrict c, std::int64_t m, std::int64_t k,
                 std::int64_t n) {
  std::int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* __restrict c0 = c + (i + 0) * n;
    T* __restrict c1 = c + (i + 1) * n;
    T* __restrict c2 = c + (i + 2) * n;
    T* __restrict c3 = c + (i + 3) * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const T* __restrict row = b + p * n;
      const T* ap = a + p * m + i;
      const T x0 = ap[0], x1 = ap[1], x2 = ap[2], x3 = ap[3];
      for (std::int64_t j = 0; j < n; ++j) {
        const T v = row[j];
        c0[j] += x0 * v;
        c1[j] += x1 * v;
        c2[j] += x2 * v;
        c3[j] += x3 * v;
      }
    }
  }
  for (; i < m; ++i) {
    T* __restrict c0 = c + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const T* __restrict row = b + p * n;
      const T x0 = a[p * m + i];
      for (std::int64_t j = 0; j < n; ++j) c0[j] += x0 * row[j];
    }
  }
}

template <typename T>
void transpose(const T* in, T* out, std::int64_t m, std::int64_t n) {
  constexpr std::int64_t kBlock = 32;
  for (std::int64_t i0 = 0; i0 < m; i0 += kBlock) {
    for (std::int64_t j0 = 0; j0 < n; j0 += kBlock) {
      const std::int64_t i1 = i0 + kBlock < m ? i0 + kBlock : m;
      const std::int64_t j1 = j0 + kBlock < n ? j0 + kBlock : n;
      for (std::int64_t i = i0; i < i1; ++i) {
        for (std::int64_t j = j0; j < j1; ++j) out[j * m + i] = in[i * n + j];
      }
    }
  }
}

template void gemm_acc<float>(const float*, const float*, float*, std::int64_t, std::int64_t, std::int64_t);
template void gemm_acc<double>(const double*, const double*, double*, std::int64_t, std::int64_t,
                               std::int64_t);
template void gemm_tn_acc<float>(const float*, const float*, float*, std::int64_t, std::int64_t, std::int64_t);
template void gemm_tn_acc<double>(const double*, const double*, double*, std::int64_t, std::int64_t,
                                  std::int64_t);
template void transpose<float>(const float*, float*, std::int64_t, std::int64_t);
template void transpose<double>(const double*, double*, std::int64_t, std::int64_t);

}  // namespace gdino::kernels
