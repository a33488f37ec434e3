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

// Raw row-major kernels shared by the op implementations. Every output
// element accumulates over the reduction index in increasing order, so a row's
// result never depends on which other rows are in the matrix.
namespace gdino::kernels {

// C[m, n] += A[m, k] * B[k, n]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n);

// C[m, n] += A[k, m]^T * B[k, n], same accumulation order as gemm_acc on an
// explicitly transposed A.
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n);

// out[n, m] = in[m, n]^T
template <typename T>
void transpose(const T* in, T* out, std::int64_t m, std::int64_t n);

}  // namespace gdino::kernels
