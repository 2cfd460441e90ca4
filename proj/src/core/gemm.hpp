// Copyright 2026 The GameIRL Authors
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

#ifndef GAMEIRL_CORE_GEMM_HPP_
#define GAMEIRL_CORE_GEMM_HPP_

#include <cstddef>

namespace gameirl {

// Row-major matrix kernels with a fixed, position-independent accumulation
// order: every output element folds over k strictly in index order, so a row's
// result depends only on its own contents, never on the batch it sits in or
// on thread/library configuration. This keeps forward passes bit-identical
// between rollout collection (batch 1) and minibatch updates, and makes runs
// bitwise reproducible.

// C(M,N) = A(M,K) * B(K,N) + (beta ? C : 0)
template <typename S>
void gemm_nn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  constexpr int kTile = 256;
  if (!accumulate) {
    for (int i = 0; i < m; ++i) {
      S* ci = c + static_cast<std::size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = S(0);
    }
  }
  for (int k0 = 0; k0 < k; k0 += kTile) {
    const int k1 = k0 + kTile < k ? k0 + kTile : k;
    for (int i = 0; i < m; ++i) {
      const S* ai = a + static_cast<std::size_t>(i) * lda;
      S* ci = c + static_cast<std::size_t>(i) * ldc;
      for (int kk = k0; kk < k1; ++kk) {
        const S av = ai[kk];
        if (av == S(0)) continue;
        const S* bk = b + static_cast<std::size_t>(kk) * ldb;
        for (int j = 0; j < n; ++j) {
          ci[j] += av * bk[j];
        }
      }
    }
  }
}

// C(K,N) += A(M,K)^T * B(M,N): outer products accumulated in row order.
template <typename S>
void gemm_tn_acc(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
                 S* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    const S* ai = a + static_cast<std::size_t>(i) * lda;
    const S* bi = b + static_cast<std::size_t>(i) * ldb;
    for (int p = 0; p < k; ++p) {
      const S av = ai[p];
      if (av == S(0)) continue;
      S* cp = c + static_cast<std::size_t>(p) * ldc;
      for (int j = 0; j < n; ++j) {
        cp[j] += av * bi[j];
      }
    }
  }
}

// C(M,K) = A(M,N) * B(K,N)^T: independent dot products over 16 fixed lanes
// folded by a fixed reduction tree, so results are position-independent.
template <typename S>
void gemm_nt(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  constexpr int kLanes = 16;
  for (int i = 0; i < m; ++i) {
    const S* ai = a + static_cast<std::size_t>(i) * lda;
    S* ci = c + static_cast<std::size_t>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const S* bp = b + static_cast<std::size_t>(p) * ldb;
      S lane[kLanes] = {};
      int j = 0;
      for (; j + kLanes <= n; j += kLanes) {
        for (int l = 0; l < kLanes; ++l) {
          lane[l] += ai[j + l] * bp[j + l];
        }
      }
      for (int l = 0; l < kLanes / 2; ++l) lane[l] += lane[l + kLanes / 2];
      for (int l = 0; l < kLanes / 4; ++l) lane[l] += lane[l + kLanes / 4];
      for (int l = 0; l < kLanes / 8; ++l) lane[l] += lane[l + kLanes / 8];
      S acc = lane[0] + lane[1];
      for (; j < n; ++j) acc += ai[j] * bp[j];
      if (accumulate) {
        ci[p] += acc;
      } else {
        ci[p] = acc;
      }
    }
  }
}

}  // namespace gameirl

#endif  // GAMEIRL_CORE_GEMM_HPP_
