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

#ifndef GAMEIRL_CORE_NUMERIC_HPP_
#define GAMEIRL_CORE_NUMERIC_HPP_

#include <cmath>
#include <cstddef>

namespace gameirl {

// Max-shifted log(sum(exp(x))), stable for |x| up to ~1e4.
template <typename S>
S logsumexp(const S* x, int n) {
  S m = x[0];
  for (int i = 1; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  S s = S(0);
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

// In-place row softmax.
template <typename S>
void softmax(const S* x, S* p, int n) {
  S m = x[0];
  for (int i = 1; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  S s = S(0);
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(x[i] - m);
    s += p[i];
  }
  const S inv = S(1) / s;
  for (int i = 0; i < n; ++i) p[i] *= inv;
}

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) {
    return S(1) / (S(1) + std::exp(-x));
  }
  const S e = std::exp(x);
  return e / (S(1) + e);
}

// log(1 + exp(x)) without overflow.
template <typename S>
S softplus(S x) {
  if (x > S(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Binary cross-entropy of sigmoid(logit) against target in {0,1}:
// loss = softplus(logit) - target * logit.
template <typename S>
S bce_with_logit(S logit, S target) {
  return softplus(logit) - target * logit;
}

// d loss / d logit = sigmoid(logit) - target.
template <typename S>
S bce_with_logit_grad(S logit, S target) {
  return sigmoid(logit) - target;
}

}  // namespace gameirl

#endif  // GAMEIRL_CORE_NUMERIC_HPP_
