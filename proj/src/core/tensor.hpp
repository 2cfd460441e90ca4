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

#ifndef GAMEIRL_CORE_TENSOR_HPP_
#define GAMEIRL_CORE_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace gameirl {

// Dense row-major tensor. Activations use NHWC layout so channel runs are
// contiguous for im2col.
template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) { resize(std::move(shape)); }
  Tensor(std::initializer_list<int> shape) {
    resize(std::vector<int>(shape));
  }

  // Ensures capacity for `shape`. Existing element values are preserved when
  // the count is unchanged (buffers are reused across forward passes); all
  // writers fully overwrite or explicitly fill.
  void resize(std::vector<int> shape) {
    shape_ = std::move(shape);
    data_.resize(count(shape_), S(0));
  }

  // Shape change without touching the data; element count must match.
  void reshape(std::vector<int> shape) {
    if (count(shape) != data_.size()) {
      throw std::logic_error("reshape: element count mismatch");
    }
    shape_ = std::move(shape);
  }

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  std::vector<int> shape_;
  std::vector<S> data_;
};

}  // namespace gameirl

#endif  // GAMEIRL_CORE_TENSOR_HPP_
