// Copyright 2026 The mkor-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MKOR_TENSOR_H_
#define MKOR_TENSOR_H_

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkor {

// Dense row-major array. Images are stored channel-last (H, W, C).
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;
  explicit BasicTensor(std::vector<int> shape, T fill = T(0))
      : shape_(std::move(shape)), values_(CountOf(shape_), fill) {}
  BasicTensor(std::vector<int> shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != CountOf(shape_)) {
      throw std::invalid_argument("tensor value count does not match shape");
    }
  }

  static std::size_t CountOf(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return values_.size(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& storage() { return values_; }
  const std::vector<T>& storage() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  // (h, w, c) access for rank-3 image tensors.
  T& at(int h, int w, int c) { return values_[Offset(h, w, c)]; }
  const T& at(int h, int w, int c) const { return values_[Offset(h, w, c)]; }

  int height() const { return shape_.at(0); }
  int width() const { return shape_.at(1); }
  int channels() const { return shape_.size() > 2 ? shape_[2] : 1; }

  bool SameShape(const BasicTensor& other) const { return shape_ == other.shape_; }

  // Reinterpret with a new shape holding the same number of values.
  BasicTensor Reshaped(std::vector<int> shape) const {
    return BasicTensor(std::move(shape), values_);
  }

 private:
  std::size_t Offset(int h, int w, int c) const {
    return (static_cast<std::size_t>(h) * shape_[1] + w) * channels() + c;
  }

  std::vector<int> shape_;
  std::vector<T> values_;
};

using Tensor = BasicTensor<float>;

std::string ShapeToString(const std::vector<int>& shape);

}  // namespace mkor

#endif  // MKOR_TENSOR_H_
