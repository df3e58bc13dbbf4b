/*
 * Copyright 2026 The trmml Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TRMML_LABELS_HPP_
#define TRMML_LABELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trmml/tensor.hpp"

namespace trmml {

// n x C matrix over {-1, 0, +1}: negative, unknown, positive.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::int8_t operator()(std::size_t i, std::size_t c) const noexcept {
    return data_[i * cols_ + c];
  }
  std::int8_t& operator()(std::size_t i, std::size_t c) noexcept {
    return data_[i * cols_ + c];
  }
  std::span<const std::int8_t> row(std::size_t i) const {
    return std::span<const std::int8_t>(data_).subspan(i * cols_, cols_);
  }
  std::span<const std::int8_t> values() const noexcept { return data_; }

  std::size_t count_nonzero() const;
  std::size_t count(std::int8_t value) const;

  // Rows `indices` of this matrix, in order.
  LabelMatrix gather(std::span<const std::size_t> indices) const;

  Tensor to_tensor() const;
  // Throws ShapeMismatch for non-matrices and InvalidDimension for values
  // outside {-1, 0, +1}.
  static LabelMatrix from_tensor(const Tensor& t);

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int8_t> data_;
};

}  // namespace trmml

#endif  // TRMML_LABELS_HPP_
