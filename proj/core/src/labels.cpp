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

#include "trmml/labels.hpp"

#include <algorithm>
#include <cmath>

namespace trmml {

std::size_t LabelMatrix::count_nonzero() const {
  return data_.size() - count(0);
}

std::size_t LabelMatrix::count(std::int8_t value) const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), value));
}

LabelMatrix LabelMatrix::gather(std::span<const std::size_t> indices) const {
  LabelMatrix out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.data_.begin() + r * cols_);
  }
  return out;
}

Tensor LabelMatrix::to_tensor() const {
  Tensor t({rows_, cols_});
  for (std::size_t i = 0; i < data_.size(); ++i) t[i] = data_[i];
  return t;
}

LabelMatrix LabelMatrix::from_tensor(const Tensor& t) {
  if (t.rank() != 2) {
    throw Error(Errc::kShapeMismatch,
                "label tensor must be a matrix, got " + shape_string(t.shape()));
  }
  LabelMatrix out(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (v != -1.0 && v != 0.0 && v != 1.0) {
      throw Error(Errc::kInvalidDimension,
                  "label value " + std::to_string(v) + " not in {-1,0,1}");
    }
    out.data_[i] = static_cast<std::int8_t>(v);
  }
  return out;
}

}  // namespace trmml
