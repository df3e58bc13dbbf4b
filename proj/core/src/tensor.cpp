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

#include "trmml/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace trmml {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kZeroVector: return "ZeroVector";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kNonPositiveTemperature: return "NonPositiveTemperature";
    case Errc::kNonFiniteEvaluation: return "NonFiniteEvaluation";
    case Errc::kInvalidDimension: return "InvalidDimension";
    case Errc::kProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case Errc::kDegenerateDistribution: return "DegenerateDistribution";
    case Errc::kEmptyPositiveSet: return "EmptyPositiveSet";
    case Errc::kNonFiniteComponent: return "NonFiniteComponent";
    case Errc::kNoPositiveLabel: return "NoPositiveLabel";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kEmptyQueue: return "EmptyQueue";
    case Errc::kColdThresholds: return "ColdThresholds";
    case Errc::kSpecInfeasible: return "SpecInfeasible";
    case Errc::kInvalidRatio: return "InvalidRatio";
    case Errc::kNoPositiveAvailable: return "NoPositiveAvailable";
    case Errc::kBadMagic: return "BadMagic";
    case Errc::kTruncatedPayload: return "TruncatedPayload";
    case Errc::kRankOverflow: return "RankOverflow";
    case Errc::kIoError: return "IoError";
    case Errc::kDivergenceDetected: return "DivergenceDetected";
    case Errc::kNoPositives: return "NoPositives";
    case Errc::kConfigParse: return "ConfigParse";
    case Errc::kCheckpointCorrupt: return "CheckpointCorrupt";
  }
  return "Unknown";
}

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

void require_shape(const Tensor& t, const Shape& expected,
                   std::string_view what) {
  if (t.shape() != expected) {
    throw Error(Errc::kShapeMismatch,
                std::string(what) + " has shape " + shape_string(t.shape()) +
                    ", expected " + shape_string(expected));
  }
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw Error(Errc::kInvalidDimension, "zero-sized axis");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw Error(Errc::kInvalidDimension, "zero-sized axis");
  }
  if (data_.size() != shape_product(shape_)) {
    throw Error(Errc::kShapeMismatch,
                "data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw Error(Errc::kShapeMismatch, "axis " + std::to_string(axis) +
                                          " out of range for rank " +
                                          std::to_string(shape_.size()));
  }
  return shape_[axis];
}

std::size_t Tensor::row_size() const noexcept {
  return shape_.empty() ? 0 : data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t i) {
  const auto n = row_size();
  return std::span<double>(data_).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const auto n = row_size();
  return std::span<const double>(data_).subspan(i * n, n);
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::uint64_t checksum(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace trmml
