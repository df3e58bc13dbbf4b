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

#ifndef TRMML_TENSOR_IO_HPP_
#define TRMML_TENSOR_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "trmml/tensor.hpp"

namespace trmml {

// On-disk layout, all little-endian:
//   "TRM1" | u32 rank | rank x u64 dims | prod(dims) x f64 payload
inline constexpr std::string_view kTensorMagic = "TRM1";
inline constexpr std::size_t kMaxTensorRank = 8;

std::string encode_tensor(const Tensor& t);
// Throws BadMagic, TruncatedPayload, RankOverflow.
Tensor decode_tensor(std::string_view bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace trmml

#endif  // TRMML_TENSOR_IO_HPP_
