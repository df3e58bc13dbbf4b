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

#include "trmml/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace trmml {
namespace {

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

std::uint64_t get_le(std::string_view in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i]))
         << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode_tensor(const Tensor& t) {
  if (t.rank() > kMaxTensorRank) {
    throw Error(Errc::kRankOverflow, "rank " + std::to_string(t.rank()));
  }
  if (!t.all_finite()) {
    throw Error(Errc::kNonFiniteEvaluation, "refusing to write non-finite tensor");
  }
  std::string out(kTensorMagic);
  out.reserve(4 + 4 + 8 * t.rank() + 8 * t.size());
  put_le(out, t.rank(), 4);
  for (auto d : t.shape()) put_le(out, d, 8);
  for (double v : t.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

Tensor decode_tensor(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kTensorMagic) {
    throw Error(Errc::kBadMagic, "missing TRM1 header");
  }
  if (bytes.size() < 8) throw Error(Errc::kTruncatedPayload, "no rank field");
  const auto rank = get_le(bytes, 4, 4);
  if (rank > kMaxTensorRank) {
    throw Error(Errc::kRankOverflow, "rank " + std::to_string(rank) + " > 8");
  }
  std::size_t offset = 8;
  if (bytes.size() < offset + 8 * rank) {
    throw Error(Errc::kTruncatedPayload, "dims truncated");
  }
  Shape shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = get_le(bytes, offset, 8);
    offset += 8;
    if (shape[i] == 0) throw Error(Errc::kInvalidDimension, "zero-sized axis");
    if (count > std::numeric_limits<std::size_t>::max() / 8 / shape[i]) {
      throw Error(Errc::kTruncatedPayload, "dims exceed addressable payload");
    }
    count *= shape[i];
  }
  const std::size_t need = offset + 8 * count;
  if (bytes.size() < need) {
    throw Error(Errc::kTruncatedPayload,
                "payload has " + std::to_string(bytes.size() - offset) +
                    " bytes, dims imply " + std::to_string(8 * count));
  }
  if (bytes.size() > need) {
    throw Error(Errc::kTruncatedPayload, "unexpected trailing bytes");
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<double>(get_le(bytes, offset + 8 * i, 8));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIoError, "write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace trmml
