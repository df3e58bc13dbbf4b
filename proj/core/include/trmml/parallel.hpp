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

#ifndef TRMML_PARALLEL_HPP_
#define TRMML_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace trmml {

// Work is split into fixed-size chunks independent of the thread count, so
// per-chunk partial results reduced in chunk order are bitwise reproducible.
inline constexpr std::size_t kChunkSize = 16;

inline std::size_t chunk_count(std::size_t n) {
  return (n + kChunkSize - 1) / kChunkSize;
}

// fn(chunk, begin, end) for every chunk of [0, n).
template <class F>
void for_each_chunk(std::size_t n, std::size_t threads, F&& fn) {
  const std::size_t chunks = chunk_count(n);
  auto run = [&](std::size_t k) {
    fn(k, k * kChunkSize, std::min(n, (k + 1) * kChunkSize));
  };
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t k = 0; k < chunks; ++k) run(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, chunks);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < chunks; k = next++) {
        try {
          run(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace trmml

#endif  // TRMML_PARALLEL_HPP_
