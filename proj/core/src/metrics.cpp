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

#include "trmml/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace trmml {

double average_precision(std::span<const double> scores,
                         std::span<const std::int8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(Errc::kShapeMismatch, "scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) throw Error(Errc::kNoPositives, "no positive labels");
  return sum / static_cast<double>(hits);
}

std::vector<double> per_class_ap(const Tensor& scores, const LabelMatrix& truth) {
  if (scores.rank() != 2 || scores.dim(0) != truth.rows() ||
      scores.dim(1) != truth.cols()) {
    throw Error(Errc::kShapeMismatch, "score matrix " + shape_string(scores.shape()));
  }
  const std::size_t n = truth.rows(), C = truth.cols();
  std::vector<double> col(n);
  std::vector<std::int8_t> lab(n);
  std::vector<double> out(C);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = scores(i, c);
      lab[i] = truth(i, c);
    }
    try {
      out[c] = average_precision(col, lab);
    } catch (const Error& e) {
      if (e.code() != Errc::kNoPositives) throw;
      throw Error(Errc::kNoPositives, "class " + std::to_string(c) + " has no positives");
    }
  }
  return out;
}

double mean_ap(const Tensor& scores, const LabelMatrix& truth) {
  const auto ap = per_class_ap(scores, truth);
  if (ap.empty()) throw Error(Errc::kNoPositives, "no classes");
  return std::accumulate(ap.begin(), ap.end(), 0.0) / static_cast<double>(ap.size());
}

}  // namespace trmml
