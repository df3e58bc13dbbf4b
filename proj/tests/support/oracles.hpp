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

// Straight-loop reference implementations and random instance generators
// shared by the unit and acceptance tests. Written independently of the
// library code paths they check.

#ifndef TRMML_TESTS_ORACLES_HPP_
#define TRMML_TESTS_ORACLES_HPP_

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "trmml/labels.hpp"
#include "trmml/region.hpp"
#include "trmml/tensor.hpp"

namespace trmml::testing {

using Rng = std::mt19937_64;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(shape);
  for (auto& v : t.data()) v = n(rng);
  return t;
}

inline std::size_t random_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Entries drawn from {-1, 0, +1} with the given probabilities of +1 and -1.
inline LabelMatrix random_labels(std::size_t n, std::size_t C, Rng& rng,
                                 double p_pos, double p_neg) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabelMatrix y(n, C);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const double r = u(rng);
      y(i, c) = r < p_pos ? 1 : (r < p_pos + p_neg ? -1 : 0);
    }
  }
  return y;
}

inline RegionParams random_region_params(std::size_t C, std::size_t d, Rng& rng) {
  RegionParams p;
  p.queries = random_tensor({C, d}, rng);
  p.w_key = random_tensor({d, d}, rng, 0.5);
  p.w_value = random_tensor({d, d}, rng, 0.5);
  p.mlp_w1 = random_tensor({2 * d, d}, rng, 0.5);
  p.mlp_b1 = random_tensor({2 * d}, rng, 0.1);
  p.mlp_w2 = random_tensor({d, 2 * d}, rng, 0.5);
  p.mlp_b2 = random_tensor({d}, rng, 0.1);
  return p;
}

struct AttentionOracle {
  std::vector<std::vector<double>> scores;   // [c][p]
  std::vector<std::vector<double>> weights;  // [c][p]
  std::vector<std::vector<double>> attended; // [c][k]
};

// Keys k_p = W_k f_p and values v_p = W_v f_p are formed per position, then
// s = q . k / sqrt(d), softmax over positions, attended = sum_p a_p v_p.
inline AttentionOracle oracle_cross_attention(const RegionParams& prm,
                                              const Tensor& f) {
  const std::size_t C = prm.queries.dim(0), d = prm.queries.dim(1);
  const std::size_t P = f.dim(0) * f.dim(1);
  std::vector<std::vector<double>> key(P, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> val(P, std::vector<double>(d, 0.0));
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        key[p][a] += prm.w_key(a, b) * f[p * d + b];
        val[p][a] += prm.w_value(a, b) * f[p * d + b];
      }
    }
  }
  AttentionOracle o;
  o.scores.assign(C, std::vector<double>(P, 0.0));
  o.weights.assign(C, std::vector<double>(P, 0.0));
  o.attended.assign(C, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < C; ++c) {
    double mx = -INFINITY;
    for (std::size_t p = 0; p < P; ++p) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a) s += prm.queries(c, a) * key[p][a];
      o.scores[c][p] = s / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, o.scores[c][p]);
    }
    double z = 0.0;
    for (std::size_t p = 0; p < P; ++p) z += std::exp(o.scores[c][p] - mx);
    for (std::size_t p = 0; p < P; ++p) {
      o.weights[c][p] = std::exp(o.scores[c][p] - mx) / z;
      for (std::size_t a = 0; a < d; ++a) o.attended[c][a] += o.weights[c][p] * val[p][a];
    }
  }
  return o;
}

// f^r[c] = sum over grid cells of energy * feature.
inline std::vector<std::vector<double>> oracle_region_pool(const Tensor& energies,
                                                           const Tensor& f) {
  const std::size_t C = energies.dim(0), h = f.dim(0), w = f.dim(1), d = f.dim(2);
  std::vector<std::vector<double>> out(C, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        for (std::size_t k = 0; k < d; ++k) out[c][k] += energies(c, i, j) * f(i, j, k);
  return out;
}

inline double oracle_cosine(const double* a, const double* b, std::size_t d) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

struct StatsOracle {
  std::optional<double> positive;
  std::optional<double> negative;
  std::vector<std::optional<double>> unknown;
};

// Means of cosine(f^r[i,c], v) over the queue, split by the label of (i, c).
inline StatsOracle oracle_similarity_stats(const Tensor& repr, const LabelMatrix& y,
                                           std::size_t c,
                                           const std::deque<std::vector<double>>& queue) {
  const std::size_t n = repr.dim(0), C = repr.dim(1), d = repr.dim(2);
  StatsOracle o;
  o.unknown.assign(n, std::nullopt);
  double sp = 0.0, sn = 0.0;
  std::size_t np = 0, nn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* f = repr.data().data() + (i * C + c) * d;
    double s = 0.0;
    for (const auto& v : queue) s += oracle_cosine(f, v.data(), d);
    if (y(i, c) == 1) {
      sp += s;
      np += queue.size();
    } else if (y(i, c) == -1) {
      sn += s;
      nn += queue.size();
    } else {
      o.unknown[i] = s / static_cast<double>(queue.size());
    }
  }
  if (np) o.positive = sp / static_cast<double>(np);
  if (nn) o.negative = sn / static_cast<double>(nn);
  return o;
}

// AP from its definition. The rank of item i counts every item with a higher
// score plus equal-score items with a smaller index.
inline double oracle_average_precision(const std::vector<double>& s,
                                       const std::vector<std::int8_t>& y) {
  const std::size_t n = s.size();
  auto ahead = [&](std::size_t j, std::size_t i) {
    return s[j] > s[i] || (s[j] == s[i] && j < i);
  };
  double total = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] <= 0) continue;
    ++positives;
    std::size_t rank = 1, hits = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !ahead(j, i)) continue;
      ++rank;
      if (y[j] > 0) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return total / static_cast<double>(positives);
}

}  // namespace trmml::testing

#endif  // TRMML_TESTS_ORACLES_HPP_
