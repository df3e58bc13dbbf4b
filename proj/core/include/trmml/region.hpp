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

#ifndef TRMML_REGION_HPP_
#define TRMML_REGION_HPP_

#include <cstddef>
#include <cstdint>

#include "trmml/tensor.hpp"

namespace trmml {

// Trainable parameters of the single-head category decoder.
//
// Attention scores are s[c,p] = q_c . (W_k f_p) / sqrt(d); the attended value
// is W_v sum_p softmax_p(s)[c,p] f_p. The query-level representation adds a
// residual MLP (d -> 2d -> d, tanh) on top. Energies are sigmoid(s).
struct RegionParams {
  Tensor queries;  // (C, d)
  Tensor w_key;    // (d, d)
  Tensor w_value;  // (d, d)
  Tensor mlp_w1;   // (2d, d)
  Tensor mlp_b1;   // (2d)
  Tensor mlp_w2;   // (d, 2d), zero at init so F^q starts as the attended value
  Tensor mlp_b2;   // (d)

  std::size_t num_classes() const { return queries.dim(0); }
  std::size_t dim() const { return queries.dim(1); }
};

// Queries ~ N(0, 0.02^2), key/value projections start at identity. If
// `query_init` is given it replaces the random queries (text-initialized
// variant).
RegionParams init_region_params(std::size_t num_classes, std::size_t dim,
                                std::uint64_t seed,
                                const Tensor* query_init = nullptr);
RegionParams zeros_like(const RegionParams& p);

// Q W_k, shape (C, d): row c is the key-space query of class c.
Tensor query_keys(const RegionParams& params);

struct AttentionOutput {
  Tensor scores;    // (C, h*w), already scaled by 1/sqrt(d)
  Tensor weights;   // (C, h*w), rows sum to 1
  Tensor attended;  // (C, d)
};

AttentionOutput cross_attention(const RegionParams& params,
                                const Tensor& features);

struct RegionSet {
  Tensor logits;    // (C, h, w)
  Tensor energies;  // (C, h, w), sigmoid(logits)
};

RegionSet make_region_set(Tensor logits);

// f^r_c = sum_{i,j} energies[c,i,j] * f[i,j,:]. No trainable parameters.
Tensor region_pool(const RegionSet& regions, const Tensor& features);

struct RegionOutputs {
  Tensor query_repr;   // F^q, (C, d)
  Tensor region_repr;  // F^r, (C, d)
  RegionSet regions;
};

struct RegionCache {
  Tensor weights;     // (C, P)
  Tensor pooled;      // (C, d), sum_p a[c,p] f_p
  Tensor attended;    // (C, d)
  Tensor mlp_hidden;  // (C, 2d), post-tanh
};

// `qk` may carry a precomputed query_keys(params) shared across a batch.
RegionOutputs region_forward(const RegionParams& params, const Tensor& features,
                             RegionCache* cache = nullptr,
                             const Tensor* qk = nullptr);

// Backward for one image. Accumulates into every field of `grads` except
// queries and w_key; their combined signal is accumulated into `grad_qk`
// (dL/d(Q W_k)) and converted once per batch by finish_query_key_grad.
void region_backward(const RegionParams& params, const Tensor& features,
                     const RegionOutputs& outputs, const RegionCache& cache,
                     const Tensor& grad_query_repr,
                     const Tensor& grad_region_repr, RegionParams& grads,
                     Tensor& grad_qk);

void finish_query_key_grad(const RegionParams& params, const Tensor& grad_qk,
                           RegionParams& grads);

}  // namespace trmml

#endif  // TRMML_REGION_HPP_
