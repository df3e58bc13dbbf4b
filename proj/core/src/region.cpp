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

#include "trmml/region.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "trmml/math.hpp"
#include "trmml/random.hpp"

namespace trmml {
namespace {

struct FeatureView {
  std::size_t positions;
  std::size_t dim;
};

FeatureView check_features(const Tensor& features, std::size_t dim) {
  if (features.rank() != 3 || features.dim(2) != dim) {
    throw Error(Errc::kShapeMismatch,
                "feature map " + shape_string(features.shape()) +
                    " does not end in channel dim " + std::to_string(dim));
  }
  return {features.dim(0) * features.dim(1), dim};
}

// scores (C, P) = qk F^T / sqrt(d)
Tensor attention_scores(const Tensor& qk, const Tensor& features,
                        std::size_t positions) {
  const std::size_t C = qk.dim(0), d = qk.dim(1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor scores({C, positions});
  const double* f = features.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    auto q = qk.row(c);
    for (std::size_t p = 0; p < positions; ++p) {
      scores(c, p) = dot(q, ConstVec(f + p * d, d)) * scale;
    }
  }
  return scores;
}

// out (C, d) = W F where W is (C, P)
Tensor weighted_sum(const Tensor& weights, const Tensor& features,
                    std::size_t positions, std::size_t d) {
  const std::size_t C = weights.dim(0);
  Tensor out({C, d});
  const double* f = features.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    auto o = out.row(c);
    for (std::size_t p = 0; p < positions; ++p) {
      axpy(weights(c, p), ConstVec(f + p * d, d), o);
    }
  }
  return out;
}

}  // namespace

RegionParams init_region_params(std::size_t num_classes, std::size_t dim,
                                std::uint64_t seed, const Tensor* query_init) {
  if (num_classes == 0 || dim == 0) {
    throw Error(Errc::kInvalidDimension, "region params need C, d >= 1");
  }
  RegionParams p;
  auto rng = make_rng(seed, 10);
  p.queries = normal_tensor({num_classes, dim}, 0.0, 0.02, rng);
  if (query_init) {
    require_shape(*query_init, {num_classes, dim}, "query init");
    p.queries = *query_init;
  }
  p.w_key = Tensor({dim, dim});
  p.w_value = Tensor({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) {
    p.w_key(i, i) = 1.0;
    p.w_value(i, i) = 1.0;
  }
  auto mlp_rng = make_rng(seed, 11);
  p.mlp_w1 = normal_tensor({2 * dim, dim}, 0.0,
                           1.0 / std::sqrt(static_cast<double>(dim)), mlp_rng);
  p.mlp_b1 = Tensor({2 * dim});
  p.mlp_w2 = Tensor({dim, 2 * dim});
  p.mlp_b2 = Tensor({dim});
  return p;
}

RegionParams zeros_like(const RegionParams& p) {
  return {Tensor(p.queries.shape()), Tensor(p.w_key.shape()),
          Tensor(p.w_value.shape()), Tensor(p.mlp_w1.shape()),
          Tensor(p.mlp_b1.shape()),  Tensor(p.mlp_w2.shape()),
          Tensor(p.mlp_b2.shape())};
}

Tensor query_keys(const RegionParams& params) {
  const std::size_t C = params.num_classes(), d = params.dim();
  Tensor qk({C, d});
  for (std::size_t c = 0; c < C; ++c) {
    matvec_transposed_acc(params.w_key, params.queries.row(c), qk.row(c));
  }
  return qk;
}

AttentionOutput cross_attention(const RegionParams& params,
                                const Tensor& features) {
  const auto view = check_features(features, params.dim());
  const Tensor qk = query_keys(params);
  AttentionOutput out;
  out.scores = attention_scores(qk, features, view.positions);
  out.weights = Tensor(out.scores.shape());
  for (std::size_t c = 0; c < params.num_classes(); ++c) {
    auto w = softmax(out.scores.row(c));
    std::copy(w.begin(), w.end(), out.weights.row(c).begin());
  }
  const Tensor pooled =
      weighted_sum(out.weights, features, view.positions, view.dim);
  out.attended = Tensor(pooled.shape());
  for (std::size_t c = 0; c < params.num_classes(); ++c) {
    matvec(params.w_value, pooled.row(c), out.attended.row(c));
  }
  return out;
}

RegionSet make_region_set(Tensor logits) {
  RegionSet r;
  r.energies = sigmoid(logits);
  r.logits = std::move(logits);
  return r;
}

Tensor region_pool(const RegionSet& regions, const Tensor& features) {
  if (regions.energies.rank() != 3 || features.rank() != 3 ||
      regions.energies.dim(1) != features.dim(0) ||
      regions.energies.dim(2) != features.dim(1)) {
    throw Error(Errc::kShapeMismatch,
                "energies " + shape_string(regions.energies.shape()) +
                    " vs features " + shape_string(features.shape()));
  }
  const std::size_t C = regions.energies.dim(0);
  const std::size_t P = features.dim(0) * features.dim(1);
  const std::size_t d = features.dim(2);
  return weighted_sum(regions.energies.reshaped({C, P}), features, P, d);
}

RegionOutputs region_forward(const RegionParams& params, const Tensor& features,
                             RegionCache* cache, const Tensor* qk) {
  const auto view = check_features(features, params.dim());
  const std::size_t C = params.num_classes(), d = params.dim();
  const std::size_t P = view.positions;
  const std::size_t h2 = params.mlp_b1.size();

  Tensor local_qk;
  if (!qk) {
    local_qk = query_keys(params);
    qk = &local_qk;
  }
  Tensor scores = attention_scores(*qk, features, P);
  Tensor weights(scores.shape());
  for (std::size_t c = 0; c < C; ++c) {
    auto w = softmax(scores.row(c));
    std::copy(w.begin(), w.end(), weights.row(c).begin());
  }
  Tensor pooled = weighted_sum(weights, features, P, d);
  Tensor attended({C, d});
  Tensor hidden({C, h2});
  RegionOutputs out;
  out.query_repr = Tensor({C, d});
  for (std::size_t c = 0; c < C; ++c) {
    auto a = attended.row(c);
    matvec(params.w_value, pooled.row(c), a);
    auto h = hidden.row(c);
    matvec(params.mlp_w1, a, h);
    for (std::size_t k = 0; k < h2; ++k) h[k] = std::tanh(h[k] + params.mlp_b1[k]);
    auto fq = out.query_repr.row(c);
    matvec(params.mlp_w2, h, fq);
    for (std::size_t k = 0; k < d; ++k) fq[k] += a[k] + params.mlp_b2[k];
  }
  out.regions = make_region_set(
      scores.reshaped({C, features.dim(0), features.dim(1)}));
  out.region_repr = weighted_sum(out.regions.energies.reshaped({C, P}),
                                 features, P, d);
  if (cache) {
    cache->weights = std::move(weights);
    cache->pooled = std::move(pooled);
    cache->attended = std::move(attended);
    cache->mlp_hidden = std::move(hidden);
  }
  return out;
}

void region_backward(const RegionParams& params, const Tensor& features,
                     const RegionOutputs& outputs, const RegionCache& cache,
                     const Tensor& grad_query_repr,
                     const Tensor& grad_region_repr, RegionParams& grads,
                     Tensor& grad_qk) {
  const std::size_t C = params.num_classes(), d = params.dim();
  const std::size_t P = features.dim(0) * features.dim(1);
  const std::size_t h2 = params.mlp_b1.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double* f = features.data().data();

  std::vector<double> d_att(d), d_hidden(h2), d_pooled(d), d_scores(P);
  for (std::size_t c = 0; c < C; ++c) {
    auto dfq = grad_query_repr.row(c);
    auto dfr = grad_region_repr.row(c);
    auto h = cache.mlp_hidden.row(c);

    // Residual MLP.
    outer_acc(grads.mlp_w2, dfq, h);
    axpy(1.0, dfq, grads.mlp_b2.data());
    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    matvec_transposed_acc(params.mlp_w2, dfq, d_hidden);
    for (std::size_t k = 0; k < h2; ++k) d_hidden[k] *= 1.0 - h[k] * h[k];
    outer_acc(grads.mlp_w1, d_hidden, cache.attended.row(c));
    axpy(1.0, d_hidden, grads.mlp_b1.data());
    std::copy(dfq.begin(), dfq.end(), d_att.begin());
    matvec_transposed_acc(params.mlp_w1, d_hidden, d_att);

    // Value projection.
    outer_acc(grads.w_value, d_att, cache.pooled.row(c));
    std::fill(d_pooled.begin(), d_pooled.end(), 0.0);
    matvec_transposed_acc(params.w_value, d_att, d_pooled);

    // Softmax path and energy path both land on the scores.
    auto a = cache.weights.row(c);
    double weighted = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      const double da = dot(d_pooled, ConstVec(f + p * d, d));
      d_scores[p] = da;
      weighted += da * a[p];
    }
    for (std::size_t p = 0; p < P; ++p) {
      const double e = outputs.regions.energies[c * P + p];
      const double de = dot(dfr, ConstVec(f + p * d, d));
      d_scores[p] = a[p] * (d_scores[p] - weighted) + de * e * (1.0 - e);
    }
    auto dqk = grad_qk.row(c);
    for (std::size_t p = 0; p < P; ++p) {
      if (d_scores[p] != 0.0) {
        axpy(d_scores[p] * inv_sqrt_d, ConstVec(f + p * d, d), dqk);
      }
    }
  }
}

void finish_query_key_grad(const RegionParams& params, const Tensor& grad_qk,
                           RegionParams& grads) {
  // qk_c = W_k^T q_c
  const std::size_t C = params.num_classes(), d = params.dim();
  std::vector<double> dq(d);
  for (std::size_t c = 0; c < C; ++c) {
    matvec(params.w_key, grad_qk.row(c), dq);
    axpy(1.0, dq, grads.queries.row(c));
    outer_acc(grads.w_key, params.queries.row(c), grad_qk.row(c));
  }
}

}  // namespace trmml
