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

#include "trmml/model.hpp"

#include <algorithm>
#include <cmath>

#include "trmml/math.hpp"
#include "trmml/parallel.hpp"
#include "trmml/random.hpp"

namespace trmml {
namespace {

struct ProjectedRows {
  Tensor unit_in;   // (m, d)
  Tensor hidden;    // (m, H), post-tanh
  Tensor out;       // (m, d)
  Tensor unit_out;  // (m, d)
};

ProjectedRows project_rows(const ProjectionHead& head, const Tensor& rows) {
  const std::size_t m = rows.dim(0), d = rows.dim(1), H = head.b1.size();
  ProjectedRows r{Tensor({m, d}), Tensor({m, H}), Tensor({m, d}), Tensor({m, d})};
  for (std::size_t i = 0; i < m; ++i) {
    auto u = l2_normalize(rows.row(i));
    std::copy(u.begin(), u.end(), r.unit_in.row(i).begin());
    auto h = r.hidden.row(i);
    matvec(head.w1, u, h);
    for (std::size_t k = 0; k < H; ++k) h[k] = std::tanh(h[k] + head.b1[k]);
    auto o = r.out.row(i);
    matvec(head.w2, h, o);
    axpy(1.0, head.b2.data(), o);
    auto z = l2_normalize(o);
    std::copy(z.begin(), z.end(), r.unit_out.row(i).begin());
  }
  return r;
}

// grad_rows may be null (constant inputs such as bank entries).
void project_rows_backward(const ProjectionHead& head, const Tensor& rows,
                           const ProjectedRows& fwd, const Tensor& grad_unit_out,
                           ProjectionHead& grads, Tensor* grad_rows) {
  const std::size_t m = rows.dim(0), d = rows.dim(1), H = head.b1.size();
  std::vector<double> d_out(d), d_h(H), d_u(d);
  for (std::size_t i = 0; i < m; ++i) {
    auto gz = grad_unit_out.row(i);
    if (std::all_of(gz.begin(), gz.end(), [](double v) { return v == 0.0; })) {
      continue;
    }
    std::fill(d_out.begin(), d_out.end(), 0.0);
    l2_normalize_backward(fwd.out.row(i), gz, d_out);
    auto h = fwd.hidden.row(i);
    outer_acc(grads.w2, d_out, h);
    axpy(1.0, d_out, grads.b2.data());
    std::fill(d_h.begin(), d_h.end(), 0.0);
    matvec_transposed_acc(head.w2, d_out, d_h);
    for (std::size_t k = 0; k < H; ++k) d_h[k] *= 1.0 - h[k] * h[k];
    outer_acc(grads.w1, d_h, fwd.unit_in.row(i));
    axpy(1.0, d_h, grads.b1.data());
    if (grad_rows) {
      std::fill(d_u.begin(), d_u.end(), 0.0);
      matvec_transposed_acc(head.w1, d_h, d_u);
      l2_normalize_backward(rows.row(i), d_u, grad_rows->row(i));
    }
  }
}

Tensor slice_image(const Tensor& batch, std::size_t i) {
  const std::size_t C = batch.dim(1), d = batch.dim(2);
  auto src = batch.data().subspan(i * C * d, C * d);
  return Tensor({C, d}, std::vector<double>(src.begin(), src.end()));
}

void add_into(Tensor& dst, const Tensor& src) {
  axpy(1.0, src.data(), dst.data());
}

// Multimodal contrastive term. Anchors are the class text representations;
// candidates are batch region representations with a positive label plus
// every bank entry. Returns the mean over classes with at least one positive
// and accumulates scaled gradients.
double contrastive_term(const TrmModel& model, const BatchForward& fwd,
                        const LabelMatrix& labels, const VisualBank* bank,
                        double scale, TrainableParams* grads,
                        Tensor* grad_region_repr, Tensor* grad_text) {
  const std::size_t n = labels.rows(), C = labels.cols();
  const std::size_t d = fwd.text.dim(1);
  struct Candidate {
    std::size_t cls;
    std::size_t image;  // n for bank entries
    const double* src;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      if (labels(i, c) != 1) continue;
      const double* src = fwd.region_repr.data().data() + (i * C + c) * d;
      if (l2_norm(ConstVec(src, d)) > kNormEpsilon) cands.push_back({c, i, src});
    }
  }
  const std::size_t from_batch = cands.size();
  if (bank) {
    for (std::size_t c = 0; c < bank->num_classes(); ++c) {
      for (const auto& v : bank->queue(c)) {
        if (l2_norm(v) > kNormEpsilon) cands.push_back({c, n, v.data()});
      }
    }
  }
  if (cands.empty()) return 0.0;

  Tensor rows({cands.size(), d});
  for (std::size_t j = 0; j < cands.size(); ++j) {
    std::copy(cands[j].src, cands[j].src + d, rows.row(j).begin());
  }
  const auto& head = model.params.proj;
  const ProjectedRows z = project_rows(head, rows);
  const ProjectedRows za = project_rows(head, fwd.text);
  const double temp = model.config().nce_temperature;

  Tensor grad_z(z.unit_out.shape());
  Tensor grad_za(za.unit_out.shape());
  std::vector<std::size_t> pos, neg;
  double total = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < C; ++c) {
    pos.clear();
    neg.clear();
    for (std::size_t j = 0; j < cands.size(); ++j) {
      (cands[j].cls == c ? pos : neg).push_back(j);
    }
    if (pos.empty()) continue;
    total += infonce_unit(za.unit_out.row(c), z.unit_out, pos, neg, temp,
                          grads ? grad_za.row(c) : MutVec{},
                          grads ? &grad_z : nullptr);
    ++classes;
  }
  if (classes == 0) return 0.0;
  const double mean = total / static_cast<double>(classes);
  if (!grads) return mean;

  const double k = scale / static_cast<double>(classes);
  for (auto& v : grad_z.data()) v *= k;
  for (auto& v : grad_za.data()) v *= k;
  Tensor grad_rows({cands.size(), d});
  project_rows_backward(head, rows, z, grad_z, grads->proj, &grad_rows);
  project_rows_backward(head, fwd.text, za, grad_za, grads->proj, grad_text);
  for (std::size_t j = 0; j < from_batch; ++j) {
    const auto& cd = cands[j];
    axpy(1.0, grad_rows.row(j),
         grad_region_repr->data().subspan((cd.image * C + cd.cls) * d, d));
  }
  return mean;
}

}  // namespace

TrainableParams zeros_like(const TrainableParams& p) {
  TrainableParams z;
  z.prompts.context = Tensor(p.prompts.context.shape());
  z.region = zeros_like(p.region);
  z.proj = {Tensor(p.proj.w1.shape()), Tensor(p.proj.b1.shape()),
            Tensor(p.proj.w2.shape()), Tensor(p.proj.b2.shape())};
  z.log_tau = Tensor(p.log_tau.shape());
  return z;
}

TrmModel::TrmModel(const ModelConfig& config)
    : config_(config),
      text_encoder_(TextEncoderConfig{config.token_dim, config.text_hidden,
                                      config.dim, config.seed}) {
  if (!(config.tau_init > 0.0) || !(config.tau_min > 0.0) ||
      !(config.nce_temperature > 0.0)) {
    throw Error(Errc::kNonPositiveTemperature, "model temperatures must be > 0");
  }
  params.prompts = build_prompts(config.num_classes, config.prompt_length,
                                 config.token_dim, config.seed);
  if (config.text_init_queries) {
    const Tensor g = text_encoder_.encode(params.prompts);
    params.region = init_region_params(config.num_classes, config.dim,
                                       config.seed, &g);
  } else {
    params.region = init_region_params(config.num_classes, config.dim, config.seed);
  }
  auto rng = make_rng(config.seed, 20);
  const std::size_t H = config.proj_hidden, d = config.dim;
  params.proj.w1 = normal_tensor({H, d}, 0.0, 1.0, rng);
  params.proj.b1 = Tensor({H});
  params.proj.w2 = normal_tensor({d, H}, 0.0,
                                 1.0 / std::sqrt(static_cast<double>(H)), rng);
  params.proj.b2 = Tensor({d});
  params.log_tau = Tensor({1}, std::log(config.tau_init));
}

double TrmModel::tau() const { return std::exp(params.log_tau[0]); }

Tensor TrmModel::text_representations() const {
  return text_encoder_.encode(params.prompts);
}

BatchForward forward_batch(const TrmModel& model,
                           std::span<const Tensor* const> features,
                           const ComponentFlags& flags, std::size_t threads) {
  const std::size_t n = features.size();
  const std::size_t C = model.config().num_classes, d = model.config().dim;
  if (n == 0) throw Error(Errc::kInvalidDimension, "empty batch");
  BatchForward fwd;
  fwd.features.assign(features.begin(), features.end());
  fwd.text = model.text_encoder().encode(model.params.prompts, &fwd.text_cache);
  fwd.region_repr = Tensor({n, C, d});
  if (flags.carl) {
    fwd.qk = query_keys(model.params.region);
    fwd.regions.resize(n);
    fwd.caches.resize(n);
    fwd.query_repr = Tensor({n, C, d});
    for_each_chunk(n, threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        fwd.regions[i] = region_forward(model.params.region, *features[i],
                                        &fwd.caches[i], &fwd.qk);
        const auto& r = fwd.regions[i];
        std::copy(r.query_repr.data().begin(), r.query_repr.data().end(),
                  fwd.query_repr.data().begin() + i * C * d);
        std::copy(r.region_repr.data().begin(), r.region_repr.data().end(),
                  fwd.region_repr.data().begin() + i * C * d);
      }
    });
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor& f = *features[i];
      if (f.rank() != 3 || f.dim(2) != d) {
        throw Error(Errc::kShapeMismatch, "feature map " + shape_string(f.shape()));
      }
      const std::size_t P = f.dim(0) * f.dim(1);
      std::vector<double> mean(d, 0.0);
      for (std::size_t p = 0; p < P; ++p) {
        axpy(1.0 / static_cast<double>(P), f.data().subspan(p * d, d), mean);
      }
      for (std::size_t c = 0; c < C; ++c) {
        std::copy(mean.begin(), mean.end(),
                  fwd.region_repr.data().begin() + (i * C + c) * d);
      }
    }
  }
  const double tau = model.tau();
  fwd.scores.tau = tau;
  fwd.scores.region = match_scores(fwd.region_repr, fwd.text, tau);
  if (flags.carl) fwd.scores.query = match_scores(fwd.query_repr, fwd.text, tau);
  return fwd;
}

BatchLoss batch_loss(const TrmModel& model, const BatchForward& fwd,
                     const LabelMatrix& labels, const VisualBank* bank,
                     const ComponentFlags& flags, const LossWeights& weights,
                     TrainableParams* grads, std::size_t threads,
                     double cls_scale) {
  const auto& scores = fwd.scores;
  const std::size_t n = labels.rows(), C = labels.cols();
  const std::size_t d = model.config().dim;
  if (scores.region.dim(0) != n || scores.region.dim(1) != C) {
    throw Error(Errc::kShapeMismatch, "labels do not match the forward batch");
  }
  BatchLoss out;
  Tensor g_query, g_region, g_kd;
  if (flags.carl) {
    out.parts.cls_q = asl_loss_logits(scores.query, labels, weights.asl, &g_query);
    out.parts.cls_r = asl_loss_logits(scores.region, labels, weights.asl, &g_region);
    out.parts.cls_q *= cls_scale;
    out.parts.cls_r *= cls_scale;
    for (auto& v : g_query.data()) v *= cls_scale;
    for (auto& v : g_region.data()) v *= weights.alpha * cls_scale;
    if (flags.kd) {
      out.parts.kd = kd_loss_from_scores(scores.region, scores.query, &g_kd);
      for (auto& v : g_kd.data()) v *= weights.beta;
    }
  } else {
    // Single image-level score: counted once, as the primary classification term.
    out.parts.cls_q = cls_scale * asl_loss_logits(scores.region, labels, weights.asl, &g_region);
    for (auto& v : g_region.data()) v *= cls_scale;
  }

  Tensor g_text, g_region_repr, g_query_repr;
  if (grads) {
    *grads = zeros_like(model.params);
    g_text = Tensor(fwd.text.shape());
    g_region_repr = Tensor(fwd.region_repr.shape());
  }
  if (flags.mmcl) {
    out.parts.nce = contrastive_term(model, fwd, labels, bank, weights.gamma,
                                     grads, grads ? &g_region_repr : nullptr,
                                     grads ? &g_text : nullptr);
  }
  out.total = total_loss(out.parts, weights);
  if (!grads) return out;

  const double tau = scores.tau;
  double g_tau = match_scores_backward(fwd.region_repr, fwd.text, tau,
                                       scores.region, g_region, &g_region_repr,
                                       g_text);
  if (flags.carl) {
    g_query_repr = Tensor(fwd.query_repr.shape());
    g_tau += match_scores_backward(fwd.query_repr, fwd.text, tau, scores.query,
                                   g_query, &g_query_repr, g_text);
    if (flags.kd) {
      // Distillation only moves the query-level representations; the text
      // side and the temperature are shared with the teacher and stay put.
      Tensor unused_text(fwd.text.shape());
      (void)match_scores_backward(fwd.query_repr, fwd.text, tau, scores.query, g_kd,
                                  &g_query_repr, unused_text);
    }
  }
  grads->log_tau[0] = g_tau * tau;

  if (flags.carl) {
    const auto& rp = model.params.region;
    const std::size_t chunks = chunk_count(n);
    std::vector<RegionParams> part(chunks);
    std::vector<Tensor> part_qk(chunks);
    for_each_chunk(n, threads, [&](std::size_t k, std::size_t b, std::size_t e) {
      part[k] = zeros_like(rp);
      part_qk[k] = Tensor({C, d});
      for (std::size_t i = b; i < e; ++i) {
        region_backward(rp, *fwd.features[i], fwd.regions[i], fwd.caches[i],
                        slice_image(g_query_repr, i), slice_image(g_region_repr, i),
                        part[k], part_qk[k]);
      }
    });
    Tensor g_qk({C, d});
    for (std::size_t k = 0; k < chunks; ++k) {
      add_into(grads->region.queries, part[k].queries);
      add_into(grads->region.w_key, part[k].w_key);
      add_into(grads->region.w_value, part[k].w_value);
      add_into(grads->region.mlp_w1, part[k].mlp_w1);
      add_into(grads->region.mlp_b1, part[k].mlp_b1);
      add_into(grads->region.mlp_w2, part[k].mlp_w2);
      add_into(grads->region.mlp_b2, part[k].mlp_b2);
      add_into(g_qk, part_qk[k]);
    }
    finish_query_key_grad(rp, g_qk, grads->region);
  }
  model.text_encoder().backward(model.params.prompts, fwd.text_cache, g_text,
                                grads->prompts.context);
  return out;
}

Tensor predict(const TrmModel& model, std::span<const Tensor* const> features,
               const ComponentFlags& flags, std::size_t threads) {
  return forward_batch(model, features, flags, threads).scores.region;
}

}  // namespace trmml
