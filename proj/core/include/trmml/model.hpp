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

#ifndef TRMML_MODEL_HPP_
#define TRMML_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "trmml/encoders.hpp"
#include "trmml/labels.hpp"
#include "trmml/losses.hpp"
#include "trmml/prototypes.hpp"
#include "trmml/region.hpp"
#include "trmml/tensor.hpp"

namespace trmml {

// Which of the method's components participate. With carl off, every class
// is scored against the mean feature of the image and kd is ignored.
struct ComponentFlags {
  bool carl = true;
  bool kd = true;
  bool mmcp = true;
  bool mmcl = true;

  friend bool operator==(const ComponentFlags&, const ComponentFlags&) = default;
};

struct ModelConfig {
  std::size_t num_classes = 10;
  std::size_t dim = 64;
  std::size_t token_dim = 64;
  std::size_t prompt_length = kDefaultPromptLength;
  std::size_t text_hidden = 128;
  std::size_t proj_hidden = 64;
  double tau_init = 0.07;
  double tau_min = 0.01;
  double nce_temperature = 0.1;
  bool text_init_queries = false;
  std::uint64_t seed = 0;
};

// Auxiliary MLP in front of the contrastive loss; inputs and outputs are
// L2-normalized around it.
struct ProjectionHead {
  Tensor w1;  // (H, d)
  Tensor b1;  // (H)
  Tensor w2;  // (d, H)
  Tensor b2;  // (d)
};

// Everything the optimizer may touch. Frozen encoder weights live elsewhere.
struct TrainableParams {
  PromptBank prompts;  // only `context` is trainable
  RegionParams region;
  ProjectionHead proj;
  Tensor log_tau;  // (1); tau = exp(log_tau)

  template <class F>
  void visit(F&& f) {
    f(std::string_view("context"), prompts.context);
    f(std::string_view("queries"), region.queries);
    f(std::string_view("w_key"), region.w_key);
    f(std::string_view("w_value"), region.w_value);
    f(std::string_view("mlp_w1"), region.mlp_w1);
    f(std::string_view("mlp_b1"), region.mlp_b1);
    f(std::string_view("mlp_w2"), region.mlp_w2);
    f(std::string_view("mlp_b2"), region.mlp_b2);
    f(std::string_view("proj_w1"), proj.w1);
    f(std::string_view("proj_b1"), proj.b1);
    f(std::string_view("proj_w2"), proj.w2);
    f(std::string_view("proj_b2"), proj.b2);
    f(std::string_view("log_tau"), log_tau);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<TrainableParams*>(this)->visit(
        [&](std::string_view name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }
};

TrainableParams zeros_like(const TrainableParams& p);

class TrmModel {
 public:
  explicit TrmModel(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const FrozenTextEncoder& text_encoder() const noexcept { return text_encoder_; }

  TrainableParams params;

  double tau() const;
  Tensor text_representations() const;

 private:
  ModelConfig config_;
  FrozenTextEncoder text_encoder_;
};

struct BatchForward {
  Tensor text;  // G, (C, d)
  TextCache text_cache;
  Tensor qk;
  std::vector<const Tensor*> features;  // (h, w, d) per image, not owned
  std::vector<RegionOutputs> regions;   // empty when carl is off
  std::vector<RegionCache> caches;
  Tensor query_repr;   // (n, C, d); empty when carl is off
  Tensor region_repr;  // (n, C, d); image-mean features when carl is off
  PredictionScores scores;
};

// `threads` > 1 shards per-image work; results do not depend on it.
BatchForward forward_batch(const TrmModel& model,
                           std::span<const Tensor* const> features,
                           const ComponentFlags& flags, std::size_t threads = 1);

// `cls_scale` multiplies both classification terms; the trainer uses it to
// keep the per-label weight of observed labels fixed when pseudo-labels are
// added to the batch.
struct BatchLoss {
  LossComponents parts;
  double total = 0.0;
};

// Loss of a forward pass under `labels` (observed plus any pseudo-labels).
// `bank` feeds extra contrastive positives/negatives and may be null. When
// `grads` is non-null it receives dL/dparams (overwritten).
BatchLoss batch_loss(const TrmModel& model, const BatchForward& fwd,
                     const LabelMatrix& labels, const VisualBank* bank,
                     const ComponentFlags& flags, const LossWeights& weights,
                     TrainableParams* grads, std::size_t threads = 1,
                     double cls_scale = 1.0);

// Inference scores: text-region matching p^r (or the image-mean score when
// carl is off), shape (n, C).
Tensor predict(const TrmModel& model, std::span<const Tensor* const> features,
               const ComponentFlags& flags, std::size_t threads = 1);

}  // namespace trmml

#endif  // TRMML_MODEL_HPP_
