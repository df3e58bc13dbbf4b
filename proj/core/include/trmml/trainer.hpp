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

#ifndef TRMML_TRAINER_HPP_
#define TRMML_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trmml/config.hpp"
#include "trmml/labels.hpp"
#include "trmml/model.hpp"
#include "trmml/optim.hpp"
#include "trmml/prototypes.hpp"

namespace trmml {

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 128;
  double max_lr = 5e-4;
  LossWeights weights;
  std::optional<std::size_t> stage1_epochs;  // epochs / 2 when unset
  PrototypeConfig prototypes;
  AdamWConfig adamw;
  ComponentFlags flags;
  bool stage1_contrastive = true;  // L_nce active during stage 1
  bool pseudo_labels = true;       // stage-2 label estimation switch
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  std::size_t resolved_stage1_epochs() const {
    return stage1_epochs ? *stage1_epochs : epochs / 2;
  }
  // Throws ConfigParse.
  void validate() const;
};

struct TrainData {
  std::vector<Tensor> features;  // (h, w, d) per image
  LabelMatrix observed;
};

struct EvalData {
  std::vector<Tensor> features;
  LabelMatrix truth;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, counted across both stages
  std::size_t step = 0;   // optimizer steps taken so far
  int stage = 1;
  double loss = 0.0;
  double cls_q = 0.0;
  double cls_r = 0.0;
  double kd = 0.0;
  double nce = 0.0;
  std::size_t pseudo_labels = 0;
  std::size_t inversions = 0;
  std::optional<double> map;

  std::string to_json_line() const;
};

using MetricsSink = std::function<void(const EpochRecord&)>;

struct TrainState {
  TrmModel model;
  AdamW optimizer;
  MultimodalPrototypes prototypes;
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::uint64_t text_encoder_checksum = 0;

  TrainState(const ModelConfig& model_config, const TrainConfig& config);
};

// Steps per epoch and over the whole run; the learning-rate schedule spans
// both stages.
std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size);

// Observed labels only; snapshots the text prototypes on completion.
// Throws DivergenceDetected on a non-finite loss.
void train_stage1(const TrainConfig& config, const TrainData& data,
                  TrainState& state, const EvalData* eval = nullptr,
                  const MetricsSink& sink = {});

// Requires the text prototypes from stage 1.
void train_stage2(const TrainConfig& config, const TrainData& data,
                  TrainState& state, const EvalData* eval = nullptr,
                  const MetricsSink& sink = {});

// p_r scores for every image, evaluated in fixed-size batches.
Tensor predict_all(const TrmModel& model, const std::vector<Tensor>& features,
                   const ComponentFlags& flags, std::size_t threads = 1);

double evaluate_map(const TrmModel& model, const EvalData& eval,
                    const ComponentFlags& flags, std::size_t threads = 1);

}  // namespace trmml

#endif  // TRMML_TRAINER_HPP_
