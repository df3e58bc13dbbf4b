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

#ifndef TRMML_EXPERIMENT_HPP_
#define TRMML_EXPERIMENT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trmml/config.hpp"
#include "trmml/data.hpp"
#include "trmml/encoders.hpp"
#include "trmml/trainer.hpp"

namespace trmml {

// Everything needed to reproduce one training run. Flat keys:
//   seed, dataset, n_test, retention, single_positive, stratified_mask,
//   data.*, encoder.{hidden,bias}, model.*, train.*, loss.*, asl.*,
//   proto.*, components.{carl,kd,mmcp,mmcl}
// Unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string dataset;  // manifest path; empty means generate from `data`
  SyntheticSpec data;   // data.seed defaults to `seed`
  std::size_t n_test = 500;
  std::optional<double> retention;  // re-mask the training labels when set
  bool single_positive = false;
  bool stratified_mask = false;
  std::size_t encoder_hidden = 128;
  bool encoder_bias = true;
  ModelConfig model;
  TrainConfig train;

  // Throws ConfigParse.
  static ExperimentConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;

  // Seeds of the individual random streams, all derived from `seed`.
  std::uint64_t encoder_seed() const;
  std::uint64_t model_seed() const;
  std::uint64_t mask_seed() const;
  std::uint64_t shuffle_seed() const;
};

struct PreparedData {
  TrainData train;
  EvalData test;
  VisualEncoderConfig encoder;
};

// Loads or generates the dataset, masks the training labels and encodes every
// image once with the frozen visual encoder.
PreparedData prepare_data(const ExperimentConfig& config);

// Model and train configs with the derived seeds filled in.
ModelConfig resolved_model_config(const ExperimentConfig& config);
TrainConfig resolved_train_config(const ExperimentConfig& config);

struct ExperimentResult {
  std::vector<EpochRecord> records;
  double final_map = 0.0;
};

// Both stages end to end; every epoch record is forwarded to `sink` as well.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const PreparedData& data, TrainState& state,
                                const MetricsSink& sink = {});

struct AblationRow {
  const char* name;
  ComponentFlags flags;
};

// The six component settings compared by an ablation sweep, in report order:
// baseline, +CARL, +CARL+KD, +CARL+KD+MMCP, +CARL+KD+MMCL, full. The baseline
// matches each class text against the image-mean feature.
std::vector<AblationRow> ablation_grid();

// Encodes an (n, H, W, ch) image stack into per-image feature maps.
std::vector<Tensor> encode_images(const FrozenVisualEncoder& encoder,
                                  const Tensor& images, std::size_t threads = 1);

}  // namespace trmml

#endif  // TRMML_EXPERIMENT_HPP_
