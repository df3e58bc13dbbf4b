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

#include "trmml/experiment.hpp"

#include <set>

#include "trmml/parallel.hpp"
#include "trmml/random.hpp"

namespace trmml {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed", "dataset", "n_test", "retention", "single_positive", "stratified_mask",
      "data.n_images", "data.num_classes", "data.grid_h", "data.grid_w", "data.patch",
      "data.channels", "data.objects_min", "data.objects_max", "data.noise_std",
      "data.clutter", "data.clutter_scale", "data.seed",
      "encoder.hidden", "encoder.bias",
      "model.dim", "model.token_dim", "model.prompt_length", "model.text_hidden",
      "model.proj_hidden", "model.tau_init", "model.tau_min", "model.nce_temperature",
      "model.text_init_queries",
      "train.epochs", "train.batch_size", "train.max_lr", "train.stage1_epochs",
      "train.stage1_contrastive", "train.pseudo_labels", "train.weight_decay",
      "loss.alpha", "loss.beta", "loss.gamma",
      "asl.gamma_pos", "asl.gamma_neg", "asl.shift",
      "proto.top_k", "proto.capacity", "proto.eta", "proto.warmup",
      "components.carl", "components.kd", "components.mmcp", "components.mmcl"};
  return keys;
}

KeyValueConfig sub_config(const KeyValueConfig& cfg, const std::string& prefix) {
  KeyValueConfig out;
  for (const auto& [k, v] : cfg.entries()) {
    if (k.rfind(prefix, 0) == 0) out.set(k.substr(prefix.size()), v);
  }
  return out;
}

std::uint64_t as_u64(std::size_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& cfg) {
  for (const auto& [k, v] : cfg.entries()) {
    if (!known_keys().count(k)) throw Error(Errc::kConfigParse, "unknown config key '" + k + "'");
  }
  ExperimentConfig e;
  const std::int64_t seed = cfg.get_int("seed", 0);
  if (seed < 0) throw Error(Errc::kConfigParse, "seed must be non-negative");
  e.seed = static_cast<std::uint64_t>(seed);
  e.dataset = cfg.get_string("dataset", "");
  KeyValueConfig data = sub_config(cfg, "data.");
  if (!data.has("seed")) data.set("seed", e.seed);
  e.data = SyntheticSpec::from_config(data);
  e.n_test = cfg.get_size("n_test", e.n_test);
  if (cfg.has("retention")) {
    e.retention = cfg.get_double("retention", 1.0);
    if (!(*e.retention > 0.0 && *e.retention <= 1.0)) {
      throw Error(Errc::kConfigParse, "retention must be in (0, 1]");
    }
  }
  e.single_positive = cfg.get_bool("single_positive", false);
  e.stratified_mask = cfg.get_bool("stratified_mask", false);
  e.encoder_hidden = cfg.get_size("encoder.hidden", e.encoder_hidden);
  e.encoder_bias = cfg.get_bool("encoder.bias", e.encoder_bias);

  auto& m = e.model;
  m.num_classes = e.data.num_classes;
  m.dim = cfg.get_size("model.dim", m.dim);
  m.token_dim = cfg.get_size("model.token_dim", m.token_dim);
  m.prompt_length = cfg.get_size("model.prompt_length", m.prompt_length);
  m.text_hidden = cfg.get_size("model.text_hidden", m.text_hidden);
  m.proj_hidden = cfg.get_size("model.proj_hidden", m.proj_hidden);
  m.tau_init = cfg.get_double("model.tau_init", m.tau_init);
  m.tau_min = cfg.get_double("model.tau_min", m.tau_min);
  m.nce_temperature = cfg.get_double("model.nce_temperature", m.nce_temperature);
  m.text_init_queries = cfg.get_bool("model.text_init_queries", m.text_init_queries);

  auto& t = e.train;
  t.epochs = cfg.get_size("train.epochs", t.epochs);
  t.batch_size = cfg.get_size("train.batch_size", t.batch_size);
  t.max_lr = cfg.get_double("train.max_lr", t.max_lr);
  if (cfg.has("train.stage1_epochs")) t.stage1_epochs = cfg.get_size("train.stage1_epochs", 0);
  t.stage1_contrastive = cfg.get_bool("train.stage1_contrastive", t.stage1_contrastive);
  t.pseudo_labels = cfg.get_bool("train.pseudo_labels", t.pseudo_labels);
  t.adamw.weight_decay = cfg.get_double("train.weight_decay", t.adamw.weight_decay);
  t.weights.alpha = cfg.get_double("loss.alpha", t.weights.alpha);
  t.weights.beta = cfg.get_double("loss.beta", t.weights.beta);
  t.weights.gamma = cfg.get_double("loss.gamma", t.weights.gamma);
  t.weights.asl.gamma_pos = cfg.get_double("asl.gamma_pos", t.weights.asl.gamma_pos);
  t.weights.asl.gamma_neg = cfg.get_double("asl.gamma_neg", t.weights.asl.gamma_neg);
  t.weights.asl.shift = cfg.get_double("asl.shift", t.weights.asl.shift);
  t.prototypes.top_k = cfg.get_size("proto.top_k", t.prototypes.top_k);
  t.prototypes.capacity = cfg.get_size("proto.capacity", t.prototypes.capacity);
  t.prototypes.eta = cfg.get_double("proto.eta", t.prototypes.eta);
  t.prototypes.warmup = cfg.get_size("proto.warmup", t.prototypes.warmup);
  t.flags.carl = cfg.get_bool("components.carl", t.flags.carl);
  t.flags.kd = cfg.get_bool("components.kd", t.flags.kd);
  t.flags.mmcp = cfg.get_bool("components.mmcp", t.flags.mmcp);
  t.flags.mmcl = cfg.get_bool("components.mmcl", t.flags.mmcl);
  t.validate();
  if (e.dataset.empty() && e.n_test >= e.data.n_images) {
    throw Error(Errc::kConfigParse, "n_test must be smaller than data.n_images");
  }
  return e;
}

KeyValueConfig ExperimentConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("seed", seed);
  if (!dataset.empty()) cfg.set("dataset", dataset);
  KeyValueConfig d;
  data.to_config(d);
  for (const auto& [k, v] : d.entries()) cfg.set("data." + k, v);
  cfg.set("n_test", as_u64(n_test));
  if (retention) cfg.set("retention", *retention);
  cfg.set("single_positive", single_positive);
  cfg.set("stratified_mask", stratified_mask);
  cfg.set("encoder.hidden", as_u64(encoder_hidden));
  cfg.set("encoder.bias", encoder_bias);
  cfg.set("model.dim", as_u64(model.dim));
  cfg.set("model.token_dim", as_u64(model.token_dim));
  cfg.set("model.prompt_length", as_u64(model.prompt_length));
  cfg.set("model.text_hidden", as_u64(model.text_hidden));
  cfg.set("model.proj_hidden", as_u64(model.proj_hidden));
  cfg.set("model.tau_init", model.tau_init);
  cfg.set("model.tau_min", model.tau_min);
  cfg.set("model.nce_temperature", model.nce_temperature);
  cfg.set("model.text_init_queries", model.text_init_queries);
  cfg.set("train.epochs", as_u64(train.epochs));
  cfg.set("train.batch_size", as_u64(train.batch_size));
  cfg.set("train.max_lr", train.max_lr);
  cfg.set("train.stage1_epochs", as_u64(train.resolved_stage1_epochs()));
  cfg.set("train.stage1_contrastive", train.stage1_contrastive);
  cfg.set("train.pseudo_labels", train.pseudo_labels);
  cfg.set("train.weight_decay", train.adamw.weight_decay);
  cfg.set("loss.alpha", train.weights.alpha);
  cfg.set("loss.beta", train.weights.beta);
  cfg.set("loss.gamma", train.weights.gamma);
  cfg.set("asl.gamma_pos", train.weights.asl.gamma_pos);
  cfg.set("asl.gamma_neg", train.weights.asl.gamma_neg);
  cfg.set("asl.shift", train.weights.asl.shift);
  cfg.set("proto.top_k", as_u64(train.prototypes.top_k));
  cfg.set("proto.capacity", as_u64(train.prototypes.capacity));
  cfg.set("proto.eta", train.prototypes.eta);
  cfg.set("proto.warmup", as_u64(train.prototypes.warmup));
  cfg.set("components.carl", train.flags.carl);
  cfg.set("components.kd", train.flags.kd);
  cfg.set("components.mmcp", train.flags.mmcp);
  cfg.set("components.mmcl", train.flags.mmcl);
  return cfg;
}

std::uint64_t ExperimentConfig::encoder_seed() const { return mix_seed(seed, 101); }
std::uint64_t ExperimentConfig::model_seed() const { return mix_seed(seed, 102); }
std::uint64_t ExperimentConfig::mask_seed() const { return mix_seed(seed, 103); }
std::uint64_t ExperimentConfig::shuffle_seed() const { return mix_seed(seed, 104); }

ModelConfig resolved_model_config(const ExperimentConfig& config) {
  ModelConfig m = config.model;
  m.seed = config.model_seed();
  return m;
}

TrainConfig resolved_train_config(const ExperimentConfig& config) {
  TrainConfig t = config.train;
  t.seed = config.shuffle_seed();
  return t;
}

std::vector<AblationRow> ablation_grid() {
  return {
      {"baseline", {false, false, false, false}},
      {"+CARL", {true, false, false, false}},
      {"+CARL+KD", {true, true, false, false}},
      {"+CARL+KD+MMCP", {true, true, true, false}},
      {"+CARL+KD+MMCL", {true, true, false, true}},
      {"full", {true, true, true, true}},
  };
}

std::vector<Tensor> encode_images(const FrozenVisualEncoder& encoder,
                                  const Tensor& images, std::size_t threads) {
  if (images.rank() != 4) {
    throw Error(Errc::kShapeMismatch, "image stack " + shape_string(images.shape()));
  }
  const std::size_t n = images.dim(0);
  const Shape one = {images.dim(1), images.dim(2), images.dim(3)};
  std::vector<Tensor> out(n);
  for_each_chunk(n, threads, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto src = images.row(i);
      out[i] = encoder.encode(Tensor(one, std::vector<double>(src.begin(), src.end())));
    }
  });
  return out;
}

PreparedData prepare_data(const ExperimentConfig& config) {
  Dataset train, test;
  std::size_t grid_h = config.data.grid_h, grid_w = config.data.grid_w;
  if (config.dataset.empty()) {
    std::tie(train, test) = split_dataset(generate_synthetic(config.data), config.n_test);
  } else {
    DatasetBundle bundle = load_dataset(config.dataset);
    train = std::move(bundle.train);
    test = std::move(bundle.test);
    grid_h = bundle.manifest.get_size("grid_h", grid_h);
    grid_w = bundle.manifest.get_size("grid_w", grid_w);
  }
  if (train.num_classes() != config.model.num_classes) {
    throw Error(Errc::kConfigParse, "dataset has " + std::to_string(train.num_classes()) +
                                        " classes, config expects " +
                                        std::to_string(config.model.num_classes));
  }
  if (config.single_positive) {
    train.y_obs = mask_single_positive(train.y_full, config.mask_seed());
  } else if (config.retention) {
    train.y_obs = mask_partial(train.y_full, *config.retention, config.mask_seed(),
                               config.stratified_mask);
  }

  PreparedData out;
  out.train.observed = train.y_obs;
  out.test.truth = test.y_full;
  const std::size_t threads = config.train.threads;
  auto split_features = [](const Tensor& f) {
    std::vector<Tensor> v(f.dim(0));
    const Shape one = {f.dim(1), f.dim(2), f.dim(3)};
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto src = f.row(i);
      v[i] = Tensor(one, std::vector<double>(src.begin(), src.end()));
    }
    return v;
  };
  if (train.has_features()) {
    out.train.features = split_features(train.features);
    out.test.features = split_features(test.features);
    if (out.train.features.front().dim(2) != config.model.dim) {
      throw Error(Errc::kConfigParse, "feature dim does not match model.dim");
    }
    return out;
  }
  auto& enc = out.encoder;
  enc.image_height = train.images.dim(1);
  enc.image_width = train.images.dim(2);
  enc.channels = train.images.dim(3);
  enc.grid_h = grid_h;
  enc.grid_w = grid_w;
  enc.dim = config.model.dim;
  enc.hidden = config.encoder_hidden;
  enc.bias = config.encoder_bias;
  enc.seed = config.encoder_seed();
  const FrozenVisualEncoder encoder(enc);
  out.train.features = encode_images(encoder, train.images, threads);
  out.test.features = encode_images(encoder, test.images, threads);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const PreparedData& data, TrainState& state,
                                const MetricsSink& sink) {
  const TrainConfig train = resolved_train_config(config);
  ExperimentResult result;
  const MetricsSink collect = [&](const EpochRecord& r) {
    result.records.push_back(r);
    if (sink) sink(r);
  };
  train_stage1(train, data.train, state, &data.test, collect);
  train_stage2(train, data.train, state, &data.test, collect);
  result.final_map = evaluate_map(state.model, data.test, train.flags, train.threads);
  return result;
}

}  // namespace trmml
