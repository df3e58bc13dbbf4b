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

#include "trmml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "trmml/metrics.hpp"
#include "trmml/random.hpp"

namespace trmml {
namespace {

constexpr std::size_t kEvalBatch = 256;

struct Accumulator {
  double loss = 0.0, cls_q = 0.0, cls_r = 0.0, kd = 0.0, nce = 0.0;
  std::size_t batches = 0;
  std::size_t pseudo = 0, inversions = 0;

  void add(const BatchLoss& b) {
    loss += b.total;
    cls_q += b.parts.cls_q;
    cls_r += b.parts.cls_r;
    kd += b.parts.kd;
    nce += b.parts.nce;
    ++batches;
  }
};

void check_data(const TrainData& data, const TrmModel& model) {
  if (data.features.size() != data.observed.rows() || data.features.empty()) {
    throw Error(Errc::kShapeMismatch, "training features and labels differ in count");
  }
  if (data.observed.cols() != model.config().num_classes) {
    throw Error(Errc::kShapeMismatch, "label width does not match num_classes");
  }
}

void check_frozen(const TrainState& state) {
  if (state.model.text_encoder().weight_checksum() != state.text_encoder_checksum) {
    throw Error(Errc::kCheckpointCorrupt, "frozen text encoder changed");
  }
}

LabelMatrix merge_labels(const LabelMatrix& observed, const LabelMatrix& pseudo) {
  LabelMatrix out = observed;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      if (out(i, c) == 0) out(i, c) = pseudo(i, c);
    }
  }
  return out;
}

void apply_step(const TrainConfig& config, TrainState& state,
                const TrainableParams& grads, double lr) {
  state.optimizer.step(state.model.params, grads, lr);
  const double floor = std::log(state.model.config().tau_min);
  auto& lt = state.model.params.log_tau[0];
  if (lt < floor) lt = floor;
  bool finite = true;
  state.model.params.visit([&](std::string_view, const Tensor& t) {
    finite = finite && t.all_finite();
  });
  if (!finite) {
    throw Error(Errc::kDivergenceDetected,
                "non-finite parameters after step " + std::to_string(state.step + 1));
  }
  (void)config;
}

void run_epochs(const TrainConfig& config, const TrainData& data,
                TrainState& state, const EvalData* eval, const MetricsSink& sink,
                int stage, std::size_t epochs) {
  check_data(data, state.model);
  const std::size_t n = data.features.size();
  const std::size_t per_epoch = steps_per_epoch(n, config.batch_size);
  const OneCycleSchedule schedule(config.max_lr, std::max<std::size_t>(1, config.epochs * per_epoch));

  ComponentFlags flags = config.flags;
  if (stage == 1) {
    flags.mmcp = false;
    flags.mmcl = flags.mmcl && config.stage1_contrastive;
  }
  const bool keep_bank = config.flags.carl && (config.flags.mmcp || config.flags.mmcl);
  const bool estimate = stage == 2 && flags.mmcp && config.pseudo_labels;
  const bool track = stage == 2 && flags.mmcp && flags.carl;

  std::vector<std::size_t> order(n);
  std::vector<const Tensor*> batch;
  std::vector<std::size_t> idx;
  for (std::size_t e = 0; e < epochs; ++e) {
    ++state.epoch;
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(config.seed, 5000 + state.epoch);
    std::shuffle(order.begin(), order.end(), rng);
    Accumulator acc;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const std::size_t end = std::min(n, b + config.batch_size);
      idx.assign(order.begin() + b, order.begin() + end);
      batch.clear();
      for (auto i : idx) batch.push_back(&data.features[i]);
      const LabelMatrix observed = data.observed.gather(idx);

      const BatchForward fwd = forward_batch(state.model, batch, flags, config.threads);
      LabelMatrix labels = observed;
      double cls_scale = 1.0;
      if (estimate) {
        const auto pseudo = state.prototypes.estimate(fwd.region_repr, observed);
        acc.pseudo += pseudo.labels.count_nonzero();
        acc.inversions += pseudo.inversions;
        labels = merge_labels(observed, pseudo.labels);
        // Classification terms are means over their labels; rescale so that
        // pseudo-labels add terms without shrinking the weight of observed ones.
        cls_scale = static_cast<double>(labels.count_nonzero()) /
                    static_cast<double>(std::max<std::size_t>(1, observed.count_nonzero()));
      }
      TrainableParams grads;
      BatchLoss loss;
      try {
        loss = batch_loss(state.model, fwd, labels,
                          flags.mmcl ? &state.prototypes.bank() : nullptr, flags,
                          config.weights, &grads, config.threads, cls_scale);
      } catch (const Error& err) {
        if (err.code() != Errc::kNonFiniteComponent) throw;
        throw Error(Errc::kDivergenceDetected, "step " + std::to_string(state.step + 1) +
                                                   ": " + err.what());
      }
      apply_step(config, state, grads, schedule.lr(state.step));
      ++state.step;
      acc.add(loss);

      // Threshold statistics and the bank only ever see observed labels and
      // the representations computed before this step.
      if (track) state.prototypes.update_thresholds(fwd.region_repr, observed);
      if (keep_bank) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
          state.prototypes.push_image(fwd.regions[k].regions.energies, *batch[k],
                                      observed.row(k));
        }
      }
    }
    check_frozen(state);
    if (sink) {
      EpochRecord rec;
      const double nb = static_cast<double>(std::max<std::size_t>(1, acc.batches));
      rec.epoch = state.epoch;
      rec.step = state.step;
      rec.stage = stage;
      rec.loss = acc.loss / nb;
      rec.cls_q = acc.cls_q / nb;
      rec.cls_r = acc.cls_r / nb;
      rec.kd = acc.kd / nb;
      rec.nce = acc.nce / nb;
      rec.pseudo_labels = acc.pseudo;
      rec.inversions = acc.inversions;
      if (eval) rec.map = evaluate_map(state.model, *eval, config.flags, config.threads);
      sink(rec);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::kConfigParse, what); };
  if (batch_size == 0) fail("train.batch_size must be positive");
  if (!(max_lr > 0.0)) fail("train.max_lr must be positive");
  if (epochs > 0 && resolved_stage1_epochs() >= epochs) {
    fail("train.stage1_epochs must be smaller than train.epochs");
  }
  if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.gamma < 0.0) {
    fail("loss weights must be non-negative");
  }
  if (prototypes.top_k == 0 || prototypes.capacity == 0) {
    fail("prototype top_k and capacity must be positive");
  }
  if (!(prototypes.eta > 0.0 && prototypes.eta < 1.0)) fail("proto.eta must be in (0, 1)");
}

std::string EpochRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["step"] = step;
  j["stage"] = stage;
  j["loss"] = loss;
  j["cls_q"] = cls_q;
  j["cls_r"] = cls_r;
  j["kd"] = kd;
  j["nce"] = nce;
  j["pseudo_labels"] = pseudo_labels;
  j["inversions"] = inversions;
  j["map"] = map ? nlohmann::ordered_json(*map) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

TrainState::TrainState(const ModelConfig& model_config, const TrainConfig& config)
    : model(model_config),
      optimizer(model.params, config.adamw),
      prototypes(model_config.num_classes, model_config.dim, config.prototypes),
      text_encoder_checksum(model.text_encoder().weight_checksum()) {}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  if (batch_size == 0) throw Error(Errc::kInvalidDimension, "batch size 0");
  return (n + batch_size - 1) / batch_size;
}

void train_stage1(const TrainConfig& config, const TrainData& data,
                  TrainState& state, const EvalData* eval, const MetricsSink& sink) {
  config.validate();
  run_epochs(config, data, state, eval, sink, 1, config.resolved_stage1_epochs());
  state.prototypes.set_text_prototypes(state.model.text_representations());
}

void train_stage2(const TrainConfig& config, const TrainData& data,
                  TrainState& state, const EvalData* eval, const MetricsSink& sink) {
  config.validate();
  if (!state.prototypes.has_text_prototypes()) {
    throw Error(Errc::kColdThresholds, "stage 2 needs the stage-1 text prototypes");
  }
  run_epochs(config, data, state, eval, sink, 2,
             config.epochs - config.resolved_stage1_epochs());
}

Tensor predict_all(const TrmModel& model, const std::vector<Tensor>& features,
                   const ComponentFlags& flags, std::size_t threads) {
  const std::size_t n = features.size(), C = model.config().num_classes;
  Tensor out({n, C});
  std::vector<const Tensor*> batch;
  for (std::size_t b = 0; b < n; b += kEvalBatch) {
    const std::size_t end = std::min(n, b + kEvalBatch);
    batch.clear();
    for (std::size_t i = b; i < end; ++i) batch.push_back(&features[i]);
    const Tensor s = predict(model, batch, flags, threads);
    std::copy(s.data().begin(), s.data().end(), out.data().begin() + b * C);
  }
  return out;
}

double evaluate_map(const TrmModel& model, const EvalData& eval,
                    const ComponentFlags& flags, std::size_t threads) {
  return mean_ap(predict_all(model, eval.features, flags, threads), eval.truth);
}

}  // namespace trmml
