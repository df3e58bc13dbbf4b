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

#include <filesystem>

#include <gtest/gtest.h>

#include "trmml/checkpoint.hpp"
#include "trmml/error.hpp"
#include "trmml/experiment.hpp"
#include "trmml/trainer.hpp"

namespace trmml {
namespace {

namespace fs = std::filesystem;

ExperimentConfig small_experiment(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.data.n_images = 120;
  cfg.data.num_classes = 4;
  cfg.data.grid_h = cfg.data.grid_w = 3;
  cfg.data.patch = 2;
  cfg.data.noise_std = 0.2;
  cfg.data.seed = seed;
  cfg.n_test = 40;
  cfg.retention = 0.3;
  cfg.encoder_hidden = 16;
  cfg.model.num_classes = 4;
  cfg.model.dim = 8;
  cfg.model.token_dim = 8;
  cfg.model.prompt_length = 4;
  cfg.model.text_hidden = 16;
  cfg.model.proj_hidden = 8;
  cfg.train.epochs = 6;
  cfg.train.batch_size = 32;
  cfg.train.max_lr = 5e-3;
  cfg.train.prototypes.warmup = 2;
  return cfg;
}

std::vector<std::string> run_lines(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  TrainState state(resolved_model_config(cfg), resolved_train_config(cfg));
  std::vector<std::string> lines;
  run_experiment(cfg, data, state, [&](const EpochRecord& r) { lines.push_back(r.to_json_line()); });
  return lines;
}

TEST(TrainerTest, ZeroEpochsLeavesInitialState) {
  ExperimentConfig cfg = small_experiment(1);
  cfg.train.epochs = 0;
  const PreparedData data = prepare_data(cfg);
  TrainState state(resolved_model_config(cfg), resolved_train_config(cfg));
  const TrmModel fresh(resolved_model_config(cfg));
  train_stage1(resolved_train_config(cfg), data.train, state);
  EXPECT_EQ(state.step, 0u);
  EXPECT_EQ(state.model.params.prompts.context, fresh.params.prompts.context);
  EXPECT_EQ(state.model.params.region.queries, fresh.params.region.queries);
  ASSERT_TRUE(state.prototypes.has_text_prototypes());
  EXPECT_EQ(state.prototypes.text_prototypes(), fresh.text_representations());
}

TEST(TrainerTest, SingleStepDescends) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg = small_experiment(seed);
    cfg.train.epochs = 2;
    cfg.train.stage1_epochs = 1;
    cfg.train.batch_size = 80;  // the whole training split
    cfg.train.max_lr = 1e-3;
    const PreparedData data = prepare_data(cfg);
    const TrainConfig tc = resolved_train_config(cfg);
    TrainState state(resolved_model_config(cfg), tc);
    std::vector<const Tensor*> all;
    for (const auto& f : data.train.features) all.push_back(&f);
    const auto loss_now = [&] {
      const auto fwd = forward_batch(state.model, all, tc.flags);
      ComponentFlags flags = tc.flags;
      flags.mmcp = false;
      return batch_loss(state.model, fwd, data.train.observed, nullptr, flags, tc.weights, nullptr)
          .total;
    };
    const double before = loss_now();
    train_stage1(tc, data.train, state);
    ASSERT_EQ(state.step, 1u);
    EXPECT_LT(loss_now(), before) << "seed " << seed;
  }
}

TEST(TrainerTest, FrozenWeightsAndFixedTokensNeverChange) {
  const ExperimentConfig cfg = small_experiment(2);
  const PreparedData data = prepare_data(cfg);
  TrainState state(resolved_model_config(cfg), resolved_train_config(cfg));
  const auto text_sum = state.model.text_encoder().weight_checksum();
  const Tensor tokens = state.model.params.prompts.class_tokens;
  const Tensor context = state.model.params.prompts.context;
  run_experiment(cfg, data, state);
  EXPECT_EQ(state.model.text_encoder().weight_checksum(), text_sum);
  EXPECT_EQ(state.model.params.prompts.class_tokens, tokens);
  EXPECT_NE(state.model.params.prompts.context, context);
}

TEST(TrainerTest, StageTwoNeedsTextPrototypes) {
  const ExperimentConfig cfg = small_experiment(3);
  const PreparedData data = prepare_data(cfg);
  TrainState state(resolved_model_config(cfg), resolved_train_config(cfg));
  try {
    train_stage2(resolved_train_config(cfg), data.train, state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kColdThresholds);
  }
}

TEST(TrainerTest, IdenticalRunsGiveIdenticalMetrics) {
  const auto a = run_lines(small_experiment(4));
  const auto b = run_lines(small_experiment(4));
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, run_lines(small_experiment(5)));
}

TEST(TrainerTest, ThreadedRunMatchesSerialRun) {
  ExperimentConfig cfg = small_experiment(6);
  const auto serial = run_lines(cfg);
  cfg.train.threads = 3;
  EXPECT_EQ(run_lines(cfg), serial);
}

TEST(TrainerTest, WarmupSuppressesEarlyPseudoLabels) {
  ExperimentConfig cfg = small_experiment(7);
  cfg.train.prototypes.warmup = 7;  // 3 batches per epoch
  std::vector<EpochRecord> recs;
  const PreparedData data = prepare_data(cfg);
  TrainState state(resolved_model_config(cfg), resolved_train_config(cfg));
  run_experiment(cfg, data, state, [&](const EpochRecord& r) { recs.push_back(r); });
  ASSERT_EQ(recs.size(), 6u);
  for (const auto& r : recs) {
    if (r.stage == 1 || r.epoch <= 5) {
      EXPECT_EQ(r.pseudo_labels, 0u) << r.epoch;
    }
  }
}

TEST(TrainerTest, FullLabelsMakePseudoLabelingANoOp) {
  ExperimentConfig cfg = small_experiment(8);
  cfg.retention = 1.0;
  cfg.train.prototypes.warmup = 1;
  const auto with = run_lines(cfg);
  cfg.train.pseudo_labels = false;
  EXPECT_EQ(run_lines(cfg), with);
}

TEST(TrainerTest, ValidateRejectsBadSplit) {
  TrainConfig tc;
  tc.epochs = 4;
  tc.stage1_epochs = 4;
  EXPECT_THROW(tc.validate(), Error);
  tc.stage1_epochs.reset();
  EXPECT_EQ(tc.resolved_stage1_epochs(), 2u);
  EXPECT_NO_THROW(tc.validate());
}

TEST(EpochRecordTest, JsonLineLayout) {
  EpochRecord r;
  r.epoch = 3;
  r.step = 12;
  r.stage = 2;
  r.loss = 0.5;
  r.pseudo_labels = 7;
  EXPECT_EQ(r.to_json_line(),
            R"({"epoch":3,"step":12,"stage":2,"loss":0.5,"cls_q":0.0,"cls_r":0.0,"kd":0.0,)"
            R"("nce":0.0,"pseudo_labels":7,"inversions":0,"map":null})");
  r.map = 0.25;
  EXPECT_NE(r.to_json_line().find(R"("map":0.25)"), std::string::npos);
}

TEST(CheckpointTest, RoundTripRestoresEverything) {
  const ExperimentConfig cfg = small_experiment(9);
  const PreparedData data = prepare_data(cfg);
  TrainState state(resolved_model_config(cfg), resolved_train_config(cfg));
  run_experiment(cfg, data, state);
  const fs::path dir = fs::temp_directory_path() / "trmml_ckpt_test";
  fs::remove_all(dir);
  save_checkpoint(dir, state, cfg.to_config());

  const auto stored = ExperimentConfig::from_config(checkpoint_config(dir));
  TrainState back(resolved_model_config(stored), resolved_train_config(stored));
  load_checkpoint(dir, back);
  EXPECT_EQ(back.step, state.step);
  EXPECT_EQ(back.epoch, state.epoch);
  EXPECT_EQ(back.optimizer.steps(), state.optimizer.steps());
  std::vector<const Tensor*> a, b;
  state.model.params.visit([&](std::string_view, const Tensor& t) { a.push_back(&t); });
  back.model.params.visit([&](std::string_view, const Tensor& t) { b.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
  EXPECT_EQ(back.prototypes.bank(), state.prototypes.bank());
  EXPECT_EQ(back.prototypes.text_prototypes(), state.prototypes.text_prototypes());
  EXPECT_EQ(back.prototypes.visual_thresholds(), state.prototypes.visual_thresholds());
  EXPECT_EQ(back.prototypes.text_thresholds(), state.prototypes.text_thresholds());
  EXPECT_EQ(predict_all(back.model, data.test.features, cfg.train.flags),
            predict_all(state.model, data.test.features, cfg.train.flags));
}

TEST(CheckpointTest, CorruptDirectoriesAreRejected) {
  const fs::path dir = fs::temp_directory_path() / "trmml_ckpt_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  try {
    (void)checkpoint_config(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kCheckpointCorrupt);
  }
}

TEST(ExperimentTest, ConfigRoundTripAndUnknownKeys) {
  const ExperimentConfig cfg = small_experiment(10);
  const auto kv = cfg.to_config();
  EXPECT_EQ(ExperimentConfig::from_config(kv).to_config().serialize(), kv.serialize());
  KeyValueConfig bad = kv;
  bad.set("train.epochz", std::int64_t{3});
  try {
    (void)ExperimentConfig::from_config(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kConfigParse);
    EXPECT_NE(std::string(e.what()).find("train.epochz"), std::string::npos);
  }
}

TEST(ExperimentTest, DerivedSeedsDiffer) {
  const ExperimentConfig cfg = small_experiment(11);
  EXPECT_NE(cfg.encoder_seed(), cfg.model_seed());
  EXPECT_NE(cfg.mask_seed(), cfg.shuffle_seed());
  EXPECT_EQ(resolved_model_config(cfg).seed, cfg.model_seed());
}

TEST(ExperimentTest, AblationGridOrder) {
  const auto grid = ablation_grid();
  ASSERT_EQ(grid.size(), 6u);
  EXPECT_STREQ(grid.front().name, "baseline");
  EXPECT_EQ(grid.front().flags, (ComponentFlags{false, false, false, false}));
  EXPECT_EQ(grid.back().flags, ComponentFlags{});
  EXPECT_EQ(grid[3].flags, (ComponentFlags{true, true, true, false}));
  EXPECT_EQ(grid[4].flags, (ComponentFlags{true, true, false, true}));
}

}  // namespace
}  // namespace trmml
