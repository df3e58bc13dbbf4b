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
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "trmml/tensor_io.hpp"

namespace trmml::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "trmml");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("trmml_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "run.cfg") << "seed = 3\n"
                                        "n_test = 30\n"
                                        "data.n_images = 90\n"
                                        "data.num_classes = 4\n"
                                        "data.grid_h = 3\n"
                                        "data.grid_w = 3\n"
                                        "data.noise_std = 0.2\n"
                                        "encoder.hidden = 16\n"
                                        "model.dim = 8\n"
                                        "model.token_dim = 8\n"
                                        "model.prompt_length = 4\n"
                                        "model.text_hidden = 16\n"
                                        "model.proj_hidden = 8\n"
                                        "train.epochs = 2\n"
                                        "train.batch_size = 32\n";
  }
  fs::path cfg() const { return root_ / "run.cfg"; }

  fs::path generate(const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"generate", "--config", cfg().string(), "--out",
                                  (root_ / name).string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const Result r = invoke(args);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return root_ / name / "manifest.txt";
  }

  fs::path root_;
};

TEST_F(CliTest, GenerateIsReproducible) {
  const fs::path a = generate("a");
  const fs::path b = generate("b");
  ASSERT_TRUE(fs::exists(a));
  for (const auto& entry : fs::directory_iterator(a.parent_path())) {
    if (entry.path().extension() != ".trm") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b.parent_path() / entry.path().filename()))
        << entry.path();
  }
  const std::string manifest = slurp(a);
  EXPECT_NE(manifest.find("train_images"), std::string::npos);
  EXPECT_NE(manifest.find("train_labels_observed"), std::string::npos);
}

TEST_F(CliTest, GenerateIntoUnwritablePathIsIoError) {
  std::ofstream(root_ / "blocker") << "x";
  const Result r = invoke({"generate", "--config", cfg().string(), "--out",
                           (root_ / "blocker" / "sub").string()});
  EXPECT_EQ(r.code, kExitIo);
  EXPECT_NE(r.err.find("blocker"), std::string::npos);
}

TEST_F(CliTest, InfeasibleSpecIsConfigError) {
  const Result r = invoke({"generate", "--config", cfg().string(), "--out",
                           (root_ / "x").string(), "--retention", "0.5"});
  EXPECT_EQ(r.code, kExitOk);
  std::ofstream(cfg(), std::ios::app) << "data.objects_max = 9\n";
  EXPECT_EQ(invoke({"generate", "--config", cfg().string(), "--out", (root_ / "y").string()}).code,
            kExitConfig);
}

TEST_F(CliTest, TrainWithoutDatasetNamesTheField) {
  const Result r = invoke({"train", "--config", cfg().string(), "--out", (root_ / "t").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("dataset"), std::string::npos);
  std::ofstream(cfg(), std::ios::app) << "dataset = " << (root_ / "missing.txt").string() << "\n";
  const Result r2 = invoke({"train", "--config", cfg().string(), "--out", (root_ / "t").string()});
  EXPECT_EQ(r2.code, kExitConfig);
  EXPECT_NE(r2.err.find("dataset"), std::string::npos);
}

TEST_F(CliTest, RetentionFlagRange) {
  for (const char* ok : {"0.1", "0.5", "0.9"}) {
    EXPECT_EQ(invoke({"generate", "--config", cfg().string(), "--out",
                      (root_ / (std::string("r") + ok)).string(), "--retention", ok})
                  .code,
              kExitOk);
  }
  EXPECT_EQ(invoke({"generate", "--config", cfg().string(), "--out", (root_ / "bad").string(),
                    "--retention", "1.5"})
                .code,
            kExitConfig);
}

TEST_F(CliTest, TrainWritesMetricsCheckpointAndManifest) {
  const fs::path manifest = generate("data", {"--retention", "0.3"});
  std::ofstream(cfg(), std::ios::app) << "dataset = " << manifest.string() << "\n";
  const fs::path out = root_ / "run";
  const Result r = invoke({"train", "--config", cfg().string(), "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("final mAP"), std::string::npos);
  const std::string metrics = slurp(out / "metrics.jsonl");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 2);
  EXPECT_TRUE(fs::exists(out / "checkpoint" / "manifest.txt"));
  const std::string run_manifest = slurp(out / "run_manifest.txt");
  EXPECT_NE(run_manifest.find("config_hash"), std::string::npos);
  EXPECT_NE(run_manifest.find("run_id"), std::string::npos);

  // Same inputs: same metrics, manifest accepted unchanged.
  ASSERT_EQ(invoke({"train", "--config", cfg().string(), "--out", out.string()}).code, kExitOk);
  EXPECT_EQ(slurp(out / "metrics.jsonl"), metrics);
  // Different seed into the same directory: the manifest refuses to change.
  EXPECT_EQ(invoke({"train", "--config", cfg().string(), "--out", out.string(), "--seed", "9"}).code,
            kExitIo);

  const fs::path dump = root_ / "dump";
  const Result d = invoke({"dump-regions", "--checkpoint", (out / "checkpoint").string(),
                           "--images", "0,1,2", "--out", dump.string()});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  for (int id : {0, 1, 2}) {
    const Tensor e = read_tensor(dump / ("regions_" + std::to_string(id) + ".trm"));
    EXPECT_EQ(e.shape(), (Shape{4, 3, 3}));
    std::istringstream side(slurp(dump / ("regions_" + std::to_string(id) + ".top3.txt")));
    std::string line;
    std::getline(side, line);  // header
    std::vector<double> scores;
    std::size_t cls;
    double s;
    while (side >> cls >> s) scores.push_back(s);
    ASSERT_EQ(scores.size(), 3u);
    EXPECT_GE(scores[0], scores[1]);
    EXPECT_GE(scores[1], scores[2]);
  }
  const std::string first = slurp(dump / "regions_0.trm");
  ASSERT_EQ(invoke({"dump-regions", "--checkpoint", (out / "checkpoint").string(), "--images", "0",
                    "--out", dump.string()})
                .code,
            kExitOk);
  EXPECT_EQ(slurp(dump / "regions_0.trm"), first);
}

TEST_F(CliTest, SinglePositiveAndDisableFlags) {
  const fs::path manifest = generate("data");
  std::ofstream(cfg(), std::ios::app) << "dataset = " << manifest.string() << "\n";
  const fs::path out = root_ / "sp";
  ASSERT_EQ(invoke({"train", "--config", cfg().string(), "--out", out.string(), "--single-positive",
                    "--disable", "kd,mmcl", "--stage1-epochs", "1"})
                .code,
            kExitOk);
  const std::string resolved = slurp(out / "config.resolved.txt");
  EXPECT_NE(resolved.find("single_positive = true"), std::string::npos);
  EXPECT_NE(resolved.find("components.kd = false"), std::string::npos);
  EXPECT_NE(resolved.find("components.mmcl = false"), std::string::npos);
  EXPECT_NE(resolved.find("train.stage1_epochs = 1"), std::string::npos);
  EXPECT_EQ(invoke({"train", "--config", cfg().string(), "--out", (root_ / "z").string(),
                    "--disable", "bogus"})
                .code,
            kExitConfig);
}

TEST_F(CliTest, AblateEmitsSixRows) {
  std::ofstream(cfg(), std::ios::app) << "seeds = 1,2\ntrain.epochs = 1\ntrain.stage1_epochs = 0\n";
  const fs::path out = root_ / "abl";
  const Result r = invoke({"ablate", "--config", cfg().string(), "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = slurp(out / "ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  for (const char* name : {"baseline", "+CARL", "+CARL+KD", "+CARL+KD+MMCP", "+CARL+KD+MMCL", "full"})
    EXPECT_NE(csv.find(std::string(",") + name + ","), std::string::npos) << name;
  EXPECT_TRUE(fs::exists(out / "metrics_row5_seed2.jsonl"));
}

TEST_F(CliTest, UnknownSubcommandIsConfigError) {
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(invoke({"dump-regions", "--checkpoint", (root_ / "none").string(), "--images", "0",
                    "--out", (root_ / "o").string()})
                .code,
            kExitIo);
}

}  // namespace
}  // namespace trmml::cli
