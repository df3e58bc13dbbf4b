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

#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trmml/checkpoint.hpp"
#include "trmml/config.hpp"
#include "trmml/data.hpp"
#include "trmml/error.hpp"
#include "trmml/experiment.hpp"
#include "trmml/tensor_io.hpp"

namespace trmml::cli {
namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<double> retention;
  bool single_positive = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stage1_epochs;
  std::vector<std::string> disable;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t env_threads() {
  const char* v = std::getenv("TRM_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0) {
    throw Error(Errc::kConfigParse, std::string("TRM_THREADS must be a positive integer, got '") +
                                        v + "'");
  }
  return n;
}

// Defaults < config file < command-line flags.
KeyValueConfig resolve(const CommonFlags& f) {
  KeyValueConfig cfg;
  if (!f.config.empty()) cfg = KeyValueConfig::load(f.config);
  KeyValueConfig overrides;
  if (f.retention) overrides.set("retention", *f.retention);
  if (f.single_positive) overrides.set("single_positive", true);
  if (f.seed) overrides.set("seed", *f.seed);
  if (f.stage1_epochs) overrides.set("train.stage1_epochs", static_cast<std::uint64_t>(*f.stage1_epochs));
  for (const auto& name : f.disable) {
    if (name != "carl" && name != "kd" && name != "mmcp" && name != "mmcl") {
      throw Error(Errc::kConfigParse, "--disable accepts carl, kd, mmcp, mmcl; got '" + name + "'");
    }
    overrides.set("components." + name, false);
  }
  cfg.merge(overrides);
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoError, dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text) || !f.flush()) {
    throw Error(Errc::kIoError, "cannot write " + path.string());
  }
}

std::string join(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

// A manifest, once written, is never replaced by a different one.
void write_run_manifest(const fs::path& out, const std::string& config_path,
                        const KeyValueConfig& resolved,
                        const std::vector<std::uint64_t>& seeds) {
  const std::string serialized = resolved.serialize();
  const std::uint64_t hash = fnv1a(serialized);
  KeyValueConfig m;
  m.set("config_path", config_path);
  m.set("config_hash", hex64(hash));
  m.set("seeds", join(seeds));
  m.set("out_dir", out.string());
  m.set("run_id", hex64(fnv1a(hex64(hash) + "/" + join(seeds))).substr(0, 12));
  const fs::path path = out / "run_manifest.txt";
  const std::string text = m.serialize();
  if (fs::exists(path)) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    if (ss.str() != text) {
      throw Error(Errc::kIoError, path.string() +
                                      " already exists for a different run; choose another --out");
    }
  } else {
    write_text(path, text);
  }
  write_text(out / "config.resolved.txt", serialized);
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kConfigParse:
    case Errc::kInvalidRatio:
    case Errc::kSpecInfeasible:
    case Errc::kNoPositiveAvailable:
      return kExitConfig;
    case Errc::kDivergenceDetected:
      return kExitDivergence;
    default:
      return kExitIo;
  }
}

int cmd_generate(const CommonFlags& flags, std::ostream& out) {
  if (flags.out.empty()) throw Error(Errc::kConfigParse, "--out is required");
  const KeyValueConfig resolved = resolve(flags);
  const ExperimentConfig exp = ExperimentConfig::from_config(resolved);
  auto [train, test] = split_dataset(generate_synthetic(exp.data), exp.n_test);
  if (exp.single_positive) {
    train.y_obs = mask_single_positive(train.y_full, exp.mask_seed());
  } else if (exp.retention) {
    train.y_obs = mask_partial(train.y_full, *exp.retention, exp.mask_seed(), exp.stratified_mask);
  }
  KeyValueConfig extra;
  exp.data.to_config(extra);
  const fs::path manifest = write_dataset(flags.out, train, test, extra);
  out << manifest.string() << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
  if (flags.out.empty()) throw Error(Errc::kConfigParse, "--out is required");
  KeyValueConfig resolved = resolve(flags);
  if (!resolved.has("dataset")) {
    throw Error(Errc::kConfigParse, "missing required field 'dataset' (path to a dataset manifest)");
  }
  if (!fs::exists(resolved.require("dataset"))) {
    throw Error(Errc::kConfigParse, "field 'dataset': manifest " + resolved.require("dataset") +
                                        " does not exist");
  }
  ExperimentConfig exp = ExperimentConfig::from_config(resolved);
  exp.train.threads = env_threads();
  const KeyValueConfig canonical = exp.to_config();
  const fs::path dir = flags.out;
  ensure_dir(dir);
  write_run_manifest(dir, flags.config, canonical, {exp.seed});

  const PreparedData data = prepare_data(exp);
  TrainState state(resolved_model_config(exp), resolved_train_config(exp));
  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  if (!metrics) throw Error(Errc::kIoError, "cannot write " + (dir / "metrics.jsonl").string());
  try {
    const ExperimentResult result =
        run_experiment(exp, data, state, [&](const EpochRecord& r) {
          metrics << r.to_json_line() << "\n";
          metrics.flush();
        });
    save_checkpoint(dir / "checkpoint", state, canonical);
    out << "final mAP " << std::fixed << std::setprecision(4) << result.final_map << "\n";
  } catch (const Error& e) {
    if (e.code() == Errc::kDivergenceDetected) {
      save_checkpoint(dir / "divergence_dump", state, canonical);
      err << "state dumped to " << (dir / "divergence_dump").string() << "\n";
    }
    throw;
  }
  return kExitOk;
}

int cmd_ablate(const CommonFlags& flags, std::ostream& out) {
  if (flags.out.empty()) throw Error(Errc::kConfigParse, "--out is required");
  KeyValueConfig resolved = resolve(flags);
  std::vector<std::uint64_t> seeds;
  if (flags.seed) {
    seeds = {*flags.seed};
  } else {
    seeds = resolved.get_u64_list("seeds", {static_cast<std::uint64_t>(resolved.get_int("seed", 0))});
  }
  if (seeds.empty()) throw Error(Errc::kConfigParse, "field 'seeds' is empty");
  KeyValueConfig base;
  for (const auto& [k, v] : resolved.entries()) {
    if (k != "seeds") base.set(k, v);
  }
  const std::size_t threads = env_threads();
  const fs::path dir = flags.out;
  ensure_dir(dir);
  {
    ExperimentConfig exp = ExperimentConfig::from_config(base);
    write_run_manifest(dir, flags.config, exp.to_config(), seeds);
  }

  const auto grid = ablation_grid();
  std::vector<std::vector<double>> maps(grid.size());
  for (const auto seed : seeds) {
    KeyValueConfig seeded = base;
    seeded.set("seed", seed);
    ExperimentConfig exp = ExperimentConfig::from_config(seeded);
    exp.train.threads = threads;
    const PreparedData data = prepare_data(exp);
    for (std::size_t r = 0; r < grid.size(); ++r) {
      ExperimentConfig row = exp;
      row.train.flags = grid[r].flags;
      TrainState state(resolved_model_config(row), resolved_train_config(row));
      std::ofstream metrics(dir / ("metrics_row" + std::to_string(r) + "_seed" +
                                   std::to_string(seed) + ".jsonl"),
                            std::ios::binary | std::ios::trunc);
      const ExperimentResult res = run_experiment(row, data, state, [&](const EpochRecord& e) {
        metrics << e.to_json_line() << "\n";
      });
      maps[r].push_back(res.final_map);
    }
  }
  std::ostringstream csv;
  csv << "row,components,mean_map";
  for (auto s : seeds) csv << ",seed_" << s;
  csv << "\n";
  out << std::left << std::setw(16) << "components" << "mean mAP\n";
  for (std::size_t r = 0; r < grid.size(); ++r) {
    double mean = 0.0;
    for (double m : maps[r]) mean += m;
    mean /= static_cast<double>(maps[r].size());
    csv << r << "," << grid[r].name << "," << format_double(mean);
    for (double m : maps[r]) csv << "," << format_double(m);
    csv << "\n";
    out << std::left << std::setw(16) << grid[r].name << std::fixed << std::setprecision(4)
        << mean * 100.0 << "\n";
  }
  write_text(dir / "ablation.csv", csv.str());
  return kExitOk;
}

struct DumpFlags {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::vector<std::size_t> images;
  std::string out;
};

int cmd_dump_regions(const DumpFlags& flags, std::ostream& out) {
  if (flags.out.empty()) throw Error(Errc::kConfigParse, "--out is required");
  KeyValueConfig cfg = checkpoint_config(flags.checkpoint);
  if (!flags.dataset.empty()) cfg.set("dataset", flags.dataset);
  ExperimentConfig exp;
  try {
    exp = ExperimentConfig::from_config(cfg);
  } catch (const Error& e) {
    throw Error(Errc::kCheckpointCorrupt, std::string("stored configuration: ") + e.what());
  }
  TrainState state(resolved_model_config(exp), resolved_train_config(exp));
  load_checkpoint(flags.checkpoint, state);
  const PreparedData data = prepare_data(exp);
  if (flags.split != "train" && flags.split != "test") {
    throw Error(Errc::kConfigParse, "--split must be train or test");
  }
  const auto& feats = flags.split == "train" ? data.train.features : data.test.features;
  const fs::path dir = flags.out;
  ensure_dir(dir);
  const std::size_t C = exp.model.num_classes;
  for (const std::size_t id : flags.images) {
    if (id >= feats.size()) {
      throw Error(Errc::kConfigParse, "image id " + std::to_string(id) + " out of range (" +
                                          std::to_string(feats.size()) + " images)");
    }
    const RegionOutputs r = region_forward(state.model.params.region, feats[id]);
    write_tensor(dir / ("regions_" + std::to_string(id) + ".trm"), r.regions.energies);
    const Tensor* one[] = {&feats[id]};
    const Tensor scores = predict(state.model, one, exp.train.flags);
    std::vector<std::size_t> order(C);
    for (std::size_t c = 0; c < C; ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores(0, a) > scores(0, b); });
    std::ostringstream side;
    side << "# class score\n";
    for (std::size_t k = 0; k < std::min<std::size_t>(3, C); ++k) {
      side << order[k] << " " << format_double(scores(0, order[k])) << "\n";
    }
    write_text(dir / ("regions_" + std::to_string(id) + ".top3.txt"), side.str());
  }
  out << "wrote " << flags.images.size() << " region maps to " << dir.string() << "\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "flat key=value config file");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--retention", f.retention, "fraction of training labels kept, in (0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--single-positive", f.single_positive, "keep one positive label per image");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--stage1-epochs", f.stage1_epochs, "epochs before pseudo-labeling starts");
  cmd->add_option("--disable", f.disable, "turn off a component: carl, kd, mmcp, mmcl")
      ->delimiter(',');
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"trmml: text-region matching for partially labeled multi-label data"};
  app.require_subcommand(1);
  CommonFlags gen_flags, train_flags, ablate_flags;
  DumpFlags dump_flags;
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(gen, gen_flags);
  auto* train = app.add_subcommand("train", "run both training stages");
  add_common(train, train_flags);
  auto* ablate = app.add_subcommand("ablate", "compare the component grid over seeds");
  add_common(ablate, ablate_flags);
  auto* dump = app.add_subcommand("dump-regions", "export per-class energy maps");
  dump->add_option("--checkpoint", dump_flags.checkpoint, "checkpoint directory")->required();
  dump->add_option("--dataset", dump_flags.dataset, "dataset manifest (defaults to the stored one)");
  dump->add_option("--split", dump_flags.split, "train or test");
  dump->add_option("--images", dump_flags.images, "image ids")->delimiter(',')->required();
  dump->add_option("--out", dump_flags.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_flags, out);
    if (*train) return cmd_train(train_flags, out, err);
    if (*ablate) return cmd_ablate(ablate_flags, out);
    return cmd_dump_regions(dump_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace trmml::cli
