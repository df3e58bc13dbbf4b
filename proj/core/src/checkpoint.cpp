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

#include "trmml/checkpoint.hpp"

#include <string>

#include "trmml/tensor_io.hpp"

namespace trmml {
namespace {

namespace fs = std::filesystem;

constexpr const char* kFormat = "trm-checkpoint-1";
constexpr const char* kConfigPrefix = "config.";

Tensor thresholds_tensor(const ClassThresholds& t) {
  const std::size_t C = t.positive.size();
  Tensor out({4, C});
  for (std::size_t c = 0; c < C; ++c) {
    out(0, c) = t.positive[c];
    out(1, c) = t.negative[c];
    out(2, c) = static_cast<double>(t.positive_updates[c]);
    out(3, c) = static_cast<double>(t.negative_updates[c]);
  }
  return out;
}

ClassThresholds thresholds_from(const Tensor& t, double eta, std::size_t C) {
  if (t.rank() != 2 || t.dim(0) != 4 || t.dim(1) != C) {
    throw Error(Errc::kCheckpointCorrupt, "threshold tensor " + shape_string(t.shape()));
  }
  ClassThresholds out(C, eta);
  for (std::size_t c = 0; c < C; ++c) {
    out.positive[c] = t(0, c);
    out.negative[c] = t(1, c);
    out.positive_updates[c] = static_cast<std::size_t>(t(2, c));
    out.negative_updates[c] = static_cast<std::size_t>(t(3, c));
  }
  return out;
}

Tensor read_part(const fs::path& dir, const std::string& name) {
  try {
    return read_tensor(dir / (name + ".trm"));
  } catch (const Error& e) {
    throw Error(Errc::kCheckpointCorrupt, name + ": " + e.what());
  }
}

void assign_checked(Tensor& dst, Tensor src, const std::string& name) {
  if (src.shape() != dst.shape()) {
    throw Error(Errc::kCheckpointCorrupt, name + " has shape " + shape_string(src.shape()) +
                                              ", expected " + shape_string(dst.shape()));
  }
  dst = std::move(src);
}

KeyValueConfig read_manifest(const fs::path& dir) {
  KeyValueConfig manifest;
  try {
    manifest = KeyValueConfig::load(dir / "manifest.txt");
  } catch (const Error& e) {
    throw Error(Errc::kCheckpointCorrupt, e.what());
  }
  if (manifest.get_string("format", "") != kFormat) {
    throw Error(Errc::kCheckpointCorrupt, (dir / "manifest.txt").string() + ": bad format tag");
  }
  return manifest;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainState& state,
                     const KeyValueConfig& resolved_config) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoError, dir.string() + ": " + ec.message());

  state.model.params.visit([&](std::string_view name, const Tensor& t) {
    write_tensor(dir / ("param_" + std::string(name) + ".trm"), t);
  });
  state.optimizer.first_moment().visit([&](std::string_view name, const Tensor& t) {
    write_tensor(dir / ("adam_m_" + std::string(name) + ".trm"), t);
  });
  state.optimizer.second_moment().visit([&](std::string_view name, const Tensor& t) {
    write_tensor(dir / ("adam_v_" + std::string(name) + ".trm"), t);
  });
  const auto& protos = state.prototypes;
  write_tensor(dir / "bank_entries.trm", protos.bank().entries_tensor());
  write_tensor(dir / "bank_lengths.trm", protos.bank().lengths_tensor());
  write_tensor(dir / "thresholds_visual.trm", thresholds_tensor(protos.visual_thresholds()));
  write_tensor(dir / "thresholds_text.trm", thresholds_tensor(protos.text_thresholds()));
  if (protos.has_text_prototypes()) {
    write_tensor(dir / "text_prototypes.trm", protos.text_prototypes());
  }

  KeyValueConfig manifest;
  manifest.set("format", std::string(kFormat));
  manifest.set("step", static_cast<std::uint64_t>(state.step));
  manifest.set("epoch", static_cast<std::uint64_t>(state.epoch));
  manifest.set("optimizer_steps", static_cast<std::uint64_t>(state.optimizer.steps()));
  manifest.set("text_encoder_checksum", hex64(state.text_encoder_checksum));
  manifest.set("has_text_prototypes", protos.has_text_prototypes());
  for (const auto& [k, v] : resolved_config.entries()) {
    manifest.set(kConfigPrefix + k, v);
  }
  manifest.save(dir / "manifest.txt");
}

KeyValueConfig checkpoint_config(const fs::path& dir) {
  const KeyValueConfig manifest = read_manifest(dir);
  KeyValueConfig out;
  const std::string prefix = kConfigPrefix;
  for (const auto& [k, v] : manifest.entries()) {
    if (k.rfind(prefix, 0) == 0) out.set(k.substr(prefix.size()), v);
  }
  return out;
}

void load_checkpoint(const fs::path& dir, TrainState& state) {
  const KeyValueConfig manifest = read_manifest(dir);
  if (manifest.get_string("text_encoder_checksum", "") != hex64(state.text_encoder_checksum)) {
    throw Error(Errc::kCheckpointCorrupt, "frozen text encoder does not match the checkpoint");
  }
  state.model.params.visit([&](std::string_view name, Tensor& t) {
    const std::string key = "param_" + std::string(name);
    assign_checked(t, read_part(dir, key), key);
  });
  state.optimizer.first_moment().visit([&](std::string_view name, Tensor& t) {
    const std::string key = "adam_m_" + std::string(name);
    assign_checked(t, read_part(dir, key), key);
  });
  state.optimizer.second_moment().visit([&](std::string_view name, Tensor& t) {
    const std::string key = "adam_v_" + std::string(name);
    assign_checked(t, read_part(dir, key), key);
  });

  const std::size_t C = state.model.config().num_classes;
  const auto& cfg = state.prototypes.config();
  VisualBank bank;
  try {
    bank = VisualBank::from_tensors(read_part(dir, "bank_entries"),
                                    read_part(dir, "bank_lengths"));
  } catch (const Error& e) {
    if (e.code() == Errc::kCheckpointCorrupt) throw;
    throw Error(Errc::kCheckpointCorrupt, std::string("bank: ") + e.what());
  }
  if (bank.num_classes() != C || bank.capacity() != cfg.capacity ||
      bank.dim() != state.model.config().dim) {
    throw Error(Errc::kCheckpointCorrupt, "bank layout does not match the configuration");
  }
  Tensor text;
  if (manifest.get_bool("has_text_prototypes", false)) {
    text = read_part(dir, "text_prototypes");
  }
  state.prototypes.restore(std::move(bank), std::move(text),
                           thresholds_from(read_part(dir, "thresholds_visual"), cfg.eta, C),
                           thresholds_from(read_part(dir, "thresholds_text"), cfg.eta, C));
  state.step = manifest.get_size("step", 0);
  state.epoch = manifest.get_size("epoch", 0);
  state.optimizer.set_steps(manifest.get_size("optimizer_steps", 0));
}

}  // namespace trmml
