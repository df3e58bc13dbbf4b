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

#ifndef TRMML_CHECKPOINT_HPP_
#define TRMML_CHECKPOINT_HPP_

#include <filesystem>

#include "trmml/config.hpp"
#include "trmml/trainer.hpp"

namespace trmml {

// A checkpoint is a directory of tensor files plus `manifest.txt`. The
// manifest carries the resolved run configuration under the `config.` key
// prefix so a run can be rebuilt from the checkpoint alone.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state,
                     const KeyValueConfig& resolved_config);

// Throws CheckpointCorrupt when the manifest is missing or malformed.
KeyValueConfig checkpoint_config(const std::filesystem::path& dir);

// Overwrites `state` (constructed from checkpoint_config) with the stored
// tensors. Throws CheckpointCorrupt on missing files or shape mismatches.
void load_checkpoint(const std::filesystem::path& dir, TrainState& state);

}  // namespace trmml

#endif  // TRMML_CHECKPOINT_HPP_
