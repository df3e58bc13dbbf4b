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

#ifndef TRMML_DATA_HPP_
#define TRMML_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>

#include "trmml/config.hpp"
#include "trmml/labels.hpp"
#include "trmml/tensor.hpp"

namespace trmml {

// Synthetic multi-label images: a grid of cells, each cell `patch` x `patch`
// pixels. Each image places 1..k class patterns (one fixed pattern per class)
// in distinct random cells, optionally some unlabeled clutter patches, and
// adds Gaussian pixel noise.
struct SyntheticSpec {
  std::size_t n_images = 2000;
  std::size_t num_classes = 10;
  std::size_t grid_h = 4;
  std::size_t grid_w = 4;
  std::size_t patch = 2;
  std::size_t channels = 3;
  std::size_t objects_min = 1;
  std::size_t objects_max = 3;
  double noise_std = 0.0;
  std::size_t clutter = 0;      // distractor cells per image
  double clutter_scale = 1.0;   // norm multiplier for distractors
  std::uint64_t seed = 0;

  std::size_t image_height() const { return grid_h * patch; }
  std::size_t image_width() const { return grid_w * patch; }
  std::size_t pattern_dim() const { return patch * patch * channels; }

  static SyntheticSpec from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

struct Dataset {
  Tensor images;    // (n, H_in, W_in, ch); empty when features are given
  Tensor features;  // optional precomputed (n, h, w, d)
  LabelMatrix y_full;
  LabelMatrix y_obs;

  std::size_t size() const { return y_full.rows(); }
  std::size_t num_classes() const { return y_full.cols(); }
  bool has_features() const { return !features.empty(); }
};

// (C, patch * patch * ch). Orthogonal rows (Gram-Schmidt) for the first
// min(C, pattern_dim) classes, each scaled to norm sqrt(pattern_dim).
Tensor class_patterns(const SyntheticSpec& spec);

// Throws SpecInfeasible. y_obs is a copy of y_full.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Keeps exactly round(ratio * n * C) entries uniformly at random; the rest
// become 0. With `stratified`, round(ratio * n) entries per class instead.
// Throws InvalidRatio for ratio outside (0, 1].
LabelMatrix mask_partial(const LabelMatrix& full, double ratio,
                         std::uint64_t seed, bool stratified = false);

// One uniformly chosen positive per row, everything else unknown.
// Throws NoPositiveAvailable.
LabelMatrix mask_single_positive(const LabelMatrix& full, std::uint64_t seed);

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);
// First size()-n_test rows train, the rest test.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_test);

struct DatasetBundle {
  Dataset train;
  Dataset test;
  KeyValueConfig manifest;
};

// Writes tensor files plus `manifest.txt` into `dir`; returns the manifest
// path. Throws IoError naming the path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const Dataset& train, const Dataset& test,
                                    const KeyValueConfig& extra);

// Reads a manifest written by write_dataset. Entries may name either
// images (`*_images`) or precomputed feature maps (`*_features`).
DatasetBundle load_dataset(const std::filesystem::path& manifest);

}  // namespace trmml

#endif  // TRMML_DATA_HPP_
