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

#ifndef TRMML_PROTOTYPES_HPP_
#define TRMML_PROTOTYPES_HPP_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "trmml/labels.hpp"
#include "trmml/math.hpp"
#include "trmml/tensor.hpp"

namespace trmml {

using Prototype = std::vector<double>;

// C first-in-first-out queues of at most `capacity` d-dim visual prototypes.
class VisualBank {
 public:
  VisualBank() = default;
  VisualBank(std::size_t num_classes, std::size_t capacity, std::size_t dim);

  std::size_t num_classes() const noexcept { return queues_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size(std::size_t c) const { return queues_.at(c).size(); }
  const std::deque<Prototype>& queue(std::size_t c) const {
    return queues_.at(c);
  }

  // Appends in order, evicting the oldest entries beyond capacity.
  // Throws DimensionMismatch.
  void push(std::size_t c, ConstVec v);
  void push(std::size_t c, const std::vector<Prototype>& vectors);

  // (C, capacity, d) zero-padded, plus per-class lengths (C).
  Tensor entries_tensor() const;
  Tensor lengths_tensor() const;
  static VisualBank from_tensors(const Tensor& entries, const Tensor& lengths);

  friend bool operator==(const VisualBank&, const VisualBank&) = default;

 private:
  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::deque<Prototype>> queues_;
};

VisualBank bank_push(VisualBank bank, std::size_t c,
                     const std::vector<Prototype>& vectors);

/// Top-k energy positions of one class map, each feature scaled by its
/// energy. Ties resolve to the lower row-major index. Throws NoPositiveLabel
/// unless `label` is +1.
std::vector<Prototype> extract_visual_prototypes(ConstVec energies,
                                                 const Tensor& features,
                                                 std::size_t k,
                                                 std::int8_t label);

struct SimilarityStats {
  std::optional<double> positive;              // mean cosine over y = +1
  std::optional<double> negative;              // mean cosine over y = -1
  std::vector<std::optional<double>> unknown;  // per image, only where y = 0
};

// Cosine statistics of the class-c region representations (n, C, d) against
// a prototype set. Throws EmptyQueue when `prototypes` is empty.
SimilarityStats similarity_stats(const Tensor& region_repr,
                                 const LabelMatrix& labels, std::size_t c,
                                 const std::vector<ConstVec>& prototypes);

SimilarityStats class_similarity_stats(const Tensor& region_repr,
                                       const LabelMatrix& labels,
                                       const VisualBank& bank, std::size_t c);

struct ClassThresholds {
  ClassThresholds() = default;
  ClassThresholds(std::size_t num_classes, double eta, double init_positive = 1.0,
                  double init_negative = -1.0);

  std::vector<double> positive;
  std::vector<double> negative;
  double eta = 0.9;
  std::vector<std::size_t> positive_updates;
  std::vector<std::size_t> negative_updates;

  bool warm(std::size_t c, std::size_t warmup) const {
    return positive_updates[c] >= warmup && negative_updates[c] >= warmup;
  }

  friend bool operator==(const ClassThresholds&, const ClassThresholds&) = default;
};

// theta <- eta * theta + (1 - eta) * stat, per side; absent stats are skipped.
void update_thresholds(ClassThresholds& thresholds, std::size_t c,
                       std::optional<double> positive_stat,
                       std::optional<double> negative_stat);

struct EstimateResult {
  std::vector<std::int8_t> labels;
  std::size_t inversions = 0;  // entries where both bands matched
};

// +1 when s >= theta_pos, -1 when s <= theta_neg, 0 otherwise or when both
// hold. Entries without a statistic stay 0. Throws ColdThresholds before
// `warmup` updates on both sides.
EstimateResult estimate_modality_labels(
    std::span<const std::optional<double>> unknown_stats,
    const ClassThresholds& thresholds, std::size_t c, std::size_t warmup);

// +1 iff both +1, -1 iff both -1, otherwise 0.
std::int8_t fuse_pseudo_labels(std::int8_t visual, std::int8_t text);

struct PrototypeConfig {
  std::size_t top_k = 5;
  std::size_t capacity = 64;
  double eta = 0.9;
  std::size_t warmup = 10;
};

struct PseudoLabelMatrix {
  LabelMatrix labels;  // nonzero only where the observed label is 0
  // Per unknown entry: bit 0 set when the visual estimate was decisive,
  // bit 1 when the text estimate was.
  std::vector<std::uint8_t> provenance;
  std::size_t inversions = 0;
};

// Visual bank, frozen text prototypes and one threshold set per modality.
class MultimodalPrototypes {
 public:
  MultimodalPrototypes() = default;
  MultimodalPrototypes(std::size_t num_classes, std::size_t dim,
                       const PrototypeConfig& config);

  const PrototypeConfig& config() const noexcept { return config_; }
  const VisualBank& bank() const noexcept { return bank_; }
  VisualBank& bank() noexcept { return bank_; }

  // One-time snapshot; throws InvalidDimension if already set.
  void set_text_prototypes(const Tensor& text);
  bool has_text_prototypes() const noexcept { return !text_.empty(); }
  const Tensor& text_prototypes() const noexcept { return text_; }

  const ClassThresholds& visual_thresholds() const noexcept { return visual_; }
  const ClassThresholds& text_thresholds() const noexcept { return textual_; }

  // Pushes the top-k prototypes of every class observed positive in this
  // image. `energies` is (C, h, w), `features` (h, w, d).
  void push_image(const Tensor& energies, const Tensor& features,
                  std::span<const std::int8_t> observed_row);

  // Batch statistics followed by the EMA step for both modalities. Classes
  // with an empty queue (or no text prototypes yet) are skipped.
  void update_thresholds(const Tensor& region_repr, const LabelMatrix& observed);

  bool warm(std::size_t c) const;

  // Pseudo-labels for the unknown entries of `observed`. Classes that are not
  // yet warm in both modalities produce none.
  PseudoLabelMatrix estimate(const Tensor& region_repr,
                             const LabelMatrix& observed) const;

  void restore(VisualBank bank, Tensor text, ClassThresholds visual,
               ClassThresholds textual);

 private:
  std::vector<ConstVec> text_set(std::size_t c) const;
  std::vector<ConstVec> bank_set(std::size_t c) const;

  PrototypeConfig config_;
  VisualBank bank_;
  Tensor text_;
  ClassThresholds visual_;
  ClassThresholds textual_;
};

}  // namespace trmml

#endif  // TRMML_PROTOTYPES_HPP_
