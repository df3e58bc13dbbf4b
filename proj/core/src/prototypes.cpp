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

#include "trmml/prototypes.hpp"

#include <algorithm>
#include <numeric>

namespace trmml {

VisualBank::VisualBank(std::size_t num_classes, std::size_t capacity,
                       std::size_t dim)
    : capacity_(capacity), dim_(dim), queues_(num_classes) {
  if (num_classes == 0 || capacity == 0 || dim == 0) {
    throw Error(Errc::kInvalidDimension, "visual bank needs C, l, d >= 1");
  }
}

void VisualBank::push(std::size_t c, ConstVec v) {
  if (v.size() != dim_) {
    throw Error(Errc::kDimensionMismatch,
                "prototype dim " + std::to_string(v.size()) + " != " +
                    std::to_string(dim_));
  }
  auto& q = queues_.at(c);
  q.emplace_back(v.begin(), v.end());
  while (q.size() > capacity_) q.pop_front();
}

void VisualBank::push(std::size_t c, const std::vector<Prototype>& vectors) {
  for (const auto& v : vectors) push(c, v);
}

Tensor VisualBank::entries_tensor() const {
  Tensor t({queues_.size(), capacity_, dim_});
  for (std::size_t c = 0; c < queues_.size(); ++c) {
    for (std::size_t j = 0; j < queues_[c].size(); ++j) {
      std::copy(queues_[c][j].begin(), queues_[c][j].end(),
                t.data().begin() + (c * capacity_ + j) * dim_);
    }
  }
  return t;
}

Tensor VisualBank::lengths_tensor() const {
  Tensor t({queues_.size()});
  for (std::size_t c = 0; c < queues_.size(); ++c) {
    t[c] = static_cast<double>(queues_[c].size());
  }
  return t;
}

VisualBank VisualBank::from_tensors(const Tensor& entries,
                                    const Tensor& lengths) {
  if (entries.rank() != 3 || lengths.rank() != 1 ||
      lengths.dim(0) != entries.dim(0)) {
    throw Error(Errc::kShapeMismatch, "bank tensors " +
                                          shape_string(entries.shape()) + ", " +
                                          shape_string(lengths.shape()));
  }
  VisualBank bank(entries.dim(0), entries.dim(1), entries.dim(2));
  for (std::size_t c = 0; c < entries.dim(0); ++c) {
    const double len = lengths[c];
    if (len < 0 || len > static_cast<double>(bank.capacity_) ||
        len != static_cast<double>(static_cast<std::size_t>(len))) {
      throw Error(Errc::kShapeMismatch, "bad queue length for class " +
                                            std::to_string(c));
    }
    for (std::size_t j = 0; j < static_cast<std::size_t>(len); ++j) {
      bank.push(c, entries.data().subspan((c * bank.capacity_ + j) * bank.dim_,
                                          bank.dim_));
    }
  }
  return bank;
}

VisualBank bank_push(VisualBank bank, std::size_t c,
                     const std::vector<Prototype>& vectors) {
  bank.push(c, vectors);
  return bank;
}

std::vector<Prototype> extract_visual_prototypes(ConstVec energies,
                                                 const Tensor& features,
                                                 std::size_t k,
                                                 std::int8_t label) {
  if (label != 1) {
    throw Error(Errc::kNoPositiveLabel,
                "visual prototypes are taken from positive labels only");
  }
  if (k == 0) throw Error(Errc::kInvalidDimension, "k must be >= 1");
  if (features.rank() != 3 ||
      features.dim(0) * features.dim(1) != energies.size()) {
    throw Error(Errc::kShapeMismatch,
                "energy map of " + std::to_string(energies.size()) +
                    " positions vs features " + shape_string(features.shape()));
  }
  const std::size_t P = energies.size(), d = features.dim(2);
  std::vector<std::size_t> order(P);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, P);
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (energies[a] != energies[b]) return energies[a] > energies[b];
                      return a < b;
                    });
  std::vector<Prototype> out;
  out.reserve(take);
  for (std::size_t j = 0; j < take; ++j) {
    const std::size_t p = order[j];
    auto f = features.data().subspan(p * d, d);
    Prototype v(d);
    for (std::size_t t = 0; t < d; ++t) v[t] = energies[p] * f[t];
    out.push_back(std::move(v));
  }
  return out;
}

SimilarityStats similarity_stats(const Tensor& region_repr,
                                 const LabelMatrix& labels, std::size_t c,
                                 const std::vector<ConstVec>& prototypes) {
  if (prototypes.empty()) {
    throw Error(Errc::kEmptyQueue, "no prototypes for class " + std::to_string(c));
  }
  if (region_repr.rank() != 3 || region_repr.dim(0) != labels.rows() ||
      region_repr.dim(1) != labels.cols()) {
    throw Error(Errc::kShapeMismatch, "region representations " +
                                          shape_string(region_repr.shape()) +
                                          " vs labels");
  }
  const std::size_t n = region_repr.dim(0), C = region_repr.dim(1);
  const std::size_t d = region_repr.dim(2);
  SimilarityStats stats;
  stats.unknown.resize(n);
  double sum_pos = 0.0, sum_neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto f = region_repr.data().subspan((i * C + c) * d, d);
    double s = 0.0;
    for (auto v : prototypes) s += cosine(f, v);
    const auto y = labels(i, c);
    if (y > 0) {
      sum_pos += s;
      n_pos += prototypes.size();
    } else if (y < 0) {
      sum_neg += s;
      n_neg += prototypes.size();
    } else {
      stats.unknown[i] = s / static_cast<double>(prototypes.size());
    }
  }
  if (n_pos) stats.positive = sum_pos / static_cast<double>(n_pos);
  if (n_neg) stats.negative = sum_neg / static_cast<double>(n_neg);
  return stats;
}

SimilarityStats class_similarity_stats(const Tensor& region_repr,
                                       const LabelMatrix& labels,
                                       const VisualBank& bank, std::size_t c) {
  std::vector<ConstVec> set;
  for (const auto& v : bank.queue(c)) set.emplace_back(v);
  return similarity_stats(region_repr, labels, c, set);
}

ClassThresholds::ClassThresholds(std::size_t num_classes, double eta_,
                                 double init_positive, double init_negative)
    : positive(num_classes, init_positive),
      negative(num_classes, init_negative),
      eta(eta_),
      positive_updates(num_classes, 0),
      negative_updates(num_classes, 0) {
  if (!(eta_ > 0.0 && eta_ < 1.0)) {
    throw Error(Errc::kInvalidDimension, "EMA coefficient must lie in (0,1)");
  }
}

void update_thresholds(ClassThresholds& t, std::size_t c,
                       std::optional<double> positive_stat,
                       std::optional<double> negative_stat) {
  if (positive_stat) {
    t.positive[c] = t.eta * t.positive[c] + (1.0 - t.eta) * *positive_stat;
    ++t.positive_updates[c];
  }
  if (negative_stat) {
    t.negative[c] = t.eta * t.negative[c] + (1.0 - t.eta) * *negative_stat;
    ++t.negative_updates[c];
  }
}

EstimateResult estimate_modality_labels(
    std::span<const std::optional<double>> unknown_stats,
    const ClassThresholds& thresholds, std::size_t c, std::size_t warmup) {
  if (!thresholds.warm(c, warmup)) {
    throw Error(Errc::kColdThresholds,
                "class " + std::to_string(c) + " has " +
                    std::to_string(thresholds.positive_updates[c]) + "/" +
                    std::to_string(thresholds.negative_updates[c]) +
                    " threshold updates, needs " + std::to_string(warmup));
  }
  EstimateResult result;
  result.labels.assign(unknown_stats.size(), 0);
  const double hi = thresholds.positive[c], lo = thresholds.negative[c];
  for (std::size_t i = 0; i < unknown_stats.size(); ++i) {
    if (!unknown_stats[i]) continue;
    const double s = *unknown_stats[i];
    const bool pos = s >= hi, neg = s <= lo;
    if (pos && neg) {
      ++result.inversions;
    } else if (pos) {
      result.labels[i] = 1;
    } else if (neg) {
      result.labels[i] = -1;
    }
  }
  return result;
}

std::int8_t fuse_pseudo_labels(std::int8_t visual, std::int8_t text) {
  if (visual == 1 && text == 1) return 1;
  if (visual == -1 && text == -1) return -1;
  return 0;
}

MultimodalPrototypes::MultimodalPrototypes(std::size_t num_classes,
                                           std::size_t dim,
                                           const PrototypeConfig& config)
    : config_(config),
      bank_(num_classes, config.capacity, dim),
      visual_(num_classes, config.eta),
      textual_(num_classes, config.eta) {}

void MultimodalPrototypes::set_text_prototypes(const Tensor& text) {
  if (has_text_prototypes()) {
    throw Error(Errc::kInvalidDimension, "text prototypes already frozen");
  }
  require_shape(text, {bank_.num_classes(), bank_.dim()}, "text prototypes");
  text_ = text;
}

std::vector<ConstVec> MultimodalPrototypes::text_set(std::size_t c) const {
  return {text_.row(c)};
}

std::vector<ConstVec> MultimodalPrototypes::bank_set(std::size_t c) const {
  std::vector<ConstVec> set;
  for (const auto& v : bank_.queue(c)) set.emplace_back(v);
  return set;
}

void MultimodalPrototypes::push_image(const Tensor& energies,
                                      const Tensor& features,
                                      std::span<const std::int8_t> observed_row) {
  const std::size_t C = bank_.num_classes();
  const std::size_t P = energies.size() / C;
  for (std::size_t c = 0; c < C; ++c) {
    if (observed_row[c] != 1) continue;
    bank_.push(c, extract_visual_prototypes(energies.data().subspan(c * P, P),
                                            features, config_.top_k, 1));
  }
}

void MultimodalPrototypes::update_thresholds(const Tensor& region_repr,
                                             const LabelMatrix& observed) {
  for (std::size_t c = 0; c < bank_.num_classes(); ++c) {
    if (bank_.size(c) > 0) {
      auto s = similarity_stats(region_repr, observed, c, bank_set(c));
      trmml::update_thresholds(visual_, c, s.positive, s.negative);
    }
    if (has_text_prototypes()) {
      auto s = similarity_stats(region_repr, observed, c, text_set(c));
      trmml::update_thresholds(textual_, c, s.positive, s.negative);
    }
  }
}

bool MultimodalPrototypes::warm(std::size_t c) const {
  return has_text_prototypes() && bank_.size(c) > 0 &&
         visual_.warm(c, config_.warmup) && textual_.warm(c, config_.warmup);
}

PseudoLabelMatrix MultimodalPrototypes::estimate(
    const Tensor& region_repr, const LabelMatrix& observed) const {
  const std::size_t n = observed.rows(), C = observed.cols();
  PseudoLabelMatrix out;
  out.labels = LabelMatrix(n, C);
  out.provenance.assign(n * C, 0);
  for (std::size_t c = 0; c < C; ++c) {
    if (!warm(c)) continue;
    const auto sv = similarity_stats(region_repr, observed, c, bank_set(c));
    const auto st = similarity_stats(region_repr, observed, c, text_set(c));
    const auto ev = estimate_modality_labels(sv.unknown, visual_, c, config_.warmup);
    const auto et = estimate_modality_labels(st.unknown, textual_, c, config_.warmup);
    out.inversions += ev.inversions + et.inversions;
    for (std::size_t i = 0; i < n; ++i) {
      if (observed(i, c) != 0) continue;
      const auto fused = fuse_pseudo_labels(ev.labels[i], et.labels[i]);
      out.labels(i, c) = fused;
      out.provenance[i * C + c] =
          static_cast<std::uint8_t>((ev.labels[i] != 0 ? 1 : 0) |
                                    (et.labels[i] != 0 ? 2 : 0));
    }
  }
  return out;
}

void MultimodalPrototypes::restore(VisualBank bank, Tensor text,
                                   ClassThresholds visual,
                                   ClassThresholds textual) {
  bank_ = std::move(bank);
  text_ = std::move(text);
  visual_ = std::move(visual);
  textual_ = std::move(textual);
}

}  // namespace trmml
