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

#ifndef TRMML_LOSSES_HPP_
#define TRMML_LOSSES_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "trmml/labels.hpp"
#include "trmml/math.hpp"
#include "trmml/tensor.hpp"

namespace trmml {

struct AslParams {
  double gamma_pos = 1.0;
  double gamma_neg = 2.0;
  double shift = 0.05;
};

struct LossWeights {
  double alpha = 1.0;   // region-score classification weight
  double beta = 0.05;   // distillation weight
  double gamma = 0.01;  // contrastive weight
  AslParams asl;
};

/// cosine(f, g) / tau.
double matching_score(ConstVec f, ConstVec g, double tau);

struct PredictionScores {
  Tensor query;   // p^q, (n, C)
  Tensor region;  // p^r, (n, C)
  double tau = 1.0;
};

// Diagonal matching: row i, column c compares representation (i, c) with g_c.
// Representations are (n, C, d); G is (C, d).
PredictionScores predict_scores(const Tensor& query_repr,
                                const Tensor& region_repr, const Tensor& text,
                                double tau);
Tensor match_scores(const Tensor& repr, const Tensor& text, double tau);

// Adjoint of match_scores. Accumulates into grad_repr (n, C, d),
// grad_text (C, d) and returns dL/dtau.
double match_scores_backward(const Tensor& repr, const Tensor& text,
                             double tau, const Tensor& scores,
                             const Tensor& grad_scores, Tensor* grad_repr,
                             Tensor& grad_text);

// Asymmetric loss over probabilities p in (0,1), averaged over the nonzero
// entries of `labels` (0 when there are none). Positive terms are
// (1-p)^g+ * -log p; negative terms are p_m^g- * -log(1 - p_m) with
// p_m = max(p - shift, 0). Throws ProbabilityOutOfRange.
double asl_loss(const Tensor& probs, const LabelMatrix& labels,
                const AslParams& params);

// The same loss evaluated on logits (p = sigmoid(logit)) with stable
// log-sigmoid forms. Writes dL/dlogits when `grad` is non-null.
double asl_loss_logits(const Tensor& logits, const LabelMatrix& labels,
                       const AslParams& params, Tensor* grad = nullptr);

// Mean over rows of KL(teacher || student) for row-stochastic inputs.
// Throws DegenerateDistribution if any entry is <= 0. `grad_student` gets
// dL/dstudent.
double kd_loss(const Tensor& teacher, const Tensor& student,
               Tensor* grad_student = nullptr);

// Softmax both score matrices over classes, then kd_loss. The teacher is
// treated as a constant; `grad_student_scores` gets dL/dstudent_scores.
double kd_loss_from_scores(const Tensor& teacher_scores,
                           const Tensor& student_scores,
                           Tensor* grad_student_scores = nullptr);

Tensor row_softmax(const Tensor& scores);

struct InfoNceGrads {
  std::vector<double> anchor;
  std::vector<std::vector<double>> positives;
  std::vector<std::vector<double>> negatives;
};

/// InfoNCE over L2-normalized copies of the inputs:
///   (1/|P|) sum_{q+} -log exp(a.q+/tau) / (exp(a.q+/tau) + sum_{q-} exp(a.q-/tau)).
/// Throws EmptyPositiveSet, NonPositiveTemperature, ZeroVector.
double infonce_loss(ConstVec anchor, const std::vector<ConstVec>& positives,
                    const std::vector<ConstVec>& negatives, double tau,
                    InfoNceGrads* grads = nullptr);

// Core of infonce_loss on rows that are already unit vectors. `rows` holds
// candidates; `positive` and `negative` index into it. Gradients are with
// respect to the unit vectors and are accumulated when the outputs are
// non-null.
double infonce_unit(ConstVec anchor, const Tensor& rows,
                    std::span<const std::size_t> positive,
                    std::span<const std::size_t> negative, double tau,
                    MutVec grad_anchor, Tensor* grad_rows);

struct LossComponents {
  double cls_q = 0.0;
  double cls_r = 0.0;
  double kd = 0.0;
  double nce = 0.0;
};

/// (cls_q + alpha * cls_r) + beta * kd + gamma * nce. Throws NonFiniteComponent.
double total_loss(const LossComponents& parts, const LossWeights& weights);

}  // namespace trmml

#endif  // TRMML_LOSSES_HPP_
