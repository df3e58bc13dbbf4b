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

#include "trmml/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trmml {
namespace {

void require_tau(double tau) {
  if (!(tau > 0.0)) {
    throw Error(Errc::kNonPositiveTemperature, "tau " + std::to_string(tau));
  }
}

void require_label_shape(const Tensor& scores, const LabelMatrix& labels) {
  if (scores.rank() != 2 || scores.dim(0) != labels.rows() ||
      scores.dim(1) != labels.cols()) {
    throw Error(Errc::kShapeMismatch,
                "scores " + shape_string(scores.shape()) + " vs labels (" +
                    std::to_string(labels.rows()) + ", " +
                    std::to_string(labels.cols()) + ")");
  }
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Negative-label ASL term and its derivative with respect to p.
void negative_term(double p, const AslParams& params, double& value,
                   double& d_p) {
  const double pm = p - params.shift;
  if (pm <= 0.0) {
    value = 0.0;
    d_p = 0.0;
    return;
  }
  const double nl = -std::log1p(-pm);
  const double pg = std::pow(pm, params.gamma_neg);
  value = pg * nl;
  const double pg1 =
      params.gamma_neg == 0.0 ? 0.0 : params.gamma_neg * std::pow(pm, params.gamma_neg - 1.0);
  d_p = pg1 * nl + pg / (1.0 - pm);
}

}  // namespace

double matching_score(ConstVec f, ConstVec g, double tau) {
  require_tau(tau);
  return cosine(f, g) / tau;
}

Tensor match_scores(const Tensor& repr, const Tensor& text, double tau) {
  require_tau(tau);
  if (repr.rank() != 3 || text.rank() != 2 || repr.dim(1) != text.dim(0) ||
      repr.dim(2) != text.dim(1)) {
    throw Error(Errc::kShapeMismatch,
                "representations " + shape_string(repr.shape()) +
                    " vs text " + shape_string(text.shape()));
  }
  const std::size_t n = repr.dim(0), C = repr.dim(1), d = repr.dim(2);
  Tensor scores({n, C});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      scores(i, c) =
          cosine(repr.data().subspan((i * C + c) * d, d), text.row(c)) / tau;
    }
  }
  return scores;
}

PredictionScores predict_scores(const Tensor& query_repr,
                                const Tensor& region_repr, const Tensor& text,
                                double tau) {
  return {match_scores(query_repr, text, tau),
          match_scores(region_repr, text, tau), tau};
}

double match_scores_backward(const Tensor& repr, const Tensor& text,
                             double tau, const Tensor& scores,
                             const Tensor& grad_scores, Tensor* grad_repr,
                             Tensor& grad_text) {
  const std::size_t n = repr.dim(0), C = repr.dim(1), d = repr.dim(2);
  std::vector<double> scratch(d);
  double grad_tau = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const double ds = grad_scores(i, c);
      if (ds == 0.0) continue;
      // s = cos / tau
      grad_tau += -ds * scores(i, c) / tau;
      auto u = repr.data().subspan((i * C + c) * d, d);
      MutVec du = grad_repr ? grad_repr->data().subspan((i * C + c) * d, d)
                            : MutVec(scratch);
      cosine_backward(u, text.row(c), ds / tau, du, grad_text.row(c));
    }
  }
  return grad_tau;
}

double asl_loss(const Tensor& probs, const LabelMatrix& labels,
                const AslParams& params) {
  require_label_shape(probs, labels);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto y = labels.values()[i];
    if (y == 0) continue;
    const double p = probs[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw Error(Errc::kProbabilityOutOfRange,
                  "p = " + std::to_string(p) + " at entry " + std::to_string(i));
    }
    ++count;
    if (y > 0) {
      total += std::pow(1.0 - p, params.gamma_pos) * -std::log(p);
    } else {
      double v, dp;
      negative_term(p, params, v, dp);
      total += v;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double asl_loss_logits(const Tensor& logits, const LabelMatrix& labels,
                       const AslParams& params, Tensor* grad) {
  require_label_shape(logits, labels);
  if (grad) *grad = Tensor(logits.shape());
  const std::size_t count = labels.count_nonzero();
  if (count == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto y = labels.values()[i];
    if (y == 0) continue;
    const double x = logits[i];
    const double p = sigmoid(x);
    if (y > 0) {
      const double q = sigmoid(-x);
      const double s = -log_sigmoid(x);
      const double qg = std::pow(q, params.gamma_pos);
      total += qg * s;
      if (grad) (*grad)[i] = -qg * (params.gamma_pos * p * s + q) * inv;
    } else {
      double v, dp;
      negative_term(p, params, v, dp);
      total += v;
      if (grad) (*grad)[i] = dp * p * (1.0 - p) * inv;
    }
  }
  return total * inv;
}

Tensor row_softmax(const Tensor& scores) {
  Tensor out(scores.shape());
  for (std::size_t i = 0; i < scores.dim(0); ++i) {
    auto p = softmax(scores.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

double kd_loss(const Tensor& teacher, const Tensor& student,
               Tensor* grad_student) {
  if (teacher.shape() != student.shape() || teacher.rank() != 2) {
    throw Error(Errc::kShapeMismatch,
                "teacher " + shape_string(teacher.shape()) + " vs student " +
                    shape_string(student.shape()));
  }
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    if (!(teacher[i] > 0.0) || !(student[i] > 0.0)) {
      throw Error(Errc::kDegenerateDistribution,
                  "non-positive probability at entry " + std::to_string(i));
    }
  }
  const std::size_t n = teacher.dim(0);
  if (grad_student) *grad_student = Tensor(student.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    total += teacher[i] * (std::log(teacher[i]) - std::log(student[i]));
    if (grad_student) {
      (*grad_student)[i] = -teacher[i] / student[i] / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

double kd_loss_from_scores(const Tensor& teacher_scores,
                           const Tensor& student_scores,
                           Tensor* grad_student_scores) {
  if (teacher_scores.shape() != student_scores.shape() ||
      teacher_scores.rank() != 2) {
    throw Error(Errc::kShapeMismatch, "teacher/student score shapes differ");
  }
  const std::size_t n = teacher_scores.dim(0);
  // KL via log-softmax so saturated rows stay finite.
  double total = 0.0;
  if (grad_student_scores) *grad_student_scores = Tensor(student_scores.shape());
  for (std::size_t i = 0; i < n; ++i) {
    auto t = teacher_scores.row(i);
    auto s = student_scores.row(i);
    const double lt = log_sum_exp(t), ls = log_sum_exp(s);
    for (std::size_t c = 0; c < t.size(); ++c) {
      const double log_p = t[c] - lt;
      const double log_q = s[c] - ls;
      const double p = std::exp(log_p);
      total += p * (log_p - log_q);
      if (grad_student_scores) {
        (*grad_student_scores)(i, c) =
            (std::exp(log_q) - p) / static_cast<double>(n);
      }
    }
  }
  return total / static_cast<double>(n);
}

double infonce_unit(ConstVec anchor, const Tensor& rows,
                    std::span<const std::size_t> positive,
                    std::span<const std::size_t> negative, double tau,
                    MutVec grad_anchor, Tensor* grad_rows) {
  require_tau(tau);
  if (positive.empty()) {
    throw Error(Errc::kEmptyPositiveSet, "InfoNCE needs at least one positive");
  }
  std::vector<double> zn(negative.size());
  for (std::size_t k = 0; k < negative.size(); ++k) {
    zn[k] = dot(anchor, rows.row(negative[k])) / tau;
  }
  const double lse_neg = log_sum_exp(zn);
  const double inv_p = 1.0 / static_cast<double>(positive.size());
  double loss = 0.0;
  // sum_j exp(-D_j) / |P|, the shared factor in each negative's gradient
  double neg_factor = 0.0;
  for (std::size_t idx : positive) {
    auto r = rows.row(idx);
    const double zp = dot(anchor, r) / tau;
    const double denom = log_add_exp(zp, lse_neg);
    loss += denom - zp;
    const double dz = (std::exp(zp - denom) - 1.0) * inv_p;
    if (!grad_anchor.empty()) axpy(dz / tau, r, grad_anchor);
    if (grad_rows) axpy(dz / tau, anchor, grad_rows->row(idx));
    neg_factor += std::exp(-denom) * inv_p;
  }
  if (!negative.empty() && (!grad_anchor.empty() || grad_rows)) {
    for (std::size_t k = 0; k < negative.size(); ++k) {
      const double dz = std::exp(zn[k]) * neg_factor;
      auto r = rows.row(negative[k]);
      if (!grad_anchor.empty()) axpy(dz / tau, r, grad_anchor);
      if (grad_rows) axpy(dz / tau, anchor, grad_rows->row(negative[k]));
    }
  }
  return loss * inv_p;
}

double infonce_loss(ConstVec anchor, const std::vector<ConstVec>& positives,
                    const std::vector<ConstVec>& negatives, double tau,
                    InfoNceGrads* grads) {
  require_tau(tau);
  if (positives.empty()) {
    throw Error(Errc::kEmptyPositiveSet, "InfoNCE needs at least one positive");
  }
  const std::size_t d = anchor.size();
  const std::size_t np = positives.size(), nn = negatives.size();
  Tensor rows({np + nn, d});
  auto put = [&](std::size_t r, ConstVec v) {
    if (v.size() != d) {
      throw Error(Errc::kShapeMismatch, "InfoNCE vector length mismatch");
    }
    auto u = l2_normalize(v);
    std::copy(u.begin(), u.end(), rows.row(r).begin());
  };
  for (std::size_t j = 0; j < np; ++j) put(j, positives[j]);
  for (std::size_t k = 0; k < nn; ++k) put(np + k, negatives[k]);
  const auto a = l2_normalize(anchor);
  std::vector<std::size_t> pos(np), neg(nn);
  for (std::size_t j = 0; j < np; ++j) pos[j] = j;
  for (std::size_t k = 0; k < nn; ++k) neg[k] = np + k;

  if (!grads) return infonce_unit(a, rows, pos, neg, tau, {}, nullptr);

  std::vector<double> ga(d, 0.0);
  Tensor gr(rows.shape());
  const double loss = infonce_unit(a, rows, pos, neg, tau, ga, &gr);
  grads->anchor.assign(d, 0.0);
  l2_normalize_backward(anchor, ga, grads->anchor);
  grads->positives.assign(np, std::vector<double>(d, 0.0));
  grads->negatives.assign(nn, std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < np; ++j) {
    l2_normalize_backward(positives[j], gr.row(j), grads->positives[j]);
  }
  for (std::size_t k = 0; k < nn; ++k) {
    l2_normalize_backward(negatives[k], gr.row(np + k), grads->negatives[k]);
  }
  return loss;
}

double total_loss(const LossComponents& parts, const LossWeights& weights) {
  for (double v : {parts.cls_q, parts.cls_r, parts.kd, parts.nce}) {
    if (!std::isfinite(v)) {
      throw Error(Errc::kNonFiniteComponent, "loss component " + std::to_string(v));
    }
  }
  return (parts.cls_q + weights.alpha * parts.cls_r) + weights.beta * parts.kd +
         weights.gamma * parts.nce;
}

}  // namespace trmml
