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

#include "trmml/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trmml {
namespace {

void require_same_length(ConstVec a, ConstVec b) {
  if (a.size() != b.size()) {
    throw Error(Errc::kShapeMismatch,
                "vector lengths " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()) + " differ");
  }
}

double checked_norm(ConstVec v) {
  const double n = l2_norm(v);
  if (!(n > kNormEpsilon)) {
    throw Error(Errc::kZeroVector, "norm " + std::to_string(n) + " <= 1e-12");
  }
  return n;
}

}  // namespace

double dot(ConstVec a, ConstVec b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(ConstVec v) { return std::sqrt(dot(v, v)); }

std::vector<double> l2_normalize(ConstVec v) {
  const double n = checked_norm(v);
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) x /= n;
  return out;
}

double cosine(ConstVec u, ConstVec v) {
  require_same_length(u, v);
  const double nu = checked_norm(u);
  const double nv = checked_norm(v);
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double log_sum_exp(ConstVec x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(ConstVec x, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(Errc::kNonPositiveTemperature,
                "temperature " + std::to_string(temperature));
  }
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  double m = x[0] / temperature;
  for (double v : x) m = std::max(m, v / temperature);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] / temperature - m);
    s += out[i];
  }
  for (auto& v : out) v /= s;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  // -softplus(-x)
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) v = sigmoid(v);
  return out;
}

void l2_normalize_backward(ConstVec x, ConstVec dy, MutVec dx) {
  const double n = checked_norm(x);
  double ydy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ydy += x[i] / n * dy[i];
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx[i] += (dy[i] - x[i] / n * ydy) / n;
  }
}

void cosine_backward(ConstVec u, ConstVec v, double dc, MutVec du, MutVec dv) {
  require_same_length(u, v);
  const double nu = checked_norm(u);
  const double nv = checked_norm(v);
  const double c = dot(u, v) / (nu * nv);
  for (std::size_t i = 0; i < u.size(); ++i) {
    du[i] += dc * (v[i] / nv - c * u[i] / nu) / nu;
    dv[i] += dc * (u[i] / nu - c * v[i] / nv) / nv;
  }
}

void matvec(const Tensor& m, ConstVec x, MutVec out) {
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const double* p = m.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* mr = p + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += mr[c] * x[c];
    out[r] = s;
  }
}

void matvec_transposed_acc(const Tensor& m, ConstVec y, MutVec out) {
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const double* p = m.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const double* mr = p + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += mr[c] * yr;
  }
}

void outer_acc(Tensor& m, ConstVec a, ConstVec b) {
  const std::size_t cols = m.dim(1);
  double* p = m.data().data();
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* mr = p + r * cols;
    for (std::size_t c = 0; c < cols; ++c) mr[c] += ar * b[c];
  }
}

void axpy(double a, ConstVec x, MutVec y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& point,
                        double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) {
    throw Error(Errc::kInvalidDimension,
                "finite-difference step " + std::to_string(step) +
                    " outside [1e-7, 1e-3]");
  }
  Tensor grad(point.shape());
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x0 = point[i];
    probe[i] = x0 + step;
    const double fp = f(probe);
    probe[i] = x0 - step;
    const double fm = f(probe);
    probe[i] = x0;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error(Errc::kNonFiniteEvaluation,
                  "function not finite near coordinate " + std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

GradCheckReport grad_check(const ScalarFunction& f, const Tensor& analytic,
                           const Tensor& point, double step) {
  require_shape(analytic, point.shape(), "analytic gradient");
  const Tensor numeric = finite_diff_grad(f, point, step);
  GradCheckReport report;
  report.step = step;
  report.per_parameter_errors.resize(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double scale = std::max({std::abs(a), std::abs(n), 1e-6});
    report.per_parameter_errors[i] = std::abs(a - n) / scale;
    report.max_rel_error =
        std::max(report.max_rel_error, report.per_parameter_errors[i]);
  }
  return report;
}

}  // namespace trmml
