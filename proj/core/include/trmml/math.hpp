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

#ifndef TRMML_MATH_HPP_
#define TRMML_MATH_HPP_

#include <functional>
#include <span>
#include <vector>

#include "trmml/tensor.hpp"

namespace trmml {

inline constexpr double kNormEpsilon = 1e-12;

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

double dot(ConstVec a, ConstVec b);
double l2_norm(ConstVec v);

/// Unit vector in the direction of `v`. Throws ZeroVector when ||v|| <= 1e-12.
std::vector<double> l2_normalize(ConstVec v);

/// Cosine similarity in [-1, 1]. Throws ZeroVector or ShapeMismatch.
double cosine(ConstVec u, ConstVec v);

/// softmax(x / temperature). Throws NonPositiveTemperature for t <= 0.
std::vector<double> softmax(ConstVec x, double temperature = 1.0);
double log_sum_exp(ConstVec x);

double sigmoid(double x);
// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x);
Tensor sigmoid(const Tensor& x);

// Adjoints. Each accumulates (+=) into its output spans.

// y = x / ||x||; dx += (dy - y (y . dy)) / ||x||.
void l2_normalize_backward(ConstVec x, ConstVec dy, MutVec dx);
// c = cos(u, v); du += dc * d cos / du, dv likewise.
void cosine_backward(ConstVec u, ConstVec v, double dc, MutVec du, MutVec dv);

// Row-major dense helpers: out = M x with M (rows x cols).
void matvec(const Tensor& m, ConstVec x, MutVec out);
// out += M^T y.
void matvec_transposed_acc(const Tensor& m, ConstVec y, MutVec out);
// M += a b^T.
void outer_acc(Tensor& m, ConstVec a, ConstVec b);
void axpy(double a, ConstVec x, MutVec y);

using ScalarFunction = std::function<double(const Tensor&)>;

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h.
/// Step must lie in [1e-7, 1e-3]; throws NonFiniteEvaluation if f is not
/// finite anywhere it is sampled.
Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& point,
                        double step);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<double> per_parameter_errors;
  double step = 0.0;
};

// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6), so
// near-zero gradients are compared in absolute terms.
GradCheckReport grad_check(const ScalarFunction& f, const Tensor& analytic,
                           const Tensor& point, double step = 1e-5);

}  // namespace trmml

#endif  // TRMML_MATH_HPP_
