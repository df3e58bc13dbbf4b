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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "trmml/error.hpp"
#include "trmml/math.hpp"
#include "trmml/tensor.hpp"

namespace trmml {
namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no trmml::Error thrown";
  return Errc::kIoError;
}

TEST(TensorTest, ShapeAndIndexing) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  t(1, 2) = 5.0;
  EXPECT_EQ(t[5], 5.0);
  EXPECT_EQ(t.row(1).size(), 3u);
  EXPECT_EQ(t.reshaped({3, 2})(2, 1), 5.0);
}

TEST(TensorTest, RejectsBadShapes) {
  EXPECT_EQ(code_of([] { (void)Tensor({2, 0}); }), Errc::kInvalidDimension);
  EXPECT_EQ(code_of([] { (void)Tensor({2, 2}, std::vector<double>(3)); }), Errc::kShapeMismatch);
  EXPECT_EQ(code_of([] { Tensor({2, 3}).reshaped({4}); }), Errc::kShapeMismatch);
}

TEST(TensorTest, ChecksumSeesEveryBit) {
  Tensor a = Tensor::vector({1.0, 2.0});
  Tensor b = a;
  EXPECT_EQ(checksum(a.data()), checksum(b.data()));
  b[1] = std::nextafter(2.0, 3.0);
  EXPECT_NE(checksum(a.data()), checksum(b.data()));
}

TEST(L2NormalizeTest, Examples) {
  const std::vector<double> a{3, 0, 0};
  EXPECT_EQ(l2_normalize(a), (std::vector<double>{1, 0, 0}));
  const std::vector<double> b{1, 1};
  const auto u = l2_normalize(b);
  EXPECT_NEAR(u[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(u[1], 1.0 / std::sqrt(2.0), 1e-15);
  const std::vector<double> z{0, 0};
  EXPECT_EQ(code_of([&] { (void)l2_normalize(z); }), Errc::kZeroVector);
}

TEST(L2NormalizeTest, UnitNormAndIdempotent) {
  testing::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = testing::random_tensor({testing::random_size(rng, 1, 40)}, rng, 3.0);
    const auto u = l2_normalize(v.data());
    EXPECT_NEAR(l2_norm(u), 1.0, 1e-10);
    const auto uu = l2_normalize(u);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(uu[i], u[i], 1e-10);
  }
}

TEST(CosineTest, Examples) {
  const std::vector<double> u{1, 2, 2}, v{2, 1, 2};
  EXPECT_NEAR(cosine(u, v), 8.0 / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(cosine(u, u), 1.0);
  const std::vector<double> e0{1, 0}, e1{0, 1};
  EXPECT_EQ(cosine(e0, e1), 0.0);
  const std::vector<double> short_v{1.0};
  EXPECT_EQ(code_of([&] { (void)cosine(u, short_v); }), Errc::kShapeMismatch);
  const std::vector<double> zero{0, 0, 0};
  EXPECT_EQ(code_of([&] { (void)cosine(u, zero); }), Errc::kZeroVector);
}

TEST(CosineTest, SymmetricAndScaleInvariant) {
  testing::Rng rng(12);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = testing::random_size(rng, 1, 16);
    const auto u = testing::random_tensor({d}, rng);
    const auto v = testing::random_tensor({d}, rng);
    std::vector<double> su(u.values()), sv(v.values());
    const double a = scale(rng), b = scale(rng);
    for (auto& x : su) x *= a;
    for (auto& x : sv) x *= b;
    EXPECT_NEAR(cosine(u.data(), v.data()), cosine(v.data(), u.data()), 1e-14);
    EXPECT_NEAR(cosine(su, sv), cosine(u.data(), v.data()), 1e-12);
  }
}

TEST(SoftmaxTest, Examples) {
  const auto s = softmax(std::vector<double>{2.5, 2.5, 2.5}, 0.3);
  for (double p : s) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  const auto t = softmax(std::vector<double>{0.0, std::log(3.0)}, 1.0);
  EXPECT_NEAR(t[0], 0.25, 1e-15);
  EXPECT_NEAR(t[1], 0.75, 1e-15);
  const auto flat = softmax(std::vector<double>{-3.0, 0.0, 7.0}, 1e6);
  EXPECT_LT(*std::max_element(flat.begin(), flat.end()) -
                *std::min_element(flat.begin(), flat.end()),
            1e-3);
  EXPECT_EQ(code_of([] { (void)softmax(std::vector<double>{1.0}, 0.0); }),
            Errc::kNonPositiveTemperature);
}

TEST(SoftmaxTest, SumsToOneAndShiftInvariant) {
  testing::Rng rng(13);
  std::normal_distribution<double> shift(0.0, 50.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto x = testing::random_tensor({testing::random_size(rng, 1, 64)}, rng, 10.0);
    const auto p = softmax(x.data());
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-10);
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    std::vector<double> y(x.values());
    const double s = shift(rng);
    for (auto& v : y) v += s;
    const auto q = softmax(y);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(SigmoidTest, Examples) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  const double tiny = sigmoid(-50.0);
  EXPECT_GT(tiny, 0.0);
  EXPECT_LT(tiny, 1e-20);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  EXPECT_GE(sigmoid(-800.0), 0.0);
  EXPECT_TRUE(std::isfinite(log_sigmoid(-800.0)));
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(SigmoidTest, MonotoneAndSymmetric) {
  double prev = 0.0;
  for (double x = -40.0; x <= 40.0; x += 0.25) {
    const double s = sigmoid(x);
    EXPECT_GE(s, prev);
    prev = s;
    EXPECT_NEAR(sigmoid(-x), 1.0 - s, 1e-15);
  }
  const Tensor t = sigmoid(Tensor::vector({-1.0, 0.0, 1.0}));
  EXPECT_EQ(t[1], 0.5);
  EXPECT_NEAR(t[0] + t[2], 1.0, 1e-15);
}

TEST(LogSumExpTest, StableForLargeInputs) {
  const std::vector<double> x{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(x), 1000.0 + std::log(2.0), 1e-12);
}

TEST(FiniteDiffTest, Examples) {
  const auto sq = [](const Tensor& x) { return x[0] * x[0]; };
  EXPECT_NEAR(finite_diff_grad(sq, Tensor::vector({3.0}), 1e-5)[0], 6.0, 1e-6);
  const auto constant = [](const Tensor&) { return 4.2; };
  const Tensor g = finite_diff_grad(constant, Tensor::vector({1.0, -2.0, 0.5}), 1e-4);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
  const auto sig = [](const Tensor& x) { return sigmoid(x[0]) + sigmoid(x[1]); };
  const Tensor s = finite_diff_grad(sig, Tensor::vector({0.0, 0.0}), 1e-5);
  EXPECT_NEAR(s[0], 0.25, 1e-8);
  EXPECT_NEAR(s[1], 0.25, 1e-8);
}

TEST(FiniteDiffTest, Errors) {
  const auto sq = [](const Tensor& x) { return x[0] * x[0]; };
  EXPECT_EQ(code_of([&] { finite_diff_grad(sq, Tensor::vector({1.0}), 1e-2); }),
            Errc::kInvalidDimension);
  const auto blowup = [](const Tensor& x) { return x[0] > 0 ? INFINITY : 0.0; };
  EXPECT_EQ(code_of([&] { finite_diff_grad(blowup, Tensor::vector({0.0}), 1e-5); }),
            Errc::kNonFiniteEvaluation);
}

TEST(GradCheckTest, ReportIsConsistent) {
  const auto f = [](const Tensor& x) { return std::sin(x[0]) * x[1]; };
  const Tensor x = Tensor::vector({0.3, 2.0});
  const Tensor analytic = Tensor::vector({std::cos(0.3) * 2.0, std::sin(0.3)});
  const auto report = grad_check(f, analytic, x);
  EXPECT_LT(report.max_rel_error, 1e-8);
  ASSERT_EQ(report.per_parameter_errors.size(), 2u);
  EXPECT_EQ(report.max_rel_error, *std::max_element(report.per_parameter_errors.begin(),
                                                    report.per_parameter_errors.end()));
  const auto bad = grad_check(f, Tensor::vector({0.0, 0.0}), x);
  EXPECT_GT(bad.max_rel_error, 0.5);
}

TEST(AdjointTest, NormalizeAndCosineBackward) {
  testing::Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = testing::random_tensor({5}, rng);
    const Tensor w = testing::random_tensor({5}, rng);
    const auto f = [&](const Tensor& p) {
      const auto u = l2_normalize(p.data());
      return dot(u, w.data());
    };
    Tensor g({5});
    l2_normalize_backward(x.data(), w.data(), g.data());
    EXPECT_LT(grad_check(f, g, x).max_rel_error, 1e-6);

    const Tensor y = testing::random_tensor({5}, rng);
    Tensor gu({5}), gv({5});
    cosine_backward(x.data(), y.data(), 1.0, gu.data(), gv.data());
    const auto cu = [&](const Tensor& p) { return cosine(p.data(), y.data()); };
    const auto cv = [&](const Tensor& p) { return cosine(x.data(), p.data()); };
    EXPECT_LT(grad_check(cu, gu, x).max_rel_error, 1e-6);
    EXPECT_LT(grad_check(cv, gv, y).max_rel_error, 1e-6);
  }
}

}  // namespace
}  // namespace trmml
