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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "trmml/error.hpp"
#include "trmml/losses.hpp"

namespace trmml {
namespace {

using testing::Rng;
using testing::random_tensor;

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no trmml::Error thrown";
  return Errc::kIoError;
}

TEST(MatchingScoreTest, Examples) {
  const std::vector<double> e{1, 0}, o{0, 1};
  EXPECT_DOUBLE_EQ(matching_score(e, e, 1.0), 1.0);
  EXPECT_EQ(matching_score(e, o, 0.3), 0.0);
  EXPECT_NEAR(matching_score(std::vector<double>{1, 2, 2}, std::vector<double>{2, 1, 2}, 0.5),
              16.0 / 9.0, 1e-12);
  EXPECT_EQ(code_of([&] { (void)matching_score(e, e, 0.0); }), Errc::kNonPositiveTemperature);
  EXPECT_EQ(code_of([&] { (void)matching_score(e, std::vector<double>{0, 0}, 1.0); }),
            Errc::kZeroVector);
}

TEST(PredictScoresTest, DiagonalAgainstLoopOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3, C = 2, d = 5;
    const Tensor fq = random_tensor({n, C, d}, rng), fr = random_tensor({n, C, d}, rng);
    const Tensor g = random_tensor({C, d}, rng);
    const auto s = predict_scores(fq, fr, g, 0.2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* gc = g.data().data() + c * d;
        EXPECT_NEAR(s.query(i, c), testing::oracle_cosine(fq.data().data() + (i * C + c) * d, gc, d) / 0.2, 1e-12);
        EXPECT_NEAR(s.region(i, c), testing::oracle_cosine(fr.data().data() + (i * C + c) * d, gc, d) / 0.2, 1e-12);
      }
    }
  }
}

TEST(PredictScoresTest, RegionEqualToTextGivesOnes) {
  Rng rng(2);
  const Tensor g = random_tensor({3, 4}, rng);
  const Tensor fr = g.reshaped({1, 3, 4});
  const auto s = predict_scores(fr, fr, g, 1.0);
  for (double v : s.region.data()) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(PredictScoresTest, NegatingOneTextRowNegatesItsColumn) {
  Rng rng(3);
  const Tensor fq = random_tensor({4, 3, 5}, rng), fr = random_tensor({4, 3, 5}, rng);
  Tensor g = random_tensor({3, 5}, rng);
  const auto a = predict_scores(fq, fr, g, 0.5);
  for (std::size_t k = 0; k < 5; ++k) g(1, k) = -g(1, k);
  const auto b = predict_scores(fq, fr, g, 0.5);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double sign = c == 1 ? -1.0 : 1.0;
      EXPECT_DOUBLE_EQ(b.query(i, c), sign * a.query(i, c));
      EXPECT_DOUBLE_EQ(b.region(i, c), sign * a.region(i, c));
    }
  }
}

TEST(MatchScoresBackwardTest, MatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor repr = random_tensor({2, 3, 4}, rng);
    const Tensor text = random_tensor({3, 4}, rng);
    const Tensor w = random_tensor({2, 3}, rng);
    const double tau = 0.3;
    const auto objective = [&](const Tensor& r, const Tensor& t, double tt) {
      const Tensor s = match_scores(r, t, tt);
      double acc = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) acc += w[i] * s[i];
      return acc;
    };
    const Tensor s = match_scores(repr, text, tau);
    Tensor gr(repr.shape()), gt(text.shape());
    const double gtau = match_scores_backward(repr, text, tau, s, w, &gr, gt);
    EXPECT_LT(grad_check([&](const Tensor& x) { return objective(x, text, tau); }, gr, repr)
                  .max_rel_error, 1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return objective(repr, x, tau); }, gt, text)
                  .max_rel_error, 1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return objective(repr, text, x[0]); },
                         Tensor::vector({gtau}), Tensor::vector({tau}))
                  .max_rel_error, 1e-4);
  }
}

// Per-entry ASL term written from the definition.
double asl_term(double p, int y, const AslParams& a) {
  if (y == 1) return std::pow(1.0 - p, a.gamma_pos) * -std::log(p);
  if (y == -1) {
    const double pm = std::max(p - a.shift, 0.0);
    return std::pow(pm, a.gamma_neg) * -std::log(1.0 - pm);
  }
  return 0.0;
}

TEST(AslTest, Examples) {
  const AslParams a;
  LabelMatrix pos(1, 1), neg(1, 1);
  pos(0, 0) = 1;
  neg(0, 0) = -1;
  EXPECT_LT(asl_loss(Tensor({1, 1}, 1.0 - 1e-9), pos, a), 1e-15);
  EXPECT_EQ(asl_loss(Tensor({1, 1}, 0.03), neg, a), 0.0);
  EXPECT_NEAR(asl_loss(Tensor({1, 1}, 0.5), neg, a), 0.45 * 0.45 * -std::log(0.55), 1e-15);
  EXPECT_NEAR(asl_loss(Tensor({1, 1}, 0.5), neg, a), 0.1211, 1e-4);
  EXPECT_EQ(code_of([&] { (void)asl_loss(Tensor({1, 1}, 1.0), pos, a); }),
            Errc::kProbabilityOutOfRange);
  EXPECT_EQ(asl_loss(Tensor({1, 1}, 0.4), LabelMatrix(1, 1), a), 0.0);
}

TEST(AslTest, MeanOverObservedEntries) {
  Rng rng(5);
  const AslParams a;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = testing::random_size(rng, 1, 6), C = testing::random_size(rng, 1, 5);
    const LabelMatrix y = testing::random_labels(n, C, rng, 0.3, 0.4);
    const Tensor logits = random_tensor({n, C}, rng, 3.0);
    Tensor p = logits;
    for (auto& v : p.data()) v = sigmoid(v);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        if (y(i, c) == 0) continue;
        sum += asl_term(p(i, c), y(i, c), a);
        ++count;
      }
    }
    const double want = count ? sum / static_cast<double>(count) : 0.0;
    EXPECT_NEAR(asl_loss(p, y, a), want, 1e-12);
    EXPECT_NEAR(asl_loss_logits(logits, y, a), want, 1e-12);
  }
}

TEST(AslTest, ShiftMakesEasyNegativesFree) {
  const AslParams a;
  LabelMatrix neg(1, 1);
  neg(0, 0) = -1;
  for (double p = 0.001; p < 0.999; p += 0.007) {
    const double l = asl_loss(Tensor({1, 1}, p), neg, a);
    if (p <= a.shift) {
      EXPECT_EQ(l, 0.0) << p;
    } else {
      EXPECT_GT(l, 0.0) << p;
    }
  }
}

TEST(AslTest, LogitGradientMatchesFiniteDifferences) {
  Rng rng(6);
  const AslParams a;
  for (int trial = 0; trial < 20; ++trial) {
    const LabelMatrix y = testing::random_labels(3, 4, rng, 0.4, 0.4);
    const Tensor x = random_tensor({3, 4}, rng, 2.0);
    Tensor g(x.shape());
    (void)asl_loss_logits(x, y, a, &g);
    const auto f = [&](const Tensor& t) { return asl_loss_logits(t, y, a); };
    EXPECT_LT(grad_check(f, g, x).max_rel_error, 1e-4);
  }
}

TEST(KdTest, Examples) {
  const Tensor p = Tensor::matrix(1, 2, {0.75, 0.25});
  const Tensor q = Tensor::matrix(1, 2, {0.25, 0.75});
  EXPECT_EQ(kd_loss(p, p), 0.0);
  EXPECT_NEAR(kd_loss(p, q), 0.75 * std::log(3.0) + 0.25 * std::log(1.0 / 3.0), 1e-15);
  EXPECT_NEAR(kd_loss(p, q), 0.5493, 1e-4);
  EXPECT_EQ(code_of([] { (void)kd_loss(Tensor::matrix(1, 2, {1.0, 0.0}),
                                        Tensor::matrix(1, 2, {0.5, 0.5})); }),
            Errc::kDegenerateDistribution);
}

TEST(KdTest, NonNegativeOnRandomPairs) {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = testing::random_size(rng, 1, 4), C = testing::random_size(rng, 2, 8);
    const Tensor t = row_softmax(random_tensor({n, C}, rng, 3.0));
    const Tensor s = row_softmax(random_tensor({n, C}, rng, 3.0));
    EXPECT_GE(kd_loss(t, s), 0.0);
  }
}

TEST(KdTest, ScoreGradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor teacher = random_tensor({3, 5}, rng, 2.0);
    const Tensor student = random_tensor({3, 5}, rng, 2.0);
    Tensor g(student.shape());
    (void)kd_loss_from_scores(teacher, student, &g);
    const auto f = [&](const Tensor& s) { return kd_loss_from_scores(teacher, s); };
    EXPECT_LT(grad_check(f, g, student).max_rel_error, 1e-4);
  }
}

std::vector<ConstVec> views(const std::vector<std::vector<double>>& v) {
  return {v.begin(), v.end()};
}

TEST(InfoNceTest, Examples) {
  const std::vector<double> a{1, 0};
  const std::vector<std::vector<double>> pos{{1, 0}}, neg{{0, 1}};
  EXPECT_EQ(infonce_loss(a, views(pos), {}, 0.7), 0.0);
  EXPECT_NEAR(infonce_loss(a, views(pos), views(neg), 1.0), -std::log(M_E / (M_E + 1.0)), 1e-15);
  EXPECT_NEAR(infonce_loss(a, views(pos), views(neg), 1.0), 0.3133, 1e-4);
  const std::vector<std::vector<double>> same{{2, 0}, {3, 0}, {0.5, 0}};
  EXPECT_NEAR(infonce_loss(a, views(pos), views(same), 0.1), std::log(4.0), 1e-12);
  EXPECT_EQ(code_of([&] { (void)infonce_loss(a, {}, views(neg), 1.0); }), Errc::kEmptyPositiveSet);
  EXPECT_EQ(code_of([&] { (void)infonce_loss(a, views(pos), views(neg), -1.0); }),
            Errc::kNonPositiveTemperature);
}

TEST(InfoNceTest, HarderNegativeNeverLowersLoss) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 4;
    const Tensor a = random_tensor({d}, rng);
    std::vector<std::vector<double>> pos(2), neg(3);
    for (auto& v : pos) v = random_tensor({d}, rng).values();
    for (auto& v : neg) v = random_tensor({d}, rng).values();
    const double before = infonce_loss(a.data(), views(pos), views(neg), 0.5);
    neg.push_back(a.values());  // cosine 1, the maximum possible
    EXPECT_GE(infonce_loss(a.data(), views(pos), views(neg), 0.5), before);
  }
}

TEST(InfoNceTest, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3;
    const Tensor a = random_tensor({d}, rng);
    std::vector<std::vector<double>> pos(2), neg(2);
    for (auto& v : pos) v = random_tensor({d}, rng).values();
    for (auto& v : neg) v = random_tensor({d}, rng).values();
    InfoNceGrads g;
    (void)infonce_loss(a.data(), views(pos), views(neg), 0.4, &g);
    const auto fa = [&](const Tensor& x) { return infonce_loss(x.data(), views(pos), views(neg), 0.4); };
    EXPECT_LT(grad_check(fa, Tensor({d}, g.anchor), a).max_rel_error, 1e-4);
    const auto fp = [&](const Tensor& x) {
      auto p = pos;
      p[0] = x.values();
      return infonce_loss(a.data(), views(p), views(neg), 0.4);
    };
    EXPECT_LT(grad_check(fp, Tensor({d}, g.positives[0]), Tensor({d}, pos[0])).max_rel_error, 1e-4);
    const auto fn = [&](const Tensor& x) {
      auto n = neg;
      n[1] = x.values();
      return infonce_loss(a.data(), views(pos), views(n), 0.4);
    };
    EXPECT_LT(grad_check(fn, Tensor({d}, g.negatives[1]), Tensor({d}, neg[1])).max_rel_error, 1e-4);
  }
}

TEST(TotalLossTest, Examples) {
  const LossWeights w;
  EXPECT_DOUBLE_EQ(total_loss({1, 1, 0, 0}, w), 2.0);
  EXPECT_NEAR(total_loss({1, 2, 2, 3}, w), 3.13, 1e-15);
  LossWeights cls_only;
  cls_only.beta = cls_only.gamma = 0.0;
  EXPECT_EQ(total_loss({0.4, 0.6, 9, 9}, cls_only), 1.0);
  EXPECT_EQ(code_of([&] { (void)total_loss({1, std::numeric_limits<double>::quiet_NaN(), 0, 0}, w); }),
            Errc::kNonFiniteComponent);
}

TEST(TotalLossTest, AffineInEachComponent) {
  Rng rng(11);
  LossWeights w;
  w.alpha = 0.7;
  w.beta = 0.2;
  w.gamma = 0.05;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_tensor({4}, rng);
    const LossComponents c{x[0], x[1], x[2], x[3]};
    const double want = x[0] + 0.7 * x[1] + 0.2 * x[2] + 0.05 * x[3];
    EXPECT_NEAR(total_loss(c, w), want, 1e-14);
  }
}

}  // namespace
}  // namespace trmml
