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

#include "trmml/optim.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace trmml {
namespace {

double anneal(double from, double to, double t) {
  return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<Tensor*> tensors(TrainableParams& p) {
  std::vector<Tensor*> out;
  p.visit([&](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace

OneCycleSchedule::OneCycleSchedule(double max_lr, std::size_t total_steps,
                                   double pct_start, double div_factor,
                                   double final_div_factor)
    : max_lr_(max_lr), total_(total_steps) {
  if (!(max_lr > 0.0) || total_steps == 0 || !(pct_start > 0.0 && pct_start < 1.0) ||
      !(div_factor > 0.0) || !(final_div_factor > 0.0)) {
    throw Error(Errc::kInvalidDimension, "invalid one-cycle schedule");
  }
  warm_ = static_cast<std::size_t>(pct_start * static_cast<double>(total_steps));
  initial_ = max_lr / div_factor;
  final_ = initial_ / final_div_factor;
}

double OneCycleSchedule::lr(std::size_t step) const {
  if (step < warm_) {
    return anneal(initial_, max_lr_,
                  static_cast<double>(step) / static_cast<double>(warm_));
  }
  const std::size_t span = total_ > warm_ + 1 ? total_ - 1 - warm_ : 1;
  const double t = std::min(1.0, static_cast<double>(step - warm_) /
                                     static_cast<double>(span));
  return anneal(max_lr_, final_, t);
}

AdamW::AdamW(const TrainableParams& like, const AdamWConfig& config)
    : config_(config), m_(zeros_like(like)), v_(zeros_like(like)) {}

void AdamW::step(TrainableParams& params, const TrainableParams& grads, double lr) {
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  auto gs = tensors(const_cast<TrainableParams&>(grads));
  auto ms = tensors(m_);
  auto vs = tensors(v_);
  std::size_t k = 0;
  params.visit([&](std::string_view name, Tensor& p) {
    auto g = gs[k]->data();
    auto m = ms[k]->data();
    auto v = vs[k]->data();
    ++k;
    if (g.size() != p.size()) {
      throw Error(Errc::kShapeMismatch, std::string("gradient for ") + std::string(name));
    }
    const double decay = decays(name) ? lr * config_.weight_decay : 0.0;
    auto x = p.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      x[i] -= decay * x[i];
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  });
}

}  // namespace trmml
