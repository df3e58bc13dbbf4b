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

#ifndef TRMML_OPTIM_HPP_
#define TRMML_OPTIM_HPP_

#include <cstddef>
#include <string_view>

#include "trmml/model.hpp"

namespace trmml {

// Cosine one-cycle schedule: rises from max_lr / div_factor to max_lr over
// the first pct_start of the steps, then decays to
// max_lr / (div_factor * final_div_factor) at the last step.
class OneCycleSchedule {
 public:
  OneCycleSchedule(double max_lr, std::size_t total_steps, double pct_start = 0.3,
                   double div_factor = 25.0, double final_div_factor = 1e4);

  double lr(std::size_t step) const;
  std::size_t total_steps() const noexcept { return total_; }
  double max_lr() const noexcept { return max_lr_; }

 private:
  double max_lr_;
  std::size_t total_;
  std::size_t warm_;
  double initial_;
  double final_;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay over every tensor of TrainableParams.
// The temperature parameter is not decayed.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const TrainableParams& like, const AdamWConfig& config = {});

  void step(TrainableParams& params, const TrainableParams& grads, double lr);

  const AdamWConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return steps_; }

  TrainableParams& first_moment() noexcept { return m_; }
  TrainableParams& second_moment() noexcept { return v_; }
  const TrainableParams& first_moment() const noexcept { return m_; }
  const TrainableParams& second_moment() const noexcept { return v_; }
  void set_steps(std::size_t steps) noexcept { steps_ = steps; }

  static bool decays(std::string_view name) { return name != "log_tau"; }

 private:
  AdamWConfig config_;
  TrainableParams m_;
  TrainableParams v_;
  std::size_t steps_ = 0;
};

}  // namespace trmml

#endif  // TRMML_OPTIM_HPP_
