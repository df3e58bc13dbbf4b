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

#ifndef TRMML_METRICS_HPP_
#define TRMML_METRICS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "trmml/labels.hpp"
#include "trmml/tensor.hpp"

namespace trmml {

// Mean over positives of precision at the positive's rank. Ranking is by
// descending score; equal scores keep ascending index order. Labels > 0 are
// positive, everything else negative. Throws NoPositives.
double average_precision(std::span<const double> scores,
                         std::span<const std::int8_t> labels);

// Unweighted mean of per-class AP over an (n, C) score matrix. The thrown
// NoPositives message names the offending class.
double mean_ap(const Tensor& scores, const LabelMatrix& truth);

std::vector<double> per_class_ap(const Tensor& scores, const LabelMatrix& truth);

}  // namespace trmml

#endif  // TRMML_METRICS_HPP_
