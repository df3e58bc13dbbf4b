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

#ifndef TRMML_ERROR_HPP_
#define TRMML_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace trmml {

enum class Errc {
  kZeroVector,
  kShapeMismatch,
  kNonPositiveTemperature,
  kNonFiniteEvaluation,
  kInvalidDimension,
  kProbabilityOutOfRange,
  kDegenerateDistribution,
  kEmptyPositiveSet,
  kNonFiniteComponent,
  kNoPositiveLabel,
  kDimensionMismatch,
  kEmptyQueue,
  kColdThresholds,
  kSpecInfeasible,
  kInvalidRatio,
  kNoPositiveAvailable,
  kBadMagic,
  kTruncatedPayload,
  kRankOverflow,
  kIoError,
  kDivergenceDetected,
  kNoPositives,
  kConfigParse,
  kCheckpointCorrupt,
};

std::string_view to_string(Errc code);

// All library failures are reported through this exception type; code()
// identifies the failure class, what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace trmml

#endif  // TRMML_ERROR_HPP_
