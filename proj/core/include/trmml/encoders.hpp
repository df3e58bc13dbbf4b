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

#ifndef TRMML_ENCODERS_HPP_
#define TRMML_ENCODERS_HPP_

#include <cstddef>
#include <cstdint>

#include "trmml/tensor.hpp"

namespace trmml {

inline constexpr std::size_t kDefaultPromptLength = 16;
inline constexpr double kPromptInitStd = 0.02;

struct VisualEncoderConfig {
  std::size_t image_height = 28;
  std::size_t image_width = 28;
  std::size_t channels = 3;
  std::size_t grid_h = 7;  // feature map height h
  std::size_t grid_w = 7;  // feature map width w
  std::size_t dim = 64;    // joint embedding dim d
  std::size_t hidden = 128;
  bool bias = true;
  std::uint64_t seed = 0;
};

// Stand-in for a pretrained image backbone. Each non-overlapping patch of the
// image is mapped through a seeded two-layer projection with a tanh in
// between, giving one d-dimensional feature per grid cell. Weights are fixed
// at construction and never exposed for mutation.
class FrozenVisualEncoder {
 public:
  explicit FrozenVisualEncoder(const VisualEncoderConfig& config);

  const VisualEncoderConfig& config() const noexcept { return config_; }
  Shape input_shape() const;
  Shape output_shape() const;

  // (H_in, W_in, ch) -> (h, w, d). Throws ShapeMismatch.
  Tensor encode(const Tensor& image) const;

  std::uint64_t weight_checksum() const;

 private:
  VisualEncoderConfig config_;
  std::size_t patch_h_;
  std::size_t patch_w_;
  Tensor w1_;  // (hidden, patch_h * patch_w * ch)
  Tensor b1_;  // (hidden)
  Tensor w2_;  // (dim, hidden)
};

Tensor encode_image(const Tensor& image, const FrozenVisualEncoder& encoder);

// Learnable per-class context tokens plus a fixed class token per class.
struct PromptBank {
  Tensor context;       // (C, L, d_tok), trainable
  Tensor class_tokens;  // (C, d_tok), fixed

  std::size_t num_classes() const { return context.dim(0); }
  std::size_t length() const { return context.dim(1); }
  std::size_t token_dim() const { return context.dim(2); }
};

// Context ~ N(0, 0.02^2) from `seed`; class tokens come from an independent
// stream of the same seed at the same scale.
PromptBank build_prompts(std::size_t num_classes, std::size_t length,
                         std::size_t token_dim, std::uint64_t seed);

struct TextEncoderConfig {
  std::size_t token_dim = 64;
  std::size_t hidden = 128;
  std::size_t dim = 64;
  std::uint64_t seed = 0;
};

// Intermediate activations kept for the backward pass.
struct TextCache {
  Tensor hidden;  // (C, hidden), post-tanh
};

// Stand-in for the frozen text transformer: g_c = W_b tanh(W_a [mean_l w_cl;
// CLS_c]). Each class row depends only on that class's prompt.
class FrozenTextEncoder {
 public:
  explicit FrozenTextEncoder(const TextEncoderConfig& config);

  const TextEncoderConfig& config() const noexcept { return config_; }

  // Returns G with shape (C, d).
  Tensor encode(const PromptBank& bank, TextCache* cache = nullptr) const;

  // Accumulates dL/dcontext given dL/dG. Encoder weights receive nothing.
  void backward(const PromptBank& bank, const TextCache& cache,
                const Tensor& grad_g, Tensor& grad_context) const;

  std::uint64_t weight_checksum() const;

 private:
  TextEncoderConfig config_;
  Tensor wa_;  // (hidden, 2 * token_dim)
  Tensor wb_;  // (dim, hidden)
};

Tensor encode_text(const PromptBank& bank, const FrozenTextEncoder& encoder);

}  // namespace trmml

#endif  // TRMML_ENCODERS_HPP_
