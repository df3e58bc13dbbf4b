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

#include "trmml/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "trmml/math.hpp"
#include "trmml/random.hpp"

namespace trmml {

FrozenVisualEncoder::FrozenVisualEncoder(const VisualEncoderConfig& config)
    : config_(config) {
  const auto& c = config_;
  if (c.grid_h == 0 || c.grid_w == 0 || c.dim == 0 || c.hidden == 0 ||
      c.channels == 0 || c.image_height % c.grid_h != 0 ||
      c.image_width % c.grid_w != 0 || c.image_height < c.grid_h ||
      c.image_width < c.grid_w) {
    throw Error(Errc::kInvalidDimension,
                "image " + std::to_string(c.image_height) + "x" +
                    std::to_string(c.image_width) +
                    " is not divisible into a " + std::to_string(c.grid_h) +
                    "x" + std::to_string(c.grid_w) + " grid");
  }
  patch_h_ = c.image_height / c.grid_h;
  patch_w_ = c.image_width / c.grid_w;
  const std::size_t patch_dim = patch_h_ * patch_w_ * c.channels;
  auto rng = make_rng(c.seed, 0);
  w1_ = normal_tensor({c.hidden, patch_dim}, 0.0,
                      1.0 / std::sqrt(static_cast<double>(patch_dim)), rng);
  b1_ = normal_tensor({c.hidden}, 0.0, 0.5, rng);
  if (!c.bias) b1_.fill(0.0);
  w2_ = normal_tensor({c.dim, c.hidden}, 0.0,
                      1.0 / std::sqrt(static_cast<double>(c.hidden)), rng);
}

Shape FrozenVisualEncoder::input_shape() const {
  return {config_.image_height, config_.image_width, config_.channels};
}

Shape FrozenVisualEncoder::output_shape() const {
  return {config_.grid_h, config_.grid_w, config_.dim};
}

Tensor FrozenVisualEncoder::encode(const Tensor& image) const {
  require_shape(image, input_shape(), "image");
  const auto& c = config_;
  Tensor out(output_shape());
  std::vector<double> patch(patch_h_ * patch_w_ * c.channels);
  std::vector<double> hidden(c.hidden);
  for (std::size_t gi = 0; gi < c.grid_h; ++gi) {
    for (std::size_t gj = 0; gj < c.grid_w; ++gj) {
      std::size_t k = 0;
      for (std::size_t y = 0; y < patch_h_; ++y) {
        for (std::size_t x = 0; x < patch_w_; ++x) {
          for (std::size_t ch = 0; ch < c.channels; ++ch) {
            patch[k++] = image(gi * patch_h_ + y, gj * patch_w_ + x, ch);
          }
        }
      }
      matvec(w1_, patch, hidden);
      for (std::size_t h = 0; h < c.hidden; ++h) {
        hidden[h] = std::tanh(hidden[h] + b1_[h]);
      }
      auto cell = out.data().subspan((gi * c.grid_w + gj) * c.dim, c.dim);
      matvec(w2_, hidden, cell);
    }
  }
  return out;
}

std::uint64_t FrozenVisualEncoder::weight_checksum() const {
  auto h = checksum(w1_.data());
  h = checksum(b1_.data(), h);
  return checksum(w2_.data(), h);
}

Tensor encode_image(const Tensor& image, const FrozenVisualEncoder& encoder) {
  return encoder.encode(image);
}

PromptBank build_prompts(std::size_t num_classes, std::size_t length,
                         std::size_t token_dim, std::uint64_t seed) {
  if (num_classes < 1 || length < 1 || token_dim < 1) {
    throw Error(Errc::kInvalidDimension,
                "prompt bank needs C >= 1, L >= 1, d_tok >= 1");
  }
  PromptBank bank;
  auto ctx_rng = make_rng(seed, 0);
  bank.context = normal_tensor({num_classes, length, token_dim}, 0.0,
                               kPromptInitStd, ctx_rng);
  auto cls_rng = make_rng(seed, 1);
  bank.class_tokens =
      normal_tensor({num_classes, token_dim}, 0.0, kPromptInitStd, cls_rng);
  return bank;
}

FrozenTextEncoder::FrozenTextEncoder(const TextEncoderConfig& config)
    : config_(config) {
  if (config.token_dim == 0 || config.hidden == 0 || config.dim == 0) {
    throw Error(Errc::kInvalidDimension, "text encoder dims must be positive");
  }
  auto rng = make_rng(config.seed, 2);
  const auto in = 2 * config.token_dim;
  wa_ = normal_tensor({config.hidden, in}, 0.0,
                      1.0 / std::sqrt(static_cast<double>(in)), rng);
  wb_ = normal_tensor({config.dim, config.hidden}, 0.0,
                      1.0 / std::sqrt(static_cast<double>(config.hidden)), rng);
}

Tensor FrozenTextEncoder::encode(const PromptBank& bank,
                                 TextCache* cache) const {
  const std::size_t C = bank.num_classes(), L = bank.length();
  const std::size_t dt = bank.token_dim();
  if (dt != config_.token_dim) {
    throw Error(Errc::kShapeMismatch, "prompt token dim " + std::to_string(dt) +
                                          " != encoder token dim " +
                                          std::to_string(config_.token_dim));
  }
  require_shape(bank.class_tokens, {C, dt}, "class tokens");
  Tensor g({C, config_.dim});
  Tensor hidden({C, config_.hidden});
  std::vector<double> z(2 * dt);
  for (std::size_t c = 0; c < C; ++c) {
    std::fill(z.begin(), z.end(), 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < dt; ++k) z[k] += bank.context(c, l, k);
    }
    for (std::size_t k = 0; k < dt; ++k) {
      z[k] /= static_cast<double>(L);
      z[dt + k] = bank.class_tokens(c, k);
    }
    auto h = hidden.row(c);
    matvec(wa_, z, h);
    for (auto& v : h) v = std::tanh(v);
    matvec(wb_, h, g.row(c));
  }
  if (cache) cache->hidden = std::move(hidden);
  return g;
}

void FrozenTextEncoder::backward(const PromptBank& bank, const TextCache& cache,
                                 const Tensor& grad_g,
                                 Tensor& grad_context) const {
  const std::size_t C = bank.num_classes(), L = bank.length();
  const std::size_t dt = bank.token_dim();
  require_shape(grad_g, {C, config_.dim}, "text gradient");
  require_shape(grad_context, bank.context.shape(), "context gradient");
  std::vector<double> dh(config_.hidden);
  std::vector<double> dz(2 * dt);
  for (std::size_t c = 0; c < C; ++c) {
    std::fill(dh.begin(), dh.end(), 0.0);
    matvec_transposed_acc(wb_, grad_g.row(c), dh);
    auto h = cache.hidden.row(c);
    for (std::size_t k = 0; k < dh.size(); ++k) dh[k] *= 1.0 - h[k] * h[k];
    std::fill(dz.begin(), dz.end(), 0.0);
    matvec_transposed_acc(wa_, dh, dz);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < dt; ++k) {
        grad_context(c, l, k) += dz[k] / static_cast<double>(L);
      }
    }
  }
}

std::uint64_t FrozenTextEncoder::weight_checksum() const {
  return checksum(wb_.data(), checksum(wa_.data()));
}

Tensor encode_text(const PromptBank& bank, const FrozenTextEncoder& encoder) {
  return encoder.encode(bank);
}

}  // namespace trmml
