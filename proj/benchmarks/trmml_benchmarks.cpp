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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "trmml/encoders.hpp"
#include "trmml/losses.hpp"
#include "trmml/metrics.hpp"
#include "trmml/model.hpp"
#include "trmml/prototypes.hpp"
#include "trmml/random.hpp"
#include "trmml/region.hpp"

namespace trmml {
namespace {

// Default desk-scale shapes: 7x7 grid, d = 64, 10 classes.
constexpr std::size_t kClasses = 10, kDim = 64, kGrid = 7;

void BM_RegionForward(benchmark::State& state) {
  auto rng = make_rng(1, 0);
  const RegionParams p = init_region_params(kClasses, kDim, 1);
  const Tensor f = normal_tensor({kGrid, kGrid, kDim}, 0.0, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(region_forward(p, f));
}
BENCHMARK(BM_RegionForward);

void BM_RegionBackward(benchmark::State& state) {
  auto rng = make_rng(2, 0);
  const RegionParams p = init_region_params(kClasses, kDim, 2);
  const Tensor f = normal_tensor({kGrid, kGrid, kDim}, 0.0, 1.0, rng);
  RegionCache cache;
  const auto out = region_forward(p, f, &cache);
  const Tensor g = normal_tensor({kClasses, kDim}, 0.0, 1.0, rng);
  for (auto _ : state) {
    RegionParams grads = zeros_like(p);
    Tensor gqk({kClasses, kDim});
    region_backward(p, f, out, cache, g, g, grads, gqk);
    benchmark::DoNotOptimize(gqk);
  }
}
BENCHMARK(BM_RegionBackward);

void BM_VisualEncode(benchmark::State& state) {
  VisualEncoderConfig cfg;
  cfg.seed = 3;
  const FrozenVisualEncoder enc(cfg);
  auto rng = make_rng(3, 0);
  const Tensor img = normal_tensor(enc.input_shape(), 0.0, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(enc.encode(img));
}
BENCHMARK(BM_VisualEncode);

// One training step's worth of forward and backward over a batch.
void BM_BatchLoss(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t threads = static_cast<std::size_t>(state.range(1));
  ModelConfig mc;
  mc.num_classes = kClasses;
  mc.seed = 4;
  const TrmModel model(mc);
  auto rng = make_rng(4, 0);
  std::vector<Tensor> feats;
  for (std::size_t i = 0; i < n; ++i) feats.push_back(normal_tensor({kGrid, kGrid, kDim}, 0.0, 1.0, rng));
  std::vector<const Tensor*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  LabelMatrix y(n, kClasses);
  std::bernoulli_distribution coin(0.3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < kClasses; ++c) y(i, c) = coin(rng) ? 1 : -1;
  VisualBank bank(kClasses, 64, kDim);
  for (std::size_t c = 0; c < kClasses; ++c)
    for (int j = 0; j < 64; ++j) {
      const Tensor v = normal_tensor({kDim}, 0.0, 1.0, rng);
      bank.push(c, v.data());
    }
  const ComponentFlags flags;
  for (auto _ : state) {
    const auto fwd = forward_batch(model, ptrs, flags, threads);
    TrainableParams grads;
    benchmark::DoNotOptimize(batch_loss(model, fwd, y, &bank, flags, LossWeights{}, &grads, threads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_BatchLoss)->Args({32, 1})->Args({128, 1})->Args({128, 4})->Unit(benchmark::kMillisecond);

void BM_PseudoLabelEstimate(benchmark::State& state) {
  const std::size_t n = 128;
  auto rng = make_rng(5, 0);
  PrototypeConfig pc;
  pc.warmup = 1;
  MultimodalPrototypes mp(kClasses, kDim, pc);
  mp.set_text_prototypes(normal_tensor({kClasses, kDim}, 0.0, 1.0, rng));
  LabelMatrix y(n, kClasses);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < kClasses; ++c) {
      const std::size_t r = (i + c) % 10;
      y(i, c) = static_cast<std::int8_t>(r == 0 ? 1 : (r == 1 ? -1 : 0));
    }
  const Tensor repr = normal_tensor({n, kClasses, kDim}, 0.0, 1.0, rng);
  for (std::size_t i = 0; i < n; ++i) {
    mp.push_image(make_region_set(normal_tensor({kClasses, kGrid, kGrid}, 0.0, 1.0, rng)).energies,
                  normal_tensor({kGrid, kGrid, kDim}, 0.0, 1.0, rng), y.row(i));
  }
  mp.update_thresholds(repr, y);
  for (auto _ : state) benchmark::DoNotOptimize(mp.estimate(repr, y));
}
BENCHMARK(BM_PseudoLabelEstimate);

void BM_MeanAp(benchmark::State& state) {
  const std::size_t n = 500;
  auto rng = make_rng(6, 0);
  const Tensor scores = normal_tensor({n, kClasses}, 0.0, 1.0, rng);
  LabelMatrix y(n, kClasses);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < kClasses; ++c) y(i, c) = (i * 7 + c) % 3 == 0 ? 1 : -1;
  for (auto _ : state) benchmark::DoNotOptimize(mean_ap(scores, y));
}
BENCHMARK(BM_MeanAp);

}  // namespace
}  // namespace trmml

BENCHMARK_MAIN();
