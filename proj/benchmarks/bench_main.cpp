// Copyright 2026 The gdino Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <vector>

#include "gdino/attention_ops.hpp"
#include "gdino/backbone.hpp"
#include "gdino/hungarian.hpp"
#include "gdino/kernels.hpp"
#include "gdino/loss.hpp"
#include "gdino/model.hpp"
#include "gdino/rng.hpp"

namespace gdino {
namespace {

Tensor<float> random_tensor(Rng& rng, Shape shape, double sd = 1.0) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(sd * rng.normal());
  return t;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = state.range(0);
  Rng rng(1);
  const auto a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
  Tensor<float> c(Shape{n, n});
  for (auto _ : state) {
    kernels::gemm_acc(a.data.data(), b.data.data(), c.data.data(), n, n, n);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

void BM_Attention(benchmark::State& state) {
  const auto n = state.range(0);
  const std::int64_t d = 128;
  Rng rng(2);
  const auto q = random_tensor(rng, {n, d}), k = random_tensor(rng, {n, d}), v = random_tensor(rng, {n, d});
  for (auto _ : state) {
    Graph<float> g;
    g.set_grad_enabled(false);
    auto out = multi_head_attention(g.constant(q), g.constant(k), g.constant(v), 8, AttnMask{});
    benchmark::DoNotOptimize(out.value().data());
  }
}
BENCHMARK(BM_Attention)->Arg(50)->Arg(85)->Arg(256);

void BM_DeformSample(benchmark::State& state) {
  const auto levels = pyramid_shapes(64, 64);
  const std::int64_t nq = state.range(0), d = 128, heads = 8, points = 4;
  const auto tokens = static_cast<std::int64_t>(levels.back().start + levels.back().height * levels.back().width);
  Rng rng(3);
  const auto value = random_tensor(rng, {tokens, d});
  const auto offsets = random_tensor(rng, {nq, heads * 4 * points * 2});
  const auto weights = Tensor<float>::full(Shape{nq, heads * 4 * points}, 1.0f / (4 * points));
  Tensor<float> ref(Shape{nq, 4});
  for (auto& v : ref.data) v = static_cast<float>(rng.uniform(0.2, 0.6));
  for (auto _ : state) {
    Graph<float> g;
    g.set_grad_enabled(false);
    auto out = deform_sample(g.constant(value), std::span<const LevelShape>(levels), ref, g.constant(offsets),
                             g.constant(weights), static_cast<int>(heads), static_cast<int>(points));
    benchmark::DoNotOptimize(out.value().data());
  }
}
BENCHMARK(BM_DeformSample)->Arg(50)->Arg(85);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0)), m = 6;
  Rng rng(4);
  std::vector<double> cost(static_cast<std::size_t>(n * m));
  for (auto& c : cost) c = rng.uniform(0, 10);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost, n, m));
}
BENCHMARK(BM_Hungarian)->Arg(50)->Arg(900);

void BM_ModelForward(benchmark::State& state) {
  const auto vocab = text::Vocabulary::builtin();
  const GroundingModel<float> model(ModelConfig{}, Ablations{}, vocab.size(), 0);
  Rng rng(5);
  const auto image = random_tensor(rng, {64, 64, 3}, 0.3);
  const auto prompt = text::tokenize("red circle . blue square . green triangle .", vocab);
  const bool train = state.range(0) != 0;
  for (auto _ : state) {
    Graph<float> g;
    g.set_grad_enabled(train);
    const auto preds = model.forward(g, image, prompt);
    if (train) {
      GroundTruthSet gt;
      gt.boxes.push_back({0.5, 0.5, 0.25, 0.25});
      gt.spans.push_back({0, 1});
      const auto loss = total_loss<float>(preds.layers, gt, phrase_columns(preds.prompt), LossConfig{});
      benchmark::DoNotOptimize(g.backward(loss.total_var));
    } else {
      benchmark::DoNotOptimize(preds.final().boxes.value().data());
    }
  }
}
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1)->ArgNames({"backward"})->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gdino
BENCHMARK_MAIN();
