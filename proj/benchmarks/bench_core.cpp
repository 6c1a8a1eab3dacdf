/* Copyright 2026 The oodlr Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <vector>

#include <benchmark/benchmark.h>

#include "oodlr/lof.hpp"
#include "oodlr/metrics.hpp"
#include "oodlr/models.hpp"
#include "oodlr/noising.hpp"

namespace {

using namespace oodlr;

Eigen::MatrixXd Cloud(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, dim);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < dim; ++c) m(r, c) = rng.Normal();
  return m;
}

void BM_LofIndex(benchmark::State& state) {
  const auto pts = Cloud(static_cast<int>(state.range(0)), 64, 1);
  for (auto _ : state) benchmark::DoNotOptimize(NeighborIndex(pts, 20).TrainingScores());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LofIndex)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_LofQuery(benchmark::State& state) {
  const NeighborIndex index(Cloud(2000, 64, 2), 20);
  const auto queries = Cloud(static_cast<int>(state.range(0)), 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(index.ScoreBatch(queries, 1));
}
BENCHMARK(BM_LofQuery)->Arg(100)->Arg(400);

void BM_Auroc(benchmark::State& state) {
  Rng rng(4);
  ScoredSet s;
  for (int i = 0; i < state.range(0); ++i) {
    s.eta.push_back(rng.Normal());
    s.is_ood.push_back(rng.Bernoulli(0.3));
  }
  for (auto _ : state) benchmark::DoNotOptimize(Auroc(s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();

std::vector<std::vector<int>> Sentences(int count, int vocab, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < count; ++i) {
    std::vector<int> s{Vocabulary::kBos};
    const int len = 4 + static_cast<int>(rng.Index(12));
    for (int t = 0; t < len; ++t)
      s.push_back(Vocabulary::kNumReserved + static_cast<int>(rng.Index(static_cast<std::uint64_t>(vocab - Vocabulary::kNumReserved))));
    s.push_back(Vocabulary::kEos);
    out.push_back(s);
  }
  return out;
}

void BM_LanguageModelScore(benchmark::State& state) {
  Rng rng(5);
  const int hidden = static_cast<int>(state.range(0));
  LanguageModel lm({2000, 0}, {100, hidden, 0.1}, rng);
  const auto batch = Sentences(64, 2000, 6);
  for (auto _ : state) benchmark::DoNotOptimize(lm.LogLikelihoods(batch));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_LanguageModelScore)->Arg(64)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_LanguageModelTrainStep(benchmark::State& state) {
  Rng rng(7);
  LanguageModel lm({2000, 0}, {100, 300, 0.1}, rng);
  const auto batch = nn::MakeBatch(Sentences(32, 2000, 8));
  for (auto _ : state) {
    lm.params().ZeroGrad();
    benchmark::DoNotOptimize(lm.Loss(batch, true));
    nn::AdamStep(lm.params(), {});
  }
}
BENCHMARK(BM_LanguageModelTrainStep)->Unit(benchmark::kMillisecond);

void BM_NoiseSample(benchmark::State& state) {
  Vocabulary v;
  for (int i = 0; i < 5000; ++i) v.Add("w" + std::to_string(i), 1 + static_cast<std::size_t>(i % 97));
  const auto dist = NoiseDistribution::Build(v, NoiseKind::kUniroot);
  Rng rng(9);
  for (auto _ : state) benchmark::DoNotOptimize(dist.Sample(rng));
}
BENCHMARK(BM_NoiseSample);

}  // namespace

BENCHMARK_MAIN();
