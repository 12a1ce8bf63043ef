/*
 * Copyright 2026 The gcnhash Authors.
 *
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

#include <benchmark/benchmark.h>

#include "gcnhash/gcn.h"
#include "gcnhash/ingest.h"
#include "gcnhash/train.h"

namespace gcnhash {
namespace {

std::vector<TissueGraph> SyntheticGraphs(std::size_t n_bar) {
  SyntheticSpec spec;
  spec.rows = 24;
  spec.cols = 24;
  return BuildTissueGraphs(GenerateSyntheticWsi(spec, 7), n_bar);
}

ModelDims Dims(int feature_dim) {
  ModelDims dims;
  dims.feature_dim = feature_dim;
  return dims;
}

void BM_EncodeGraph(benchmark::State& state) {
  const auto graphs = SyntheticGraphs(static_cast<std::size_t>(state.range(0)));
  const auto params = GcnHashParams::Initialize(Dims(16), 1);
  std::size_t i = 0;
  for (auto _ : state) {
    auto y = EncodeGraph(graphs[i++ % graphs.size()], params);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_EncodeGraph)->Arg(20)->Arg(50)->Arg(70)->Unit(benchmark::kMicrosecond);

void BM_LossGradients(benchmark::State& state) {
  const auto graphs = SyntheticGraphs(50);
  const auto params = GcnHashParams::Initialize(Dims(16), 2);
  std::vector<const TissueGraph*> batch;
  for (const auto& g : graphs) batch.push_back(&g);
  TrainConfig config;
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    auto grads = LossGradients(batch, params, config, &rng);
    benchmark::DoNotOptimize(grads);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_LossGradients)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gcnhash

BENCHMARK_MAIN();
