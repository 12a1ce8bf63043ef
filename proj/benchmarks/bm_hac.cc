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

#include "gcnhash/graphcons.h"
#include "gcnhash/ingest.h"

namespace gcnhash {
namespace {

void BM_HacPartition(benchmark::State& state) {
  SyntheticSpec spec;
  spec.rows = static_cast<std::uint32_t>(state.range(0));
  spec.cols = spec.rows;
  const auto grid = GenerateSyntheticWsi(spec, 11);
  const auto adjacency = ComputePatchAdjacency(grid);
  HacOptions options;
  options.strategy = state.range(1) ? HacStrategy::kLazy : HacStrategy::kNaive;
  const auto target = TargetGraphCount(grid.size(), 50);
  for (auto _ : state) {
    auto partition = HacPartition(grid, adjacency, target, options);
    benchmark::DoNotOptimize(partition);
  }
}
BENCHMARK(BM_HacPartition)
    ->ArgNames({"side", "lazy"})
    ->Args({16, 0})
    ->Args({16, 1})
    ->Args({32, 0})
    ->Args({32, 1})
    ->Args({64, 1})
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gcnhash

BENCHMARK_MAIN();
