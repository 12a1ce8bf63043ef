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

#include <random>

#include "gcnhash/index.h"

namespace gcnhash {
namespace {

BinaryCode RandomCode(std::mt19937_64& rng, int bits) {
  BinaryCode code(bits);
  for (int i = 0; i < bits; ++i) code.set_bit(i, rng() & 1u);
  return code;
}

BinaryCodeIndex RandomIndex(std::size_t n, int bits) {
  std::mt19937_64 rng(n);
  std::vector<IndexEntry> entries;
  std::vector<BinaryCode> codes;
  for (std::size_t i = 0; i < n; ++i) {
    entries.push_back({"w/g" + std::to_string(i), "w", GraphLabel::kCancerous});
    codes.push_back(RandomCode(rng, bits));
  }
  return BinaryCodeIndex(bits, std::move(entries), std::move(codes));
}

void BM_QueryScan(benchmark::State& state) {
  const auto index = RandomIndex(static_cast<std::size_t>(state.range(0)), 48);
  std::mt19937_64 rng(1);
  for (auto _ : state) {
    auto result = Query(index, RandomCode(rng, 48), 50);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_QueryScan)->Arg(1000)->Arg(10000)->Arg(50000)->Unit(benchmark::kMicrosecond);

void BM_RadiusLookup(benchmark::State& state) {
  const auto index = RandomIndex(50000, 48);
  const RadiusLookup lookup(index);
  std::mt19937_64 rng(2);
  for (auto _ : state) {
    auto result = lookup.Lookup(index.codes()[rng() % index.size()],
                                static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_RadiusLookup)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_Hamming(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto a = RandomCode(rng, 48);
  const auto b = RandomCode(rng, 48);
  for (auto _ : state) benchmark::DoNotOptimize(Hamming(a, b));
}
BENCHMARK(BM_Hamming);

void BM_SerializeIndex(benchmark::State& state) {
  const auto index = RandomIndex(50000, 48);
  for (auto _ : state) {
    auto bytes = SerializeIndex(index);
    benchmark::DoNotOptimize(bytes);
  }
}
BENCHMARK(BM_SerializeIndex)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gcnhash

BENCHMARK_MAIN();
