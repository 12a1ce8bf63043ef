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

#ifndef GCNHASH_SEED_H_
#define GCNHASH_SEED_H_

#include <cstdint>
#include <string_view>

namespace gcnhash {

// Derives an independent stream seed from a root seed and a stage label, e.g.
// DeriveSeed(root, "ingest/db/3"). Stable across runs and platforms.
std::uint64_t DeriveSeed(std::uint64_t root, std::string_view label);

// 64-bit FNV-1a over raw bytes.
std::uint64_t Fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace gcnhash

#endif  // GCNHASH_SEED_H_
