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

#ifndef GCNHASH_LOG_H_
#define GCNHASH_LOG_H_

#include <string_view>

namespace gcnhash {

// Minimal stderr logging. Warnings are always printed; info lines only when
// verbose output has been enabled.
void SetVerbose(bool verbose);
bool Verbose();

void LogInfo(std::string_view message);
void LogWarning(std::string_view message);

}  // namespace gcnhash

#endif  // GCNHASH_LOG_H_
