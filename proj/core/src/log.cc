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

#include "gcnhash/log.h"

#include <atomic>
#include <iostream>
#include <mutex>

namespace gcnhash {
namespace {

std::atomic<bool> g_verbose{false};
std::mutex g_log_mutex;

}  // namespace

void SetVerbose(bool verbose) { g_verbose.store(verbose); }

bool Verbose() { return g_verbose.load(); }

void LogInfo(std::string_view message) {
  if (!Verbose()) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::clog << "info: " << message << '\n';
}

void LogWarning(std::string_view message) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::clog << "warning: " << message << '\n';
}

}  // namespace gcnhash
