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

#ifndef GCNHASH_CONFIG_H_
#define GCNHASH_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gcnhash {

// Flat `key = value` configuration text. Blank lines and lines starting with
// '#' are ignored; later assignments override earlier ones. Typed getters
// throw ConfigError naming the key when a value does not parse.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig Parse(std::string_view text,
                              std::string_view source = "<string>");
  static KeyValueConfig FromFile(const std::filesystem::path& path);

  void Set(std::string key, std::string value);
  bool Has(std::string_view key) const;
  std::optional<std::string> Get(std::string_view key) const;

  std::string GetString(std::string_view key, std::string fallback) const;
  std::int64_t GetInt(std::string_view key, std::int64_t fallback) const;
  double GetDouble(std::string_view key, double fallback) const;
  bool GetBool(std::string_view key, bool fallback) const;
  // Comma-separated integers, e.g. "30,50,70".
  std::vector<std::int64_t> GetIntList(
      std::string_view key, std::vector<std::int64_t> fallback) const;

  // Throws ConfigError listing any key not in `allowed`.
  void RequireKnownKeys(std::span<const std::string_view> allowed) const;

  // Merges `other` on top of this config (other wins).
  void Merge(const KeyValueConfig& other);

  const std::map<std::string, std::string, std::less<>>& values() const {
    return values_;
  }

  // Canonical `key=value\n` rendering in key order.
  std::string ToString() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace gcnhash

#endif  // GCNHASH_CONFIG_H_
