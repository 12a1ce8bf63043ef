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

#include "gcnhash/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gcnhash/error.h"

namespace gcnhash {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::int64_t ParseInt(std::string_view key, std::string_view text) {
  text = Trim(text);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("key '" + std::string(key) + "': expected integer, got '" +
                      std::string(text) + "'");
  }
  return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::Parse(std::string_view text,
                                     std::string_view source) {
  KeyValueConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    line = Trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    const auto key = Trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                        ": empty key");
    }
    config.Set(std::string(key), std::string(Trim(line.substr(eq + 1))));
  }
  return config;
}

KeyValueConfig KeyValueConfig::FromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str(), path.string());
}

void KeyValueConfig::Set(std::string key, std::string value) {
  values_[std::move(key)] = std::move(value);
}

bool KeyValueConfig::Has(std::string_view key) const {
  return values_.find(key) != values_.end();
}

std::optional<std::string> KeyValueConfig::Get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::GetString(std::string_view key,
                                      std::string fallback) const {
  auto value = Get(key);
  return value ? *value : std::move(fallback);
}

std::int64_t KeyValueConfig::GetInt(std::string_view key,
                                    std::int64_t fallback) const {
  const auto value = Get(key);
  return value ? ParseInt(key, *value) : fallback;
}

double KeyValueConfig::GetDouble(std::string_view key, double fallback) const {
  const auto value = Get(key);
  if (!value) return fallback;
  // std::from_chars for double is not available in every libstdc++ we target.
  std::istringstream in(*value);
  in.imbue(std::locale::classic());
  double parsed = 0.0;
  in >> parsed;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw ConfigError("key '" + std::string(key) + "': expected number, got '" +
                      *value + "'");
  }
  return parsed;
}

bool KeyValueConfig::GetBool(std::string_view key, bool fallback) const {
  const auto value = Get(key);
  if (!value) return fallback;
  std::string lower = *value;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "1" || lower == "true" || lower == "yes" || lower == "on") return true;
  if (lower == "0" || lower == "false" || lower == "no" || lower == "off") return false;
  throw ConfigError("key '" + std::string(key) + "': expected boolean, got '" +
                    *value + "'");
}

std::vector<std::int64_t> KeyValueConfig::GetIntList(
    std::string_view key, std::vector<std::int64_t> fallback) const {
  const auto value = Get(key);
  if (!value) return fallback;
  std::vector<std::int64_t> out;
  std::string_view rest = *value;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(ParseInt(key, rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

void KeyValueConfig::RequireKnownKeys(
    std::span<const std::string_view> allowed) const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

void KeyValueConfig::Merge(const KeyValueConfig& other) {
  for (const auto& [key, value] : other.values_) values_[key] = value;
}

std::string KeyValueConfig::ToString() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

}  // namespace gcnhash
