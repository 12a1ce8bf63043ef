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

#include "gcnhash/index.h"

#include <algorithm>
#include <bit>
#include <numeric>

#include "gcnhash/binary_io.h"
#include "gcnhash/error.h"
#include "gcnhash/seed.h"

namespace gcnhash {
namespace {

constexpr std::string_view kIndexMagic = "GHIX";
constexpr std::uint32_t kIndexVersion = 1;
constexpr int kMaxRadius = 3;

std::size_t WordsFor(int bits) { return (static_cast<std::size_t>(bits) + 63) / 64; }

std::string WsiOf(const std::string& graph_id) {
  const auto slash = graph_id.rfind('/');
  return slash == std::string::npos ? std::string() : graph_id.substr(0, slash);
}

int PackedHamming(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
  int d = 0;
  for (std::size_t w = 0; w < words; ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

}  // namespace

BinaryCode::BinaryCode(int bits) : bits_(bits), words_(WordsFor(bits), 0) {
  if (bits <= 0) throw ConfigError("binary code width must be positive");
}

BinaryCode BinaryCode::FromSigns(std::span<const std::int8_t> signs) {
  BinaryCode code(static_cast<int>(signs.size()));
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] != 1 && signs[i] != -1) {
      throw DataError("binary code: component " + std::to_string(i) + " is not +-1");
    }
    code.set_bit(static_cast<int>(i), signs[i] == 1);
  }
  return code;
}

BinaryCode BinaryCode::FromValues(const RowVector& y) {
  const auto signs = Binarize(y);
  return FromSigns(signs);
}

bool BinaryCode::bit(int i) const {
  return ((words_[static_cast<std::size_t>(i) / 64] >> (i % 64)) & 1u) != 0;
}

void BinaryCode::set_bit(int i, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  auto& word = words_[static_cast<std::size_t>(i) / 64];
  word = value ? (word | mask) : (word & ~mask);
}

std::vector<std::int8_t> BinaryCode::ToSigns() const {
  std::vector<std::int8_t> out(static_cast<std::size_t>(bits_));
  for (int i = 0; i < bits_; ++i) out[static_cast<std::size_t>(i)] = bit(i) ? 1 : -1;
  return out;
}

int Hamming(const BinaryCode& a, const BinaryCode& b) {
  if (a.bits() != b.bits()) {
    throw DataError("hamming: code widths differ (" + std::to_string(a.bits()) + " vs " +
                    std::to_string(b.bits()) + ")");
  }
  return PackedHamming(a.words().data(), b.words().data(), a.words().size());
}

BinaryCodeIndex::BinaryCodeIndex(int bits, std::vector<IndexEntry> entries,
                                 std::vector<BinaryCode> codes)
    : bits_(bits), words_per_code_(WordsFor(bits)) {
  if (bits <= 0) throw ConfigError("index: d_h must be positive");
  if (entries.size() != codes.size()) throw DataError("index: entry/code count mismatch");
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].graph_id < entries[b].graph_id;
  });
  entries_.reserve(entries.size());
  codes_.reserve(codes.size());
  packed_.reserve(entries.size() * words_per_code_);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (k > 0 && entries[i].graph_id == entries_.back().graph_id) {
      throw DataError("index: duplicate graph_id '" + entries[i].graph_id + "'");
    }
    if (codes[i].bits() != bits) {
      throw DataError("index: code for '" + entries[i].graph_id + "' has " +
                      std::to_string(codes[i].bits()) + " bits, expected " +
                      std::to_string(bits));
    }
    entries_.push_back(std::move(entries[i]));
    packed_.insert(packed_.end(), codes[i].words().begin(), codes[i].words().end());
    codes_.push_back(std::move(codes[i]));
  }
}

BinaryCode EncodeCode(const TissueGraph& graph, const GcnHashParams& params) {
  return BinaryCode::FromValues(EncodeGraph(graph, params));
}

BinaryCodeIndex BuildIndex(std::span<const TissueGraph> graphs, const GcnHashParams& params) {
  std::vector<IndexEntry> entries;
  std::vector<BinaryCode> codes;
  for (const auto& g : graphs) {
    if (g.label == GraphLabel::kExcluded) continue;
    if (g.node_features.cols() != params.dims.feature_dim) {
      throw DataError("index build: graph '" + g.graph_id + "' has d_f=" +
                      std::to_string(g.node_features.cols()) + ", checkpoint expects " +
                      std::to_string(params.dims.feature_dim));
    }
    entries.push_back({g.graph_id, g.wsi_id, g.label});
    codes.push_back(EncodeCode(g, params));
  }
  return BinaryCodeIndex(params.dims.code_bits, std::move(entries), std::move(codes));
}

RetrievalResult Query(const BinaryCodeIndex& index, const BinaryCode& code, std::size_t k,
                      std::string query_id) {
  if (index.empty()) throw DataError("query: index is empty");
  if (k == 0) throw ConfigError("query: k must be >= 1");
  if (code.bits() != index.bits()) {
    throw DataError("query: code has " + std::to_string(code.bits()) +
                    " bits, index holds " + std::to_string(index.bits()));
  }
  const std::size_t n = index.size();
  k = std::min(k, n);
  const std::size_t words = index.words_per_code();
  const std::uint64_t* q = code.words().data();

  // Counting sort on distance; entries are already in graph_id order.
  std::vector<std::uint16_t> distance(n);
  std::vector<std::size_t> bucket(static_cast<std::size_t>(index.bits()) + 2, 0);
  for (std::size_t i = 0; i < n; ++i) {
    distance[i] = static_cast<std::uint16_t>(PackedHamming(index.packed(i), q, words));
    ++bucket[distance[i] + 1u];
  }
  for (std::size_t b = 1; b < bucket.size(); ++b) bucket[b] += bucket[b - 1];
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[bucket[distance[i]]++] = static_cast<std::uint32_t>(i);

  RetrievalResult result;
  result.query_id = std::move(query_id);
  result.ranked.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto& e = index.entries()[order[r]];
    result.ranked.push_back({e.graph_id, distance[order[r]], e.label});
  }
  return result;
}

std::string SerializeIndex(const BinaryCodeIndex& index) {
  ByteWriter out;
  out.PutBytes(kIndexMagic);
  out.PutU32(kIndexVersion);
  out.PutU32(static_cast<std::uint32_t>(index.bits()));
  out.PutU64(index.size());
  const std::size_t bytes_per_code = (static_cast<std::size_t>(index.bits()) + 7) / 8;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& e = index.entries()[i];
    out.PutString(e.graph_id);
    out.PutU8(static_cast<std::uint8_t>(e.label));
    const std::uint64_t* words = index.packed(i);
    for (std::size_t b = 0; b < bytes_per_code; ++b) {
      out.PutU8(static_cast<std::uint8_t>(words[b / 8] >> (8 * (b % 8))));
    }
  }
  out.PutU32(Crc32(out.bytes()));
  return out.Release();
}

BinaryCodeIndex DeserializeIndex(std::string_view bytes, std::string_view source) {
  ByteReader header(bytes, std::string(source));
  if (header.GetBytes(4, "magic") != kIndexMagic) {
    throw DataError(std::string(source) + ": not an index file (bad magic)");
  }
  const auto version = header.GetU32("version");
  if (version != kIndexVersion) {
    throw DataError(std::string(source) + ": index version " + std::to_string(version) +
                    " is not supported (expected " + std::to_string(kIndexVersion) + ")");
  }
  if (bytes.size() < 24) throw DataError(std::string(source) + ": truncated index header");
  const auto body = bytes.substr(0, bytes.size() - 4);
  ByteReader crc_reader(bytes.substr(bytes.size() - 4), std::string(source));
  const auto stored_crc = crc_reader.GetU32("crc32");
  if (Crc32(body) != stored_crc) {
    throw DataError(std::string(source) + ": checksum mismatch (truncated or corrupt index)");
  }

  ByteReader in(body, std::string(source));
  in.GetBytes(4, "magic");
  in.GetU32("version");
  const auto bits = static_cast<int>(in.GetU32("d_h"));
  if (bits <= 0 || bits > 4096) throw DataError(std::string(source) + ": invalid d_h");
  const auto count = in.GetU64("entry count");
  const std::size_t bytes_per_code = (static_cast<std::size_t>(bits) + 7) / 8;
  std::vector<IndexEntry> entries;
  std::vector<BinaryCode> codes;
  for (std::uint64_t i = 0; i < count; ++i) {
    IndexEntry e;
    e.graph_id = in.GetString("graph_id");
    const auto label = in.GetU8("label");
    if (label > 1) {
      throw DataError(std::string(source) + ": entry " + std::to_string(i) +
                      " has invalid label " + std::to_string(label));
    }
    e.label = static_cast<GraphLabel>(label);
    e.wsi_id = WsiOf(e.graph_id);
    const auto packed = in.GetBytes(bytes_per_code, "code");
    BinaryCode code(bits);
    for (int b = 0; b < bits; ++b) {
      const auto byte = static_cast<std::uint8_t>(packed[static_cast<std::size_t>(b / 8)]);
      code.set_bit(b, ((byte >> (b % 8)) & 1u) != 0);
    }
    entries.push_back(std::move(e));
    codes.push_back(std::move(code));
  }
  if (in.remaining() != 0) throw DataError(std::string(source) + ": trailing bytes after index");
  return BinaryCodeIndex(bits, std::move(entries), std::move(codes));
}

void SaveIndex(const BinaryCodeIndex& index, const std::filesystem::path& path) {
  WriteFileBytes(path, SerializeIndex(index));
}

BinaryCodeIndex LoadIndex(const std::filesystem::path& path) {
  const auto bytes = ReadFileBytes(path);
  return DeserializeIndex(bytes, path.string());
}

std::size_t RadiusLookup::WordsHash::operator()(const std::vector<std::uint64_t>& w) const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (auto x : w) h = DeriveSeed(h ^ x, "bucket");
  return static_cast<std::size_t>(h);
}

RadiusLookup::RadiusLookup(const BinaryCodeIndex& index) : index_(&index) {
  for (std::size_t i = 0; i < index.size(); ++i) {
    buckets_[index.codes()[i].words()].push_back(static_cast<std::uint32_t>(i));
  }
}

RetrievalResult RadiusLookup::Lookup(const BinaryCode& code, int radius) const {
  if (radius < 0 || radius > kMaxRadius) {
    throw ConfigError("radius lookup: radius must be in [0, " + std::to_string(kMaxRadius) +
                      "]");
  }
  if (code.bits() != index_->bits()) throw DataError("radius lookup: code width mismatch");
  const int bits = code.bits();
  std::vector<std::pair<int, std::uint32_t>> hits;
  BinaryCode probe = code;
  auto visit = [&](int distance) {
    const auto it = buckets_.find(probe.words());
    if (it == buckets_.end()) return;
    for (auto i : it->second) hits.emplace_back(distance, i);
  };
  auto flip = [&](int b) { probe.set_bit(b, !probe.bit(b)); };
  visit(0);
  for (int a = 0; a < bits && radius >= 1; ++a) {
    flip(a);
    visit(1);
    for (int b = a + 1; b < bits && radius >= 2; ++b) {
      flip(b);
      visit(2);
      for (int c = b + 1; c < bits && radius >= 3; ++c) {
        flip(c);
        visit(3);
        flip(c);
      }
      flip(b);
    }
    flip(a);
  }
  std::sort(hits.begin(), hits.end());
  RetrievalResult result;
  for (const auto& [d, i] : hits) {
    const auto& e = index_->entries()[i];
    result.ranked.push_back({e.graph_id, d, e.label});
  }
  return result;
}

}  // namespace gcnhash
