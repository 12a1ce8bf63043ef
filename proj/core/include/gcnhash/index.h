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


#ifndef GCNHASH_INDEX_H_
#define GCNHASH_INDEX_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcnhash/gcn.h"
#include "gcnhash/graphcons.h"

namespace gcnhash {

// Bit i holds component i (+1 -> 1, -1 -> 0), packed little-endian into
// 64-bit words. Unused high bits of the last word are zero.
class BinaryCode {
 public:
  BinaryCode() = default;
  explicit BinaryCode(int bits);

  static BinaryCode FromSigns(std::span<const std::int8_t> signs);
  static BinaryCode FromValues(const RowVector& y);  // sign(0) = +1

  int bits() const { return bits_; }
  const std::vector<std::uint64_t>& words() const { return words_; }
  bool bit(int i) const;
  void set_bit(int i, bool value);
  std::vector<std::int8_t> ToSigns() const;

  friend bool operator==(const BinaryCode&, const BinaryCode&) = default;

 private:
  int bits_ = 0;
  std::vector<std::uint64_t> words_;
};

int Hamming(const BinaryCode& a, const BinaryCode& b);

struct IndexEntry {
  std::string graph_id;
  std::string wsi_id;
  GraphLabel label = GraphLabel::kExcluded;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

// Immutable after construction. Entries are kept sorted by graph_id.
class BinaryCodeIndex {
 public:
  BinaryCodeIndex() = default;
  BinaryCodeIndex(int bits, std::vector<IndexEntry> entries, std::vector<BinaryCode> codes);

  int bits() const { return bits_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  const std::vector<BinaryCode>& codes() const { return codes_; }
  std::size_t words_per_code() const { return words_per_code_; }
  const std::uint64_t* packed(std::size_t i) const {
    return packed_.data() + i * words_per_code_;
  }

  friend bool operator==(const BinaryCodeIndex& a, const BinaryCodeIndex& b) {
    return a.bits_ == b.bits_ && a.entries_ == b.entries_ && a.codes_ == b.codes_;
  }

 private:
  int bits_ = 0;
  std::vector<IndexEntry> entries_;
  std::vector<BinaryCode> codes_;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> packed_;
};

struct RankedEntry {
  std::string graph_id;
  int distance = 0;
  GraphLabel label = GraphLabel::kExcluded;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<RankedEntry> ranked;
};

// Encodes every non-excluded graph in inference mode.
BinaryCodeIndex BuildIndex(std::span<const TissueGraph> graphs, const GcnHashParams& params);

BinaryCode EncodeCode(const TissueGraph& graph, const GcnHashParams& params);

// Exact top-k by ascending distance, ties by ascending graph_id.
// k is clamped to the index size.
RetrievalResult Query(const BinaryCodeIndex& index, const BinaryCode& code, std::size_t k,
                      std::string query_id = {});

void SaveIndex(const BinaryCodeIndex& index, const std::filesystem::path& path);
BinaryCodeIndex LoadIndex(const std::filesystem::path& path);
std::string SerializeIndex(const BinaryCodeIndex& index);
BinaryCodeIndex DeserializeIndex(std::string_view bytes, std::string_view source);

// Exact-radius lookup by enumerating every code within `radius` flips of
// the query and probing a hash table keyed on the packed code.
class RadiusLookup {
 public:
  explicit RadiusLookup(const BinaryCodeIndex& index);

  // Same ordering as Query. Throws ConfigError for radius > 3.
  RetrievalResult Lookup(const BinaryCode& code, int radius) const;

 private:
  struct WordsHash {
    std::size_t operator()(const std::vector<std::uint64_t>& w) const;
  };

  const BinaryCodeIndex* index_;
  std::unordered_map<std::vector<std::uint64_t>, std::vector<std::uint32_t>, WordsHash>
      buckets_;
};

}  // namespace gcnhash

#endif  // GCNHASH_INDEX_H_
