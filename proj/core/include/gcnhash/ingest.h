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

#ifndef GCNHASH_INGEST_H_
#define GCNHASH_INGEST_H_

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gcnhash/config.h"

namespace gcnhash {

// Index of a patch (sliding-window position) on the slide lattice.
struct GridPos {
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

// Tissue patches of one whole-slide image. Background patches are not stored,
// so features.rows() == number of tissue patches.
struct PatchGrid {
  std::string wsi_id;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  Eigen::MatrixXd features;  // one row per patch
  std::vector<GridPos> grid_pos;
  std::vector<double> tumor_ratio;

  std::size_t size() const { return grid_pos.size(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  // Throws DataError on any broken invariant (bounds, duplicates, ratio
  // range, non-finite features, inconsistent lengths).
  void Validate() const;
};

// Undirected 4-neighbour relation between patches of one grid. Pairs are
// stored once with first < second, sorted lexicographically.
struct PatchAdjacency {
  std::size_t n = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;

  std::vector<std::vector<std::uint32_t>> NeighborLists() const;
  Eigen::MatrixXd Dense() const;
};

// Parameters for a synthetic slide. Tumour blobs are axis-aligned rectangles
// whose core patches have ratio 1 and whose one-patch ring has fractional
// ratio (0.5 on edges, 0.25 on corners). Features are drawn around a
// per-class mean shared by every slide generated with the same mean_seed.
struct SyntheticSpec {
  std::uint32_t rows = 16;
  std::uint32_t cols = 16;
  std::uint32_t feature_dim = 16;
  std::uint32_t blobs = 1;
  std::uint32_t blob_min = 3;
  std::uint32_t blob_max = 6;
  double separation = 6.0;  // distance between class means
  double sigma = 1.0;       // per-dimension noise scale
  double background = 0.0;  // probability a non-tumour patch is background
  std::uint64_t mean_seed = 0;

  void Validate() const;
  static SyntheticSpec FromConfig(const KeyValueConfig& config);
  KeyValueConfig ToConfig() const;
};

// Class means used by GenerateSyntheticWsi: (normal, tumour).
std::pair<Eigen::VectorXd, Eigen::VectorXd> SyntheticClassMeans(
    const SyntheticSpec& spec);

PatchGrid GenerateSyntheticWsi(const SyntheticSpec& spec, std::uint64_t seed,
                               std::string wsi_id = "synthetic");

PatchAdjacency ComputePatchAdjacency(const PatchGrid& grid);

// Feature file ("PGF1"). Features are stored as f32.
PatchGrid LoadPatchGrid(const std::filesystem::path& path);
void SavePatchGrid(const PatchGrid& grid, const std::filesystem::path& path);

// Sidecar manifest (manifest.txt) mapping feature files to slide ids.
struct ManifestEntry {
  std::string file;
  std::string wsi_id;
};

inline constexpr const char* kManifestName = "manifest.txt";

void WriteFeatureManifest(const std::filesystem::path& dir,
                          const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> ReadFeatureManifest(const std::filesystem::path& dir);

// Loads every grid listed in dir/manifest.txt, in manifest order.
std::vector<PatchGrid> LoadFeatureDir(const std::filesystem::path& dir);

}  // namespace gcnhash

#endif  // GCNHASH_INGEST_H_
