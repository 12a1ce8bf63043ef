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

#ifndef GCNHASH_GRAPHCONS_H_
#define GCNHASH_GRAPHCONS_H_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcnhash/ingest.h"

namespace gcnhash {

enum class GraphLabel : std::uint8_t {
  kCancerFree = 0,
  kCancerous = 1,
  kExcluded = 2,
};

std::string_view GraphLabelName(GraphLabel label);

// Cancerous iff fraction > 0.10, cancer-free iff fraction == 0, otherwise
// excluded from training and evaluation.
GraphLabel LabelForTumorFraction(double tumor_fraction);

// One connected tissue region, re-indexed 0..n-1.
struct TissueGraph {
  std::string graph_id;
  std::string wsi_id;
  Eigen::MatrixXd node_features;  // n x d_f
  PatchAdjacency adjacency;
  std::vector<std::uint32_t> member_patch_ids;
  GraphLabel label = GraphLabel::kExcluded;
  double tumor_fraction = 0.0;

  std::size_t size() const { return member_patch_ids.size(); }
};

struct MergeRecord {
  // Clusters are identified by their smallest member patch index; after the
  // merge the union keeps cluster_a's id.
  std::uint32_t cluster_a = 0;
  std::uint32_t cluster_b = 0;
  double cost = 0.0;
};

struct Partition {
  // Each cluster is sorted ascending; clusters are ordered by first member.
  std::vector<std::vector<std::uint32_t>> clusters;
  std::vector<MergeRecord> merge_log;
};

enum class MergeCriterion {
  kUnionEes,      // EES(Ci u Cj)
  kWardIncrease,  // EES(Ci u Cj) - EES(Ci) - EES(Cj)
};

enum class HacStrategy {
  kNaive,  // rescans every adjacent cluster pair per merge
  kLazy,   // priority queue; recomputes only pairs touching the merged cluster
};

struct HacOptions {
  MergeCriterion criterion = MergeCriterion::kUnionEes;
  HacStrategy strategy = HacStrategy::kLazy;
};

// Error sum of squares: sum_i ||x_i - mean||^2 over the rows.
double Ees(const Eigen::MatrixXd& rows);

// EES of the selected rows of `features`, accumulated in the order given.
// Callers pass sorted row lists so every code path sums identically.
double EesOfRows(const Eigen::MatrixXd& features,
                 std::span<const std::uint32_t> rows);

// max(1, round_half_up(m_s / n_bar)).
std::size_t TargetGraphCount(std::size_t m_s, std::size_t n_bar);

// Adjacency-constrained agglomerative clustering. Merges the cheapest pair of
// spatially adjacent clusters until `target` clusters remain or no adjacent
// pair is left. Ties go to the lexicographically smallest (cluster_a,
// cluster_b) pair.
Partition HacPartition(const PatchGrid& grid, const PatchAdjacency& adjacency,
                       std::size_t target, const HacOptions& options = {});

std::vector<TissueGraph> ExtractGraphs(const PatchGrid& grid,
                                       const PatchAdjacency& adjacency,
                                       const Partition& partition);

// Adjacency, partition at TargetGraphCount(m_s, n_bar), extraction.
std::vector<TissueGraph> BuildTissueGraphs(const PatchGrid& grid,
                                           std::size_t n_bar,
                                           const HacOptions& options = {});

// Per-slide graph container ("TGC1").
void SaveGraphFile(const std::filesystem::path& path, std::string_view wsi_id,
                   std::span<const TissueGraph> graphs);
std::vector<TissueGraph> LoadGraphFile(const std::filesystem::path& path);

// Loads every *.tgc file in `dir` (sorted by file name).
std::vector<TissueGraph> LoadGraphDir(const std::filesystem::path& dir);

}  // namespace gcnhash

#endif  // GCNHASH_GRAPHCONS_H_
