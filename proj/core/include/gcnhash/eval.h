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


#ifndef GCNHASH_EVAL_H_
#define GCNHASH_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gcnhash/gcn.h"
#include "gcnhash/graphcons.h"
#include "gcnhash/index.h"

namespace gcnhash {

// r[i][k] = 1 iff query i's label equals the label of its k-th ranked
// database entry.
struct RelevanceTable {
  std::vector<std::string> query_ids;
  std::vector<GraphLabel> query_labels;
  std::vector<GraphLabel> db_labels;
  std::vector<std::vector<std::uint8_t>> r;

  std::size_t depth() const { return r.empty() ? 0 : r.front().size(); }
};

RelevanceTable RelevanceFromResults(std::span<const RetrievalResult> results,
                                    std::span<const GraphLabel> query_labels,
                                    std::span<const GraphLabel> db_labels);

// Queries the index with every non-excluded graph at full depth.
RelevanceTable BuildRelevanceTable(const BinaryCodeIndex& index,
                                   std::span<const TissueGraph> queries,
                                   const GcnHashParams& params);

double PrecisionAtK(std::span<const std::uint8_t> row, std::size_t k);
double AveragePrecisionAtK(const RelevanceTable& table, std::size_t k);

// Per-query sum_k p(k) r_k / sum_k r_k. Returns -1 when the row has no
// relevant item.
double QueryAveragePrecision(std::span<const std::uint8_t> row);

// Queries without a relevant item are skipped with a warning.
double MeanAveragePrecision(const RelevanceTable& table);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

inline constexpr int kPrGridSteps = 20;

// Interpolated precision on the recall grid {0, 0.05, ..., 1}, averaged over
// queries that have at least one relevant item.
std::vector<PrPoint> InterpolatedPrCurve(const RelevanceTable& table);

struct MetricsRow {
  std::size_t n_bar = 0;
  double ap_at_k = 0.0;
  double map = 0.0;
};

void WriteMetricsCsv(std::span<const MetricsRow> rows, const std::filesystem::path& path);
void WritePrCurveCsv(std::span<const PrPoint> points, const std::filesystem::path& path);

}  // namespace gcnhash

#endif  // GCNHASH_EVAL_H_
