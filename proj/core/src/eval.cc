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

#include "gcnhash/eval.h"

#include <algorithm>
#include <cstdio>

#include "gcnhash/binary_io.h"
#include "gcnhash/error.h"
#include "gcnhash/log.h"

namespace gcnhash {
namespace {

std::size_t RelevantCount(std::span<const std::uint8_t> row) {
  return static_cast<std::size_t>(std::count(row.begin(), row.end(), std::uint8_t{1}));
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

RelevanceTable RelevanceFromResults(std::span<const RetrievalResult> results,
                                    std::span<const GraphLabel> query_labels,
                                    std::span<const GraphLabel> db_labels) {
  if (results.size() != query_labels.size()) {
    throw DataError("relevance: result/label count mismatch");
  }
  RelevanceTable table;
  table.db_labels.assign(db_labels.begin(), db_labels.end());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (query_labels[i] == GraphLabel::kExcluded) continue;
    if (i > 0 && results[i].ranked.size() != results[0].ranked.size()) {
      throw DataError("relevance: rankings have different depths");
    }
    std::vector<std::uint8_t> row;
    row.reserve(results[i].ranked.size());
    for (const auto& e : results[i].ranked) {
      row.push_back(e.label == query_labels[i] ? 1 : 0);
    }
    table.query_ids.push_back(results[i].query_id);
    table.query_labels.push_back(query_labels[i]);
    table.r.push_back(std::move(row));
  }
  return table;
}

RelevanceTable BuildRelevanceTable(const BinaryCodeIndex& index,
                                   std::span<const TissueGraph> queries,
                                   const GcnHashParams& params) {
  std::vector<RetrievalResult> results;
  std::vector<GraphLabel> labels;
  for (const auto& q : queries) {
    if (q.label == GraphLabel::kExcluded) continue;
    results.push_back(Query(index, EncodeCode(q, params), index.size(), q.graph_id));
    labels.push_back(q.label);
  }
  std::vector<GraphLabel> db_labels;
  for (const auto& e : index.entries()) db_labels.push_back(e.label);
  return RelevanceFromResults(results, labels, db_labels);
}

double PrecisionAtK(std::span<const std::uint8_t> row, std::size_t k) {
  if (k == 0 || k > row.size()) {
    throw ConfigError("precision@k: k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(row.size()) + "]");
  }
  return static_cast<double>(RelevantCount(row.first(k))) / static_cast<double>(k);
}

double AveragePrecisionAtK(const RelevanceTable& table, std::size_t k) {
  if (table.r.empty()) throw DataError("AP@k: empty query set");
  double sum = 0.0;
  for (const auto& row : table.r) sum += PrecisionAtK(row, k);
  return sum / static_cast<double>(table.r.size());
}

double QueryAveragePrecision(std::span<const std::uint8_t> row) {
  double numerator = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] == 0) continue;
    ++hits;
    numerator += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) return -1.0;
  return numerator / static_cast<double>(hits);
}

double MeanAveragePrecision(const RelevanceTable& table) {
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < table.r.size(); ++i) {
    const double ap = QueryAveragePrecision(table.r[i]);
    if (ap < 0.0) {
      LogWarning("mAP: query '" + (i < table.query_ids.size() ? table.query_ids[i] : "") +
                 "' has no relevant database item; skipped");
      continue;
    }
    sum += ap;
    ++used;
  }
  if (used == 0) throw DataError("mAP: no query has a relevant database item");
  return sum / static_cast<double>(used);
}

std::vector<PrPoint> InterpolatedPrCurve(const RelevanceTable& table) {
  std::vector<double> total(kPrGridSteps + 1, 0.0);
  std::size_t used = 0;
  for (const auto& row : table.r) {
    const std::size_t relevant = RelevantCount(row);
    if (relevant == 0) continue;
    ++used;
    // best[g] = max precision over ranks whose recall reaches grid point g.
    std::vector<double> best(kPrGridSteps + 1, 0.0);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      hits += row[k];
      const double precision = static_cast<double>(hits) / static_cast<double>(k + 1);
      for (int g = 0; g <= kPrGridSteps; ++g) {
        if (hits * kPrGridSteps >= static_cast<std::size_t>(g) * relevant) {
          best[static_cast<std::size_t>(g)] =
              std::max(best[static_cast<std::size_t>(g)], precision);
        }
      }
    }
    for (int g = 0; g <= kPrGridSteps; ++g) {
      total[static_cast<std::size_t>(g)] += best[static_cast<std::size_t>(g)];
    }
  }
  if (used == 0) throw DataError("PR curve: no query has a relevant database item");
  std::vector<PrPoint> curve;
  for (int g = 0; g <= kPrGridSteps; ++g) {
    curve.push_back({g / static_cast<double>(kPrGridSteps),
                     total[static_cast<std::size_t>(g)] / static_cast<double>(used)});
  }
  return curve;
}

void WriteMetricsCsv(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
  std::string text = "n_bar,AP50,mAP\n";
  for (const auto& row : rows) {
    text += std::to_string(row.n_bar) + "," + FormatDouble(row.ap_at_k) + "," +
            FormatDouble(row.map) + "\n";
  }
  WriteFileBytes(path, text);
}

void WritePrCurveCsv(std::span<const PrPoint> points, const std::filesystem::path& path) {
  std::string text = "recall,precision\n";
  for (const auto& p : points) {
    text += FormatDouble(p.recall) + "," + FormatDouble(p.precision) + "\n";
  }
  WriteFileBytes(path, text);
}

}  // namespace gcnhash
