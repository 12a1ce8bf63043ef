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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "gcnhash/binary_io.h"
#include "gcnhash/eval.h"
#include "support/expect.h"
#include "support/metric_fixtures.h"
#include "support/oracles.h"

namespace gcnhash {
namespace {

using testing::Row;
using testing::TableOf;
using testing::ThrowsWith;

std::vector<int> Ints(const Row& row) { return {row.begin(), row.end()}; }

Row RandomRow(std::mt19937_64& rng, std::size_t depth, double density) {
  std::bernoulli_distribution bit(density);
  Row row(depth);
  for (auto& r : row) r = bit(rng) ? 1 : 0;
  return row;
}

TEST(Precision, Fixtures) {
  for (const auto& f : testing::PrecisionFixtures()) {
    EXPECT_NEAR(PrecisionAtK(f.row, f.k), f.expected, 1e-12);
  }
}

TEST(Precision, RangeErrors) {
  const Row row{1, 0};
  EXPECT_THROW(PrecisionAtK(row, 0), ConfigError);
  EXPECT_THROW(PrecisionAtK(row, 3), ConfigError);
}

TEST(Precision, Properties) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const auto row = RandomRow(rng, 1 + rng() % 40, 0.4);
    for (std::size_t k = 1; k <= row.size(); ++k) {
      const double p = PrecisionAtK(row, k);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      const double scaled = p * static_cast<double>(k);
      EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
      EXPECT_DOUBLE_EQ(p, testing::OraclePrecision(Ints(row), k));
    }
  }
}

TEST(AveragePrecision, Fixtures) {
  for (const auto& f : testing::ApFixtures()) {
    EXPECT_NEAR(AveragePrecisionAtK(TableOf(f.rows), f.k), f.expected, 1e-12);
  }
  EXPECT_THROW(AveragePrecisionAtK(RelevanceTable{}, 1), DataError);
}

TEST(MeanAveragePrecision, Fixtures) {
  for (const auto& f : testing::MapFixtures()) {
    EXPECT_NEAR(MeanAveragePrecision(TableOf(f.rows)), f.expected, 1e-12);
  }
  EXPECT_TRUE(ThrowsWith<DataError>(
      [] { MeanAveragePrecision(TableOf({{0, 0}, {0, 0}})); }, "no query"));
  EXPECT_EQ(QueryAveragePrecision(Row{0, 0, 0}), -1.0);
}

TEST(MeanAveragePrecision, MatchesLiteralFormula) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 300; ++t) {
    std::vector<Row> rows;
    std::vector<std::vector<int>> ints;
    const std::size_t depth = 1 + rng() % 30;
    for (std::size_t q = 0; q < 1 + rng() % 8; ++q) {
      rows.push_back(RandomRow(rng, depth, 0.3));
      rows.back()[rng() % depth] = 1;
      ints.push_back(Ints(rows.back()));
    }
    EXPECT_NEAR(MeanAveragePrecision(TableOf(rows)), testing::OracleMap(ints), 1e-12);
  }
}

TEST(MeanAveragePrecision, QueryOrderInvariance) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<Row> rows;
    for (int q = 0; q < 6; ++q) {
      rows.push_back(RandomRow(rng, 12, 0.4));
      rows.back()[5] = 1;
    }
    const double base = MeanAveragePrecision(TableOf(rows));
    std::shuffle(rows.begin(), rows.end(), rng);
    EXPECT_NEAR(MeanAveragePrecision(TableOf(rows)), base, 1e-12);
  }
}

TEST(MeanAveragePrecision, PrependingRelevantNeverDecreases) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 300; ++t) {
    std::vector<Row> rows;
    for (int q = 0; q < 4; ++q) rows.push_back(RandomRow(rng, 10, 0.3));
    rows[0][9] = 1;
    const double before = MeanAveragePrecision(TableOf(rows));
    for (auto& row : rows) row.insert(row.begin(), 1);
    EXPECT_GE(MeanAveragePrecision(TableOf(rows)), before - 1e-15);
  }
}

TEST(PrCurve, Fixtures) {
  for (const auto& f : testing::PrFixtures()) {
    const auto curve = InterpolatedPrCurve(TableOf(f.rows));
    ASSERT_EQ(curve.size(), 21u);
    for (std::size_t g = 0; g < curve.size(); ++g) {
      EXPECT_NEAR(curve[g].recall, 0.05 * static_cast<double>(g), 1e-12);
      EXPECT_NEAR(curve[g].precision, f.expected[g], 1e-12) << "grid " << g;
    }
  }
  EXPECT_THROW(InterpolatedPrCurve(TableOf({{0, 0}})), DataError);
}

TEST(PrCurve, NonIncreasingAndBounded) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    std::vector<Row> rows;
    for (std::size_t q = 0; q < 1 + rng() % 5; ++q) {
      rows.push_back(RandomRow(rng, 1 + rng() % 25, 0.35));
    }
    rows[0][0] = 1;
    const auto curve = InterpolatedPrCurve(TableOf(rows));
    for (std::size_t g = 0; g < curve.size(); ++g) {
      EXPECT_GE(curve[g].precision, 0.0);
      EXPECT_LE(curve[g].precision, 1.0);
      if (g > 0) {
        EXPECT_LE(curve[g].precision, curve[g - 1].precision + 1e-15);
      }
    }
  }
}

TEST(Relevance, FromResults) {
  RetrievalResult a{"qa", {{"x", 0, GraphLabel::kCancerous}, {"y", 3, GraphLabel::kCancerFree}}};
  RetrievalResult b{"qb", {{"y", 1, GraphLabel::kCancerFree}, {"x", 2, GraphLabel::kCancerous}}};
  RetrievalResult c{"qc", {{"x", 1, GraphLabel::kCancerous}, {"y", 2, GraphLabel::kCancerFree}}};
  const std::vector<RetrievalResult> results{a, b, c};
  const std::vector<GraphLabel> labels{GraphLabel::kCancerous, GraphLabel::kCancerous,
                                       GraphLabel::kExcluded};
  const std::vector<GraphLabel> db{GraphLabel::kCancerous, GraphLabel::kCancerFree};
  const auto table = RelevanceFromResults(results, labels, db);
  ASSERT_EQ(table.r.size(), 2u);
  EXPECT_EQ(table.r[0], (Row{1, 0}));
  EXPECT_EQ(table.r[1], (Row{0, 1}));
  EXPECT_EQ(table.query_ids[1], "qb");
  EXPECT_EQ(table.depth(), 2u);
  EXPECT_THROW(RelevanceFromResults(results, db, db), DataError);
}

TEST(Relevance, BuildFromIndex) {
  std::mt19937_64 rng(6);
  ModelDims dims;
  dims.levels = 1;
  dims.steps = 1;
  dims.embed_dim = 4;
  dims.code_bits = 8;
  dims.feature_dim = 3;
  dims.max_nodes = 8;
  const auto params = GcnHashParams::Initialize(dims, 6);
  std::vector<TissueGraph> db, queries;
  for (int i = 0; i < 10; ++i) {
    db.push_back(testing::RandomGraph(rng, 4, 3,
                                      i % 2 ? GraphLabel::kCancerous : GraphLabel::kCancerFree,
                                      "d/" + std::to_string(i)));
  }
  for (int i = 0; i < 3; ++i) {
    queries.push_back(testing::RandomGraph(
        rng, 5, 3, i == 2 ? GraphLabel::kExcluded : GraphLabel::kCancerous,
        "q/" + std::to_string(i)));
  }
  const auto index = BuildIndex(db, params);
  const auto table = BuildRelevanceTable(index, queries, params);
  ASSERT_EQ(table.r.size(), 2u);
  EXPECT_EQ(table.depth(), 10u);
  for (const auto& row : table.r) {
    EXPECT_EQ(std::count(row.begin(), row.end(), 1), 5);
  }
}

TEST(Csv, Layout) {
  testing::TempDir dir;
  const std::vector<MetricsRow> rows{{30, 0.5, 2.0 / 3.0}, {50, 1.0, 0.25}};
  WriteMetricsCsv(rows, dir.path() / "m.csv");
  EXPECT_EQ(ReadFileBytes(dir.path() / "m.csv"),
            "n_bar,AP50,mAP\n30,0.5,0.6666666667\n50,1,0.25\n");
  const auto curve = InterpolatedPrCurve(TableOf({{1, 0, 1}}));
  WritePrCurveCsv(curve, dir.path() / "pr.csv");
  const std::string text = ReadFileBytes(dir.path() / "pr.csv");
  EXPECT_EQ(text.substr(0, 32), "recall,precision\n0,1\n0.05,1\n0.1,");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 22);
  EXPECT_NE(text.find("\n1,0.6666666667\n"), std::string::npos);
}

}  // namespace
}  // namespace gcnhash
