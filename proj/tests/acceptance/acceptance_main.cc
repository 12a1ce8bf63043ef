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

// Acceptance runner: prints one "AC<n> PASS|FAIL" line per criterion and
// exits non-zero if any criterion fails.

#include <CLI11.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "gcnhash/binary_io.h"
#include "gcnhash/pipeline.h"
#include "support/metric_fixtures.h"
#include "support/oracles.h"

namespace gcnhash {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Outcome GradientCheck() {
  ModelDims dims;
  dims.levels = 2;
  dims.steps = 2;
  dims.embed_dim = 8;
  dims.code_bits = 4;
  dims.feature_dim = 5;
  dims.max_nodes = 10;
  double worst = 0.0;
  std::size_t min_coords = SIZE_MAX, skipped = 0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    const auto params = GcnHashParams::Initialize(dims, 2000 + trial);
    std::vector<TissueGraph> graphs;
    std::uniform_int_distribution<std::size_t> size(3, 10);
    for (int i = 0; i < 4; ++i) {
      graphs.push_back(testing::RandomGraph(
          rng, size(rng), dims.feature_dim,
          i % 2 ? GraphLabel::kCancerous : GraphLabel::kCancerFree, "g" + std::to_string(i)));
    }
    std::vector<const TissueGraph*> batch;
    for (const auto& g : graphs) batch.push_back(&g);
    const auto report = FiniteDiffCheck(params, batch, 0.005, 1e-5, 200, trial);
    worst = std::max(worst, report.max_relative_error);
    skipped += report.skipped;
    // Classes smaller than 200 coordinates are checked exhaustively.
    std::map<TensorClass, std::size_t> available;
    params.ForEachTensor([&](const std::string&, TensorClass c, std::span<const double> v) {
      available[c] += v.size();
    });
    for (const auto& [cls, n] : report.coordinates) {
      const std::size_t want = std::min<std::size_t>(200, available[cls] - report.skipped);
      if (n < want) return {false, "too few coordinates checked"};
      min_coords = std::min(min_coords, n);
    }
  }
  return {worst < 1e-3, Format("max_rel_err=%.3e (bound 1e-3) over 5 batches, min_coords_per_class=%zu "
                               "skipped_kinks=%zu",
                               worst, min_coords, skipped)};
}

Outcome HacOracle() {
  std::mt19937_64 rng(77);
  int agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto grid = testing::RandomGrid(rng, 8, 1 + trial % 3, trial % 2 == 0);
    const auto target = 1 + static_cast<std::size_t>(rng() % grid.size());
    const auto ours = HacPartition(grid, ComputePatchAdjacency(grid), target);
    if (ours.clusters == testing::OracleHac(grid, target).clusters) ++agree;
  }
  return {agree == 100, Format("agreement=%d/100", agree)};
}

Outcome HammingRanking() {
  std::mt19937_64 rng(99);
  std::vector<IndexEntry> entries;
  std::vector<BinaryCode> codes;
  std::vector<std::vector<double>> floats;
  std::vector<std::string> ids;
  auto random_code = [&] {
    BinaryCode c(48);
    for (int b = 0; b < 48; ++b) c.set_bit(b, rng() & 1u);
    return c;
  };
  auto as_floats = [](const BinaryCode& c) {
    std::vector<double> v;
    for (auto s : c.ToSigns()) v.push_back(s);
    return v;
  };
  for (int i = 0; i < 1000; ++i) {
    const std::string id = Format("w/g%04d", i);
    entries.push_back({id, "w", GraphLabel::kCancerous});
    codes.push_back(random_code());
    floats.push_back(as_floats(codes.back()));
    ids.push_back(id);
  }
  const BinaryCodeIndex index(48, entries, codes);
  int exact = 0;
  for (int q = 0; q < 50; ++q) {
    const auto code = random_code();
    const auto expected = testing::OracleEuclideanRanking(floats, ids, as_floats(code));
    const auto got = Query(index, code, index.size());
    bool same = got.ranked.size() == expected.size();
    for (std::size_t i = 0; same && i < expected.size(); ++i) {
      same = got.ranked[i].graph_id == expected[i];
    }
    exact += same;
  }
  return {exact == 50, Format("identical_rankings=%d/50", exact)};
}

Outcome MetricFixtures() {
  int checked = 0, bad = 0;
  auto check = [&](double got, double want) {
    ++checked;
    if (!(std::abs(got - want) <= 1e-12)) ++bad;
  };
  for (const auto& f : testing::PrecisionFixtures()) check(PrecisionAtK(f.row, f.k), f.expected);
  for (const auto& f : testing::ApFixtures()) {
    check(AveragePrecisionAtK(testing::TableOf(f.rows), f.k), f.expected);
  }
  for (const auto& f : testing::MapFixtures()) {
    check(MeanAveragePrecision(testing::TableOf(f.rows)), f.expected);
  }
  for (const auto& f : testing::PrFixtures()) {
    const auto curve = InterpolatedPrCurve(testing::TableOf(f.rows));
    for (std::size_t g = 0; g < curve.size(); ++g) check(curve[g].precision, f.expected[g]);
  }
  return {bad == 0 && testing::PrecisionFixtures().size() >= 5 &&
              testing::ApFixtures().size() >= 5 && testing::MapFixtures().size() >= 5 &&
              testing::PrFixtures().size() >= 5,
          Format("fixtures p=%zu AP=%zu mAP=%zu PR=%zu values=%d mismatches=%d (tol 1e-12)",
                 testing::PrecisionFixtures().size(), testing::ApFixtures().size(),
                 testing::MapFixtures().size(), testing::PrFixtures().size(), checked, bad)};
}

Outcome PermutationInvariance() {
  ModelDims dims;
  dims.feature_dim = 8;
  dims.max_nodes = 64;
  const auto params = GcnHashParams::Initialize(dims, 5);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> size(2, 60);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto g = testing::RandomGraph(rng, size(rng), 8, GraphLabel::kCancerous, "p");
    std::vector<std::uint32_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    const RowVector a = EncodeGraph(g, params);
    const RowVector b = EncodeGraph(testing::PermuteGraph(g, perm), params);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-9, Format("max_abs_diff=%.3e (tol 1e-9) over 50 graphs", worst)};
}

Outcome LossSanity() {
  const int n = 6, d_h = 8, d = 12;
  std::mt19937_64 rng(6);
  std::vector<GraphLabel> labels;
  Matrix y(n, d_h);
  RowVector code(d_h);
  for (int j = 0; j < d_h; ++j) code[j] = (rng() & 1u) ? 1.0 : -1.0;
  for (int i = 0; i < n; ++i) {
    const bool cancer = i % 3 != 0;
    labels.push_back(cancer ? GraphLabel::kCancerous : GraphLabel::kCancerFree);
    y.row(i) = cancer ? code : RowVector(-code);
  }
  const auto c = PairwiseLabelMatrix(labels);
  // Signed column selection: orthonormal columns with exact entries.
  std::vector<int> rows(d);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  Matrix w = Matrix::Zero(d, d_h);
  for (int j = 0; j < d_h; ++j) w(rows[static_cast<std::size_t>(j)], j) = (rng() & 1u) ? 1.0 : -1.0;
  const double lambda = 0.005;
  const double base = HashLoss(y, c, w, lambda);
  std::normal_distribution<double> normal(0.0, 1.0);
  double smallest = INFINITY;
  for (int t = 0; t < 3000; ++t) {
    Matrix dy = Matrix::Zero(n, d_h), dw = Matrix::Zero(d, d_h);
    if (t % 3 != 1) dy = dy.unaryExpr([&](double) { return normal(rng); });
    if (t % 3 != 0) dw = dw.unaryExpr([&](double) { return normal(rng); });
    const double norm = std::sqrt(dy.squaredNorm() + dw.squaredNorm());
    dy *= 1e-2 / norm;
    dw *= 1e-2 / norm;
    smallest = std::min(smallest, HashLoss(y + dy, c, w + dw, lambda));
  }
  return {base == 0.0 && smallest > 0.0,
          Format("J_perfect=%.3g min_J_perturbed=%.3e over 3000 perturbations of norm 1e-2", base,
                 smallest)};
}

Outcome EndToEnd(const fs::path& work) {
  auto kv = KeyValueConfig::Parse(
      "db_wsis=20\nquery_wsis=5\nn_bar=20\nepochs=300\nd=32\nseed=1\n", "ac7");
  kv.Set("out", (work / "ac7").string());
  const auto config = PipelineConfig::FromConfig(kv);
  fs::remove_all(config.out);
  const auto report = RunPipeline(config);

  // Separability oracle: nearest class centroid on raw patch features
  // pooled over every slide, fitted on database slides and scored on query
  // slides. The graph-level score on mean-pooled node features is reported
  // alongside.
  const PipelinePaths paths{config.out};
  const double oracle = testing::NearestCentroidAccuracy(LoadFeatureDir(paths.features_db()),
                                                         LoadFeatureDir(paths.features_query()));
  const auto db = LoadGraphDir(paths.graphs_db(20));
  const auto queries = LoadGraphDir(paths.graphs_query(20));
  auto pool = [](const TissueGraph& g) -> Eigen::VectorXd {
    return g.node_features.colwise().mean().transpose();
  };
  Eigen::VectorXd centroid[2];
  std::size_t counts[2] = {0, 0};
  for (const auto& g : db) {
    if (g.label == GraphLabel::kExcluded) continue;
    const int c = g.label == GraphLabel::kCancerous;
    if (counts[c]++ == 0) {
      centroid[c] = pool(g);
    } else {
      centroid[c] += pool(g);
    }
  }
  if (counts[0] == 0 || counts[1] == 0) return {false, "database lacks one class"};
  centroid[0] /= static_cast<double>(counts[0]);
  centroid[1] /= static_cast<double>(counts[1]);
  std::size_t right = 0, total = 0;
  for (const auto& g : queries) {
    if (g.label == GraphLabel::kExcluded) continue;
    const Eigen::VectorXd v = pool(g);
    const bool cancer = (v - centroid[1]).squaredNorm() < (v - centroid[0]).squaredNorm();
    right += cancer == (g.label == GraphLabel::kCancerous);
    ++total;
  }
  const double graph_level = total ? static_cast<double>(right) / static_cast<double>(total) : 0.0;
  const double map = report.rows.at(0).map;
  return {oracle >= 0.95 && map >= 0.95,
          Format("nearest_centroid_patches=%.4f (>=0.95) mAP=%.4f (>=0.95) AP50=%.4f "
                 "query_graphs=%zu graph_meanpool_centroid=%.4f",
                 oracle, map, report.rows.at(0).ap_at_k, total, graph_level)};
}

int RunCli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string command = "\"" + cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(command.c_str());
  return status == -1 ? -1 : WEXITSTATUS(status);
}

Outcome QueryLatency(const std::string& cli, const fs::path& work) {
  const fs::path log = work / "ac8.log";
  const int rc = RunCli(cli, "index bench --size 50000 --bits 48", log);
  const std::string out = ReadFileBytes(log);
  const auto pos = out.find("mean_query_ms=");
  if (rc != 0 || pos == std::string::npos) return {false, "bench failed: " + out};
  const double ms = std::strtod(out.c_str() + pos + 14, nullptr);
  return {ms < 5.0, Format("mean_query_ms=%.4f (bound 5 ms) size=50000 bits=48", ms)};
}

Outcome Determinism(const std::string& cli, const fs::path& work) {
  std::string metrics[2], index[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = work / (run == 0 ? "ac9_a" : "ac9_b");
    fs::remove_all(out);
    const fs::path log = work / Format("ac9_%d.log", run);
    if (RunCli(cli, "--seed 11 pipeline all --out \"" + out.string() + "\"", log) != 0) {
      return {false, "pipeline failed: " + ReadFileBytes(log)};
    }
    const PipelinePaths paths{out};
    metrics[run] = ReadFileBytes(paths.metrics_csv());
    index[run] = ReadFileBytes(paths.index(50));
  }
  const bool same = metrics[0] == metrics[1] && index[0] == index[1];
  return {same, Format("metrics.csv %s, index.ghix %s (%zu bytes)",
                       metrics[0] == metrics[1] ? "identical" : "DIFFERENT",
                       index[0] == index[1] ? "identical" : "DIFFERENT", index[0].size())};
}

}  // namespace
}  // namespace gcnhash

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace gcnhash;
  CLI::App app{"gcnhash acceptance criteria"};
  std::string cli;
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the gcnhash executable")->required();
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<Criterion> criteria{
      {1, 30, GradientCheck},
      {2, 10, HacOracle},
      {3, 5, HammingRanking},
      {4, 0, MetricFixtures},
      {5, 0, PermutationInvariance},
      {6, 0, LossSanity},
      {7, 600, [&] { return EndToEnd(work); }},
      {8, 0, [&] { return QueryLatency(cli, work); }},
      {9, 0, [&] { return Determinism(cli, work); }},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && seconds >= c.budget_s) {
      outcome.pass = false;
      outcome.detail += Format(" runtime over %.0f s budget", c.budget_s);
    }
    failures += !outcome.pass;
    std::printf("AC%d %s %s [%.2f s]\n", c.id, outcome.pass ? "PASS" : "FAIL",
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
