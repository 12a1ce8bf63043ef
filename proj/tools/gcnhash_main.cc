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

// gcnhash: command-line front end for the tissue-graph hashing pipeline.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gcnhash/config.h"
#include "gcnhash/error.h"
#include "gcnhash/eval.h"
#include "gcnhash/graphcons.h"
#include "gcnhash/index.h"
#include "gcnhash/ingest.h"
#include "gcnhash/log.h"
#include "gcnhash/pipeline.h"
#include "gcnhash/seed.h"
#include "gcnhash/train.h"

namespace fs = std::filesystem;

namespace gcnhash {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kData:
      return 3;
    case ErrorKind::kNumeric:
      return 4;
  }
  return kExitInternal;
}

std::string OneLine(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void PrintError(std::string_view kind, std::string_view stage, const std::string& msg) {
  std::cerr << "error: kind=" << kind << " stage=" << stage << " msg=" << OneLine(msg)
            << std::endl;
}

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;
  bool verbose = false;
};

// Config file first, then --set overrides, then --seed.
KeyValueConfig LoadConfig(const GlobalOptions& g) {
  KeyValueConfig config;
  if (!g.config_path.empty()) config = KeyValueConfig::FromFile(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    }
    config.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.Set("seed", std::to_string(*g.seed));
  return config;
}

void RequireNonEmpty(const std::string& value, std::string_view flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

void RequireFile(const std::string& path, std::string_view flag) {
  RequireNonEmpty(path, flag);
  if (!fs::exists(path)) throw ConfigError(std::string(flag) + " does not exist: " + path);
}

std::string LabelText(GraphLabel label) { return std::string(GraphLabelName(label)); }

}  // namespace
}  // namespace gcnhash

int main(int argc, char** argv) {
  using namespace gcnhash;
  CLI::App app{"gcnhash: tissue-graph hashing for whole-slide region retrieval"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GlobalOptions global;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Root seed for every stage");
  app.add_option("--config", global.config_path, "key=value configuration file");
  app.add_option("--set", global.overrides, "Override a config key (KEY=VALUE)");
  app.add_flag("--verbose,-v", global.verbose, "Log progress to stderr");

  std::string stage = "cli";

  // ingest gen
  auto* ingest = app.add_subcommand("ingest", "Feature ingestion");
  ingest->require_subcommand(1);
  auto* ingest_gen = ingest->add_subcommand("gen", "Generate synthetic slides");
  std::string spec_path, ingest_out, ingest_prefix = "wsi";
  std::size_t ingest_count = 1;
  ingest_gen->add_option("--spec", spec_path, "Synthetic spec file (key=value)");
  ingest_gen->add_option("--count", ingest_count, "Number of slides")->capture_default_str();
  ingest_gen->add_option("--prefix", ingest_prefix, "Slide id prefix")->capture_default_str();
  ingest_gen->add_option("--out", ingest_out, "Output directory")->required();

  // graphs build
  auto* graphs = app.add_subcommand("graphs", "Tissue graph construction");
  graphs->require_subcommand(1);
  auto* graphs_build = graphs->add_subcommand("build", "Partition slides into graphs");
  std::string graphs_features, graphs_out;
  std::size_t graphs_nbar = 0;
  graphs_build->add_option("--features", graphs_features, "Feature directory")->required();
  graphs_build->add_option("--nbar", graphs_nbar, "Mean nodes per graph")->required();
  graphs_build->add_option("--out", graphs_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train the hashing model");
  std::string train_graphs, train_out, train_history;
  train->add_option("--graphs", train_graphs, "Graph directory")->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--history", train_history, "Per-epoch loss CSV");

  // index build/query/bench
  auto* index = app.add_subcommand("index", "Binary code index");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "Encode database graphs");
  std::string ib_graphs, ib_checkpoint, ib_out;
  index_build->add_option("--graphs", ib_graphs, "Graph directory")->required();
  index_build->add_option("--checkpoint", ib_checkpoint, "Checkpoint path")->required();
  index_build->add_option("--out", ib_out, "Index path")->required();

  auto* index_query = index->add_subcommand("query", "Top-k retrieval");
  std::string iq_index, iq_checkpoint, iq_code_from, iq_graph;
  std::size_t iq_k = 10;
  index_query->add_option("--index", iq_index, "Index path")->required();
  index_query->add_option("--checkpoint", iq_checkpoint, "Checkpoint path");
  index_query->add_option("--code-from", iq_code_from, "Graph file (.tgc) to query with")
      ->required();
  index_query->add_option("--graph", iq_graph, "Only query with this graph_id");
  index_query->add_option("--k", iq_k, "Results per query")->capture_default_str();

  auto* index_bench = index->add_subcommand("bench", "Scan latency on random codes");
  std::size_t bench_size = 50000, bench_queries = 1000, bench_k = 50;
  int bench_bits = 48;
  index_bench->add_option("--size", bench_size, "Index entries")->capture_default_str();
  index_bench->add_option("--bits", bench_bits, "Code width")->capture_default_str();
  index_bench->add_option("--queries", bench_queries, "Timed queries")->capture_default_str();
  index_bench->add_option("--k", bench_k, "Results per query")->capture_default_str();

  // eval run
  auto* eval = app.add_subcommand("eval", "Retrieval metrics");
  eval->require_subcommand(1);
  auto* eval_run = eval->add_subcommand("run", "Evaluate query graphs against an index");
  std::string ev_index, ev_checkpoint, ev_queries, ev_out;
  std::size_t ev_k = 50, ev_nbar = 0;
  eval_run->add_option("--index", ev_index, "Index path")->required();
  eval_run->add_option("--checkpoint", ev_checkpoint, "Checkpoint path")->required();
  eval_run->add_option("--queries", ev_queries, "Query graph directory")->required();
  eval_run->add_option("--out", ev_out, "Report directory")->required();
  eval_run->add_option("--k", ev_k, "AP depth")->capture_default_str();
  eval_run->add_option("--nbar", ev_nbar, "n_bar value recorded in metrics.csv");

  // pipeline all
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end run");
  pipeline->require_subcommand(1);
  auto* pipeline_all = pipeline->add_subcommand("all", "Run every stage");
  std::string pl_out, pl_nbar;
  pipeline_all->add_option("--out", pl_out, "Run directory");
  pipeline_all->add_option("--nbar", pl_nbar, "Comma-separated n_bar list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError("config", "cli", e.what());
    return ExitCodeFor(ErrorKind::kConfig);
  }
  if (*seed_opt) global.seed = seed_value;
  SetVerbose(global.verbose);

  try {
    const KeyValueConfig config = LoadConfig(global);

    if (*ingest_gen) {
      stage = "ingest";
      KeyValueConfig spec_config;
      if (!spec_path.empty()) spec_config = KeyValueConfig::FromFile(spec_path);
      SyntheticSpec spec = SyntheticSpec::FromConfig(spec_config);
      const std::uint64_t root = global.seed.value_or(0);
      if (!spec_config.Has("mean_seed")) spec.mean_seed = DeriveSeed(root, "ingest/means");
      const auto manifest =
          GenerateFeatureSet(spec, DeriveSeed(root, "ingest"), ingest_count, ingest_prefix,
                             ingest_out);
      std::cout << "wrote " << manifest.size() << " slides to " << ingest_out << "\n";
    } else if (*graphs_build) {
      stage = "graphs";
      const auto n = BuildGraphSet(graphs_features, graphs_nbar, graphs_out);
      std::cout << "wrote " << n << " graphs to " << graphs_out << "\n";
    } else if (*train) {
      stage = "train";
      const auto pc = PipelineConfig::FromConfig(config);
      const auto result = TrainFromGraphDir(train_graphs, pc.train, train_out, train_history);
      std::cout << "trained " << result.history.size() << " epochs, final loss "
                << (result.history.empty() ? 0.0 : result.history.back()) << "\n";
    } else if (*index_build) {
      stage = "index";
      const auto idx = IndexFromGraphDir(ib_graphs, ib_checkpoint, ib_out);
      std::cout << "indexed " << idx.size() << " graphs (" << idx.bits() << " bits)\n";
    } else if (*index_query) {
      stage = "query";
      RequireFile(iq_checkpoint, "--checkpoint");
      RequireFile(iq_index, "--index");
      RequireFile(iq_code_from, "--code-from");
      if (iq_k == 0) throw ConfigError("--k must be >= 1");
      const auto params = LoadCheckpoint(iq_checkpoint);
      const auto idx = LoadIndex(iq_index);
      const auto queries = LoadGraphFile(iq_code_from);
      std::cout << "query_id\trank\tgraph_id\tdistance\tlabel\n";
      std::size_t used = 0;
      for (const auto& q : queries) {
        if (!iq_graph.empty() && q.graph_id != iq_graph) continue;
        ++used;
        const auto result = Query(idx, EncodeCode(q, params), iq_k, q.graph_id);
        for (std::size_t r = 0; r < result.ranked.size(); ++r) {
          const auto& e = result.ranked[r];
          std::cout << q.graph_id << '\t' << r + 1 << '\t' << e.graph_id << '\t'
                    << e.distance << '\t' << LabelText(e.label) << '\n';
        }
      }
      if (used == 0) throw DataError("no matching query graph in " + iq_code_from);
    } else if (*index_bench) {
      stage = "bench";
      if (bench_size == 0 || bench_queries == 0 || bench_k == 0) {
        throw ConfigError("bench: --size, --queries and --k must be >= 1");
      }
      if (bench_bits <= 0) throw ConfigError("bench: --bits must be >= 1");
      std::mt19937_64 rng(DeriveSeed(global.seed.value_or(0), "bench"));
      std::bernoulli_distribution coin(0.5);
      auto random_code = [&] {
        BinaryCode code(bench_bits);
        for (int b = 0; b < bench_bits; ++b) code.set_bit(b, coin(rng));
        return code;
      };
      std::vector<IndexEntry> entries;
      std::vector<BinaryCode> codes;
      for (std::size_t i = 0; i < bench_size; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "bench/g%07zu", i);
        entries.push_back({id, "bench", i % 2 ? GraphLabel::kCancerous : GraphLabel::kCancerFree});
        codes.push_back(random_code());
      }
      const BinaryCodeIndex idx(bench_bits, std::move(entries), std::move(codes));
      std::vector<BinaryCode> queries;
      for (std::size_t q = 0; q < bench_queries; ++q) queries.push_back(random_code());
      std::size_t checksum = Query(idx, queries.front(), bench_k).ranked.size();
      const auto start = std::chrono::steady_clock::now();
      for (const auto& q : queries) checksum += Query(idx, q, bench_k).ranked.front().distance;
      const auto stop = std::chrono::steady_clock::now();
      const double total_ms = std::chrono::duration<double, std::milli>(stop - start).count();
      std::printf("size=%zu bits=%d queries=%zu k=%zu mean_query_ms=%.6f total_ms=%.3f "
                  "checksum=%zu\n",
                  bench_size, bench_bits, bench_queries, bench_k,
                  total_ms / static_cast<double>(bench_queries), total_ms, checksum);
    } else if (*eval_run) {
      stage = "eval";
      const auto out = EvaluateQueries(ev_index, ev_queries, ev_checkpoint, ev_k, ev_nbar);
      const MetricsRow rows[] = {out.metrics};
      WriteMetricsCsv(rows, fs::path(ev_out) / "metrics.csv");
      WritePrCurveCsv(out.curve, fs::path(ev_out) / "pr_curve.csv");
      std::printf("queries=%zu AP@%zu=%.6f mAP=%.6f\n", out.queries, out.k,
                  out.metrics.ap_at_k, out.metrics.map);
    } else if (*pipeline_all) {
      stage = "pipeline";
      KeyValueConfig merged = config;
      if (!pl_out.empty()) merged.Set("out", pl_out);
      if (!pl_nbar.empty()) merged.Set("n_bar", pl_nbar);
      const auto pc = PipelineConfig::FromConfig(merged);
      const auto report = RunPipeline(pc);
      for (const auto& row : report.rows) {
        std::printf("n_bar=%zu AP50=%.6f mAP=%.6f\n", row.n_bar, row.ap_at_k, row.map);
      }
      std::printf("stages_run=%zu stages_skipped=%zu\n", report.stages_run.size(),
                  report.stages_skipped.size());
    }
  } catch (const StageError& e) {
    PrintError(ErrorKindName(e.kind()), e.stage(), e.what());
    return ExitCodeFor(e.kind());
  } catch (const Error& e) {
    PrintError(ErrorKindName(e.kind()), stage, e.what());
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error& e) {
    PrintError("data", stage, e.what());
    return ExitCodeFor(ErrorKind::kData);
  } catch (const std::exception& e) {
    PrintError("internal", stage, e.what());
    return kExitInternal;
  }
  return kExitOk;
}
