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

#include "gcnhash/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "gcnhash/binary_io.h"
#include "gcnhash/graphcons.h"
#include "gcnhash/log.h"
#include "gcnhash/seed.h"

namespace gcnhash {
namespace fs = std::filesystem;
namespace {

constexpr std::string_view kPipelineKeys[] = {"out",        "features_dir", "n_bar",
                                              "db_wsis",    "query_wsis",   "eval_k"};
constexpr std::string_view kSynthPrefix = "synth.";

std::string SlideFileStem(std::string_view wsi_id) {
  std::string stem(wsi_id);
  std::replace(stem.begin(), stem.end(), '/', '_');
  return stem;
}

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string TrainFingerprint(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << c.learning_rate << ' ' << c.adam_beta1 << ' ' << c.adam_beta2 << ' ' << c.adam_eps
     << ' ' << c.batch_size << ' ' << c.epochs << ' ' << c.lambda << ' ' << c.seed << ' '
     << c.dropout << ' ' << c.stratified << ' ' << c.dims.levels << ' ' << c.dims.steps
     << ' ' << c.dims.embed_dim << ' ' << c.dims.pool_ratio << ' ' << c.dims.code_bits
     << ' ' << c.dims.feature_dim << ' ' << c.dims.max_nodes << ' ' << c.dims.pool_dropout;
  return os.str();
}

// Order-stable digest of file names and contents under `path`.
std::uint64_t HashPath(std::uint64_t h, const fs::path& path) {
  if (fs::is_regular_file(path)) {
    h = Fnv1a64(path.filename().string(), h);
    return Fnv1a64(ReadFileBytes(path), h);
  }
  if (!fs::is_directory(path)) throw DataError("missing input: " + path.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) h = HashPath(h, f);
  return h;
}

class Stamps {
 public:
  explicit Stamps(fs::path dir) : dir_(std::move(dir)) {}

  bool UpToDate(const std::string& stage, std::uint64_t hash,
                const std::vector<fs::path>& outputs) const {
    const auto file = dir_ / (stage + ".stamp");
    if (!fs::exists(file)) return false;
    for (const auto& o : outputs) {
      if (!fs::exists(o)) return false;
    }
    return ReadFileBytes(file) == Hex(hash) + "\n";
  }

  void Write(const std::string& stage, std::uint64_t hash) const {
    WriteFileBytes(dir_ / (stage + ".stamp"), Hex(hash) + "\n");
  }

 private:
  fs::path dir_;
};

std::vector<TissueGraph> LoadGraphsOrThrow(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("graph directory not found: " + dir.string());
  return LoadGraphDir(dir);
}

}  // namespace

void PipelineConfig::Validate() const {
  if (out.empty()) throw ConfigError("pipeline: out must be set");
  if (n_bar.empty()) throw ConfigError("pipeline: n_bar list is empty");
  for (auto n : n_bar) {
    if (n == 0) throw ConfigError("pipeline: n_bar must be >= 1");
  }
  if (features_dir.empty()) {
    if (db_wsis == 0 || query_wsis == 0) {
      throw ConfigError("pipeline: db_wsis and query_wsis must be >= 1");
    }
    synthetic.Validate();
  }
  if (eval_k == 0) throw ConfigError("pipeline: eval_k must be >= 1");
  train.Validate();
  ModelDims dims = train.dims;
  if (dims.feature_dim == 0) dims.feature_dim = 1;  // filled from the data at train time
  dims.Validate();
}

std::vector<std::string_view> PipelineConfig::Keys() {
  std::vector<std::string_view> keys(std::begin(kPipelineKeys), std::end(kPipelineKeys));
  for (auto k : TrainConfig::Keys()) keys.push_back(k);
  return keys;
}

PipelineConfig PipelineConfig::FromConfig(const KeyValueConfig& config) {
  KeyValueConfig synth;
  KeyValueConfig rest;
  for (const auto& [key, value] : config.values()) {
    if (key.starts_with(kSynthPrefix)) {
      synth.Set(key.substr(kSynthPrefix.size()), value);
    } else {
      rest.Set(key, value);
    }
  }
  const auto keys = Keys();
  rest.RequireKnownKeys(keys);

  PipelineConfig c;
  c.out = rest.GetString("out", c.out.string());
  c.features_dir = rest.GetString("features_dir", "");
  const auto n_bar = rest.GetIntList("n_bar", {50});
  c.n_bar.clear();
  for (auto n : n_bar) {
    if (n <= 0) throw ConfigError("pipeline: n_bar entries must be positive");
    c.n_bar.push_back(static_cast<std::size_t>(n));
  }
  auto non_negative = [&](std::string_view key, std::size_t fallback) {
    const auto v = rest.GetInt(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("pipeline: " + std::string(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.db_wsis = non_negative("db_wsis", c.db_wsis);
  c.query_wsis = non_negative("query_wsis", c.query_wsis);
  c.eval_k = non_negative("eval_k", c.eval_k);
  c.seed = static_cast<std::uint64_t>(rest.GetInt("seed", 0));
  c.synthetic = SyntheticSpec::FromConfig(synth);
  c.mean_seed_given = synth.Has("mean_seed");
  c.train = TrainConfig::FromConfig(rest);
  c.Validate();
  return c;
}

fs::path PipelinePaths::nbar_dir(std::size_t n_bar) const {
  return root / ("nbar_" + std::to_string(n_bar));
}
fs::path PipelinePaths::graphs_db(std::size_t n_bar) const {
  return nbar_dir(n_bar) / "graphs" / "db";
}
fs::path PipelinePaths::graphs_query(std::size_t n_bar) const {
  return nbar_dir(n_bar) / "graphs" / "query";
}
fs::path PipelinePaths::checkpoint(std::size_t n_bar) const {
  return nbar_dir(n_bar) / "model.ckpt";
}
fs::path PipelinePaths::history(std::size_t n_bar) const {
  return nbar_dir(n_bar) / "history.csv";
}
fs::path PipelinePaths::index(std::size_t n_bar) const {
  return nbar_dir(n_bar) / "index.ghix";
}
fs::path PipelinePaths::pr_curve_csv(std::size_t n_bar) const {
  return reports() / ("nbar_" + std::to_string(n_bar)) / "pr_curve.csv";
}

std::vector<ManifestEntry> GenerateFeatureSet(const SyntheticSpec& spec, std::uint64_t seed,
                                              std::size_t count, std::string_view prefix,
                                              const fs::path& out_dir) {
  spec.Validate();
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_%03zu", i);
    const std::string wsi_id = std::string(prefix) + suffix;
    const auto grid = GenerateSyntheticWsi(spec, DeriveSeed(seed, wsi_id), wsi_id);
    const std::string file = SlideFileStem(wsi_id) + ".pgf";
    SavePatchGrid(grid, out_dir / file);
    manifest.push_back({file, wsi_id});
  }
  WriteFeatureManifest(out_dir, manifest);
  return manifest;
}

std::size_t BuildGraphSet(const fs::path& features_dir, std::size_t n_bar,
                          const fs::path& out_dir) {
  if (n_bar == 0) throw ConfigError("graphs: n_bar must be >= 1");
  const auto grids = LoadFeatureDir(features_dir);
  fs::create_directories(out_dir);
  std::size_t total = 0;
  for (const auto& grid : grids) {
    const auto graphs = BuildTissueGraphs(grid, n_bar);
    SaveGraphFile(out_dir / (SlideFileStem(grid.wsi_id) + ".tgc"), grid.wsi_id, graphs);
    total += graphs.size();
    LogInfo("graphs: " + grid.wsi_id + " -> " + std::to_string(graphs.size()) + " graphs");
  }
  return total;
}

TrainResult TrainFromGraphDir(const fs::path& graphs_dir, const TrainConfig& config,
                              const fs::path& checkpoint, const fs::path& history_csv) {
  const auto graphs = LoadGraphsOrThrow(graphs_dir);
  auto result = Train(graphs, config);
  SaveCheckpoint(result.params, checkpoint);
  if (!history_csv.empty()) WriteHistoryCsv(result.history, history_csv);
  return result;
}

BinaryCodeIndex IndexFromGraphDir(const fs::path& graphs_dir, const fs::path& checkpoint,
                                  const fs::path& index_path) {
  const auto params = LoadCheckpoint(checkpoint);
  const auto graphs = LoadGraphsOrThrow(graphs_dir);
  auto index = BuildIndex(graphs, params);
  SaveIndex(index, index_path);
  return index;
}

EvalOutput EvaluateQueries(const fs::path& index_path, const fs::path& query_graphs_dir,
                           const fs::path& checkpoint, std::size_t k, std::size_t n_bar) {
  if (k == 0) throw ConfigError("eval: k must be >= 1");
  const auto params = LoadCheckpoint(checkpoint);
  const auto index = LoadIndex(index_path);
  if (index.bits() != params.dims.code_bits) {
    throw DataError("eval: index d_h does not match the checkpoint");
  }
  if (index.empty()) throw DataError("eval: index is empty");
  const auto queries = LoadGraphsOrThrow(query_graphs_dir);
  const auto table = BuildRelevanceTable(index, queries, params);
  if (table.r.empty()) throw DataError("eval: no labeled query graphs");

  EvalOutput out;
  out.k = std::min(k, index.size());
  out.queries = table.r.size();
  out.metrics.n_bar = n_bar;
  out.metrics.ap_at_k = AveragePrecisionAtK(table, out.k);
  out.metrics.map = MeanAveragePrecision(table);
  out.curve = InterpolatedPrCurve(table);
  return out;
}

PipelineReport RunPipeline(const PipelineConfig& config) {
  config.Validate();
  const PipelinePaths paths{config.out};
  const Stamps stamps(paths.root / ".stamps");
  PipelineReport report;

  auto run = [&](const std::string& stage, std::uint64_t hash,
                 const std::vector<fs::path>& outputs, auto&& fn) {
    if (stamps.UpToDate(stage, hash, outputs)) {
      LogInfo("stage " + stage + ": up to date");
      report.stages_skipped.push_back(stage);
      return;
    }
    LogInfo("stage " + stage + ": running");
    RunStage(stage, fn);
    stamps.Write(stage, hash);
    report.stages_run.push_back(stage);
  };

  fs::path features_db = paths.features_db();
  fs::path features_query = paths.features_query();
  if (config.features_dir.empty()) {
    SyntheticSpec spec = config.synthetic;
    if (!config.mean_seed_given) spec.mean_seed = DeriveSeed(config.seed, "ingest/means");
    const auto ingest_seed = DeriveSeed(config.seed, "ingest");
    std::uint64_t hash = Fnv1a64(spec.ToConfig().ToString());
    hash = Fnv1a64(std::to_string(ingest_seed) + " " + std::to_string(config.db_wsis) + " " +
                       std::to_string(config.query_wsis),
                   hash);
    run("ingest", hash, {features_db / kManifestName, features_query / kManifestName}, [&] {
      GenerateFeatureSet(spec, ingest_seed, config.db_wsis, "db", features_db);
      GenerateFeatureSet(spec, ingest_seed, config.query_wsis, "query", features_query);
    });
  } else {
    features_db = config.features_dir / "db";
    features_query = config.features_dir / "query";
  }

  TrainConfig train = config.train;
  train.seed = DeriveSeed(config.seed, "train");

  for (const auto n_bar : config.n_bar) {
    const std::string tag = "@" + std::to_string(n_bar);
    const auto graphs_db = paths.graphs_db(n_bar);
    const auto graphs_query = paths.graphs_query(n_bar);

    const std::uint64_t graphs_hash = RunStage("graphs", [&] {
      return HashPath(HashPath(Fnv1a64(std::to_string(n_bar)), features_db), features_query);
    });
    run("graphs" + tag, graphs_hash, {graphs_db, graphs_query}, [&] {
      fs::remove_all(graphs_db);
      fs::remove_all(graphs_query);
      BuildGraphSet(features_db, n_bar, graphs_db);
      BuildGraphSet(features_query, n_bar, graphs_query);
    });

    const std::uint64_t train_hash = HashPath(Fnv1a64(TrainFingerprint(train)), graphs_db);
    run("train" + tag, train_hash, {paths.checkpoint(n_bar)}, [&] {
      TrainFromGraphDir(graphs_db, train, paths.checkpoint(n_bar), paths.history(n_bar));
    });

    const std::uint64_t index_hash =
        HashPath(HashPath(Fnv1a64("index"), paths.checkpoint(n_bar)), graphs_db);
    run("index" + tag, index_hash, {paths.index(n_bar)},
        [&] { IndexFromGraphDir(graphs_db, paths.checkpoint(n_bar), paths.index(n_bar)); });

    const EvalOutput eval = RunStage("eval" + tag, [&] {
      return EvaluateQueries(paths.index(n_bar), graphs_query, paths.checkpoint(n_bar),
                             config.eval_k, n_bar);
    });
    RunStage("eval" + tag, [&] { WritePrCurveCsv(eval.curve, paths.pr_curve_csv(n_bar)); });
    if (n_bar == config.n_bar.front()) {
      RunStage("eval" + tag, [&] { WritePrCurveCsv(eval.curve, paths.pr_curve_csv()); });
    }
    report.rows.push_back(eval.metrics);
    report.stages_run.push_back("eval" + tag);
  }
  RunStage("eval", [&] { WriteMetricsCsv(report.rows, paths.metrics_csv()); });
  return report;
}

}  // namespace gcnhash
