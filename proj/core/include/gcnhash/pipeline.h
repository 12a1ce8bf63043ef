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


#ifndef GCNHASH_PIPELINE_H_
#define GCNHASH_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gcnhash/config.h"
#include "gcnhash/error.h"
#include "gcnhash/eval.h"
#include "gcnhash/index.h"
#include "gcnhash/ingest.h"
#include "gcnhash/train.h"

namespace gcnhash {

// An error raised inside a named pipeline stage. Keeps the inner kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error(inner.kind(), inner.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Runs `fn`, rethrowing any gcnhash::Error as a StageError tagged `stage`.
template <typename F>
auto RunStage(std::string_view stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(std::string(stage), e);
  }
}

struct PipelineConfig {
  std::filesystem::path out = "gcnhash_run";
  std::filesystem::path features_dir;  // holds db/ and query/; empty = synthesize
  std::vector<std::size_t> n_bar{50};
  std::size_t db_wsis = 20;
  std::size_t query_wsis = 5;
  std::size_t eval_k = 50;
  std::uint64_t seed = 0;
  SyntheticSpec synthetic;
  bool mean_seed_given = false;
  TrainConfig train;

  void Validate() const;

  // Flat keys: out features_dir n_bar db_wsis query_wsis eval_k seed, every
  // training key, and synthetic keys prefixed with "synth.".
  static PipelineConfig FromConfig(const KeyValueConfig& config);
  static std::vector<std::string_view> Keys();
};

// Directory layout under PipelineConfig::out.
struct PipelinePaths {
  std::filesystem::path root;

  std::filesystem::path features_db() const { return root / "features" / "db"; }
  std::filesystem::path features_query() const { return root / "features" / "query"; }
  std::filesystem::path nbar_dir(std::size_t n_bar) const;
  std::filesystem::path graphs_db(std::size_t n_bar) const;
  std::filesystem::path graphs_query(std::size_t n_bar) const;
  std::filesystem::path checkpoint(std::size_t n_bar) const;
  std::filesystem::path history(std::size_t n_bar) const;
  std::filesystem::path index(std::size_t n_bar) const;
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path metrics_csv() const { return reports() / "metrics.csv"; }
  std::filesystem::path pr_curve_csv() const { return reports() / "pr_curve.csv"; }
  std::filesystem::path pr_curve_csv(std::size_t n_bar) const;
};

// Writes `count` synthetic slides named "<prefix>_NNN" plus a manifest.
std::vector<ManifestEntry> GenerateFeatureSet(const SyntheticSpec& spec, std::uint64_t seed,
                                              std::size_t count, std::string_view prefix,
                                              const std::filesystem::path& out_dir);

// One "<wsi>.tgc" per slide listed in features_dir. Returns the graph count.
std::size_t BuildGraphSet(const std::filesystem::path& features_dir, std::size_t n_bar,
                          const std::filesystem::path& out_dir);

TrainResult TrainFromGraphDir(const std::filesystem::path& graphs_dir,
                              const TrainConfig& config,
                              const std::filesystem::path& checkpoint,
                              const std::filesystem::path& history_csv);

BinaryCodeIndex IndexFromGraphDir(const std::filesystem::path& graphs_dir,
                                  const std::filesystem::path& checkpoint,
                                  const std::filesystem::path& index_path);

struct EvalOutput {
  MetricsRow metrics;
  std::vector<PrPoint> curve;
  std::size_t queries = 0;
  std::size_t k = 0;  // AP depth after clamping to the index size
};

EvalOutput EvaluateQueries(const std::filesystem::path& index_path,
                           const std::filesystem::path& query_graphs_dir,
                           const std::filesystem::path& checkpoint, std::size_t k,
                           std::size_t n_bar);

struct PipelineReport {
  std::vector<MetricsRow> rows;
  std::vector<std::string> stages_run;
  std::vector<std::string> stages_skipped;
};

// Runs every stage in order. Stages whose inputs hash to the stamp left by a
// previous run are skipped.
PipelineReport RunPipeline(const PipelineConfig& config);

}  // namespace gcnhash

#endif  // GCNHASH_PIPELINE_H_
