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

#ifndef GCNHASH_TRAIN_H_
#define GCNHASH_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "gcnhash/config.h"
#include "gcnhash/gcn.h"
#include "gcnhash/graphcons.h"

namespace gcnhash {

// c_ij = +1 when graphs i and j share a label, -1 otherwise.
struct PairwiseLabels {
  Matrix c;
};

PairwiseLabels PairwiseLabelMatrix(std::span<const GraphLabel> labels);

// J = (1/N) ||(1/d_h) Y Y^T - C||_F^2 + lambda ||W_h^T W_h - I||_F^2
double HashLoss(const Matrix& y, const PairwiseLabels& labels, const Matrix& hash_w,
                double lambda);

struct HashLossGradient {
  double loss = 0.0;
  Matrix grad_y;       // N x d_h
  Matrix grad_hash_w;  // regulariser term only, d x d_h
};

HashLossGradient HashLossWithGradient(const Matrix& y, const PairwiseLabels& labels,
                                      const Matrix& hash_w, double lambda);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double lambda = 0.005;
  std::uint64_t seed = 0;
  double dropout = 0.5;
  bool stratified = false;  // balance classes inside each mini-batch
  ModelDims dims;

  void Validate() const;

  // "acdc" (the defaults) or "camelyon": L=2 K=4 d=100 alpha=0.2
  // lambda=0.05 d_h=48.
  static TrainConfig Preset(std::string_view name);

  // Recognised keys: preset learning_rate adam_beta1 adam_beta2 adam_eps batch_size
  // epochs lambda seed dropout stratified L K d alpha d_h n_max pool_dropout.
  static TrainConfig FromConfig(const KeyValueConfig& config);
  static std::span<const std::string_view> Keys();
};

using GraphBatch = std::span<const TissueGraph* const>;

struct BatchGradients {
  double loss = 0.0;
  GcnHashParams grads;
};

// Loss and exact gradients of HashLoss(EncodeGraph(batch)) for every
// parameter. Dropout follows config.dropout when `rng` is non-null and is off
// otherwise. Throws NumericError naming the first non-finite tensor.
BatchGradients LossGradients(GraphBatch batch, const GcnHashParams& params,
                             const TrainConfig& config, std::mt19937_64* rng);

// Loss with dropout off.
double BatchLoss(GraphBatch batch, const GcnHashParams& params, double lambda);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::map<TensorClass, double> per_class;
  std::map<TensorClass, std::size_t> coordinates;
  double max_abs_gradient = 0.0;
  std::size_t skipped = 0;  // stencils that crossed a non-differentiable point
};

// Central finite differences on up to `samples_per_class` random coordinates
// of each tensor class; error = |analytic - numeric| / max(|numeric|, 1e-8).
// The loss is re-evaluated in long double, and coordinates whose stencil
// changes a ReLU state or readout argmax are replaced by fresh draws.
GradientCheckReport FiniteDiffCheck(const GcnHashParams& params, GraphBatch batch,
                                    double lambda, double step,
                                    std::size_t samples_per_class, std::uint64_t seed);

class AdamOptimizer {
 public:
  AdamOptimizer(const GcnHashParams& shape, double learning_rate, double beta1,
                double beta2, double eps);

  void Step(GcnHashParams& params, const GcnHashParams& grads);
  std::uint64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct TrainResult {
  GcnHashParams params;
  std::vector<double> history;  // mean mini-batch loss per epoch
};

// Mini-batch Adam on the non-excluded graphs. Deterministic in
// (graphs, config). `initial` overrides the seeded initialisation.
TrainResult Train(std::span<const TissueGraph> graphs, const TrainConfig& config,
                  const GcnHashParams* initial = nullptr);

void WriteHistoryCsv(const std::vector<double>& history,
                     const std::filesystem::path& path);

}  // namespace gcnhash

#endif  // GCNHASH_TRAIN_H_
