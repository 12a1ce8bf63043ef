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

#ifndef GCNHASH_GCN_H_
#define GCNHASH_GCN_H_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcnhash/graphcons.h"

namespace gcnhash {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// K chained graph-convolution weights. The first maps the input width to the
// hidden width, the last maps to the output width.
struct GcnStack {
  std::vector<Matrix> weights;

  Eigen::Index input_width() const { return weights.front().rows(); }
  Eigen::Index output_width() const { return weights.back().cols(); }
  std::size_t depth() const { return weights.size(); }

  void Validate(std::string_view name) const;
};

// Architecture hyper-parameters. Defaults are the lung-cancer preset
// (L=2, K=4, d=110, alpha=0.2, d_h=48); feature_dim comes from the data.
struct ModelDims {
  int levels = 2;          // L
  int steps = 4;           // K
  int embed_dim = 110;     // d
  double pool_ratio = 0.2; // alpha = n_{l+1} / n_l
  int code_bits = 48;      // d_h
  int feature_dim = 0;     // d_f
  int max_nodes = 256;     // n_max, sizes the pool stacks
  bool pool_dropout = true;

  void Validate() const;

  // Output width of each level's pool stack:
  // w_0 = ClusterCount(n_max), w_{l+1} = ClusterCount(w_l).
  std::vector<Eigen::Index> PoolWidths() const;
};

// max(1, ceil(ratio * n)).
std::size_t ClusterCount(std::size_t n, double ratio);

struct GcnLevel {
  GcnStack embed;
  GcnStack pool;
};

enum class TensorClass { kEmbed, kPool, kHashWeight, kHashBias };

std::string_view TensorClassName(TensorClass c);

struct GcnHashParams {
  ModelDims dims;
  std::vector<GcnLevel> levels;
  Matrix hash_w;     // d x d_h
  RowVector hash_b;  // d_h

  // Glorot-uniform weights, zero hash bias.
  static GcnHashParams Initialize(const ModelDims& dims, std::uint64_t seed);
  static GcnHashParams Zeros(const ModelDims& dims);

  void Validate() const;
  std::size_t ParameterCount() const;

  // Visits every tensor in declaration order (level by level, embed before
  // pool, then hash_w, hash_b) as a flat span over its storage.
  template <typename F>
  void ForEachTensor(F&& f);
  template <typename F>
  void ForEachTensor(F&& f) const;
};

struct DropoutSpec {
  double probability = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct StackCache {
  std::vector<Matrix> inputs;          // H^(k-1)
  std::vector<Matrix> propagated;      // A_norm * H^(k-1)
  std::vector<Matrix> preactivations;  // A_norm * H^(k-1) * W^(k)
  std::vector<Matrix> masks;           // scaled keep-masks, empty without dropout
};

struct LevelCache {
  Matrix adjacency;   // A^(l), raw
  Matrix normalized;  // D^-1/2 (A + I) D^-1/2
  Matrix input;       // X^(l)
  StackCache embed;
  StackCache pool;
  Matrix embedded;    // Z^(l)
  Matrix logits;      // pool output truncated to n_{l+1} columns
  Matrix assign;      // S^(l)
  Matrix x_next;
  Matrix a_next;
};

struct ForwardCache {
  std::vector<LevelCache> levels;
  std::vector<Eigen::Index> readout_rows;  // argmax row per column of X^(L)
  RowVector readout;                       // z
  RowVector pre_tanh;
  RowVector y;
};

// D^-1/2 (A + I) D^-1/2 for a square, symmetric, non-negative A.
Matrix NormalizeAdjacency(const Matrix& adjacency);
Matrix NormalizeAdjacency(const PatchAdjacency& adjacency);

// Gradient with respect to A given the gradient with respect to
// NormalizeAdjacency(A).
Matrix NormalizeAdjacencyBackward(const Matrix& adjacency,
                                  const Matrix& grad_normalized);

// K steps of H <- ReLU(A_norm H W); dropout (inverted scaling) after each
// ReLU when `dropout` is given with a positive probability.
Matrix GcnForward(const Matrix& normalized, const Matrix& x, const GcnStack& stack,
                  const DropoutSpec* dropout = nullptr, StackCache* cache = nullptr);

// Accumulates weight gradients into `weight_grads` and, when requested, the
// gradient with respect to the normalized adjacency. Returns dL/dX.
Matrix GcnBackward(const Matrix& normalized, const GcnStack& stack,
                   const StackCache& cache, const Matrix& grad_out,
                   std::vector<Matrix>& weight_grads, Matrix* grad_normalized);

Matrix RowSoftmax(const Matrix& logits);

struct PoolOutput {
  Matrix x_next;  // S^T Z
  Matrix a_next;  // S^T A S
  Matrix assign;  // S
};

PoolOutput Coarsen(const Matrix& assign, const Matrix& embedded,
                   const Matrix& adjacency);

// One hierarchy level: embed and pool stacks on (A, X), softmax assignment
// over the first n_next pool columns, then coarsening.
PoolOutput DiffPool(const Matrix& adjacency, const Matrix& x, const GcnLevel& level,
                    Eigen::Index n_next, const DropoutSpec* embed_dropout = nullptr,
                    const DropoutSpec* pool_dropout = nullptr,
                    LevelCache* cache = nullptr);

struct EncodeOptions {
  bool train = false;
  double dropout = 0.5;
  std::mt19937_64* rng = nullptr;  // required when train && dropout > 0
};

// y = tanh(maxpool(X^(L)) W_h + b_h).
RowVector EncodeGraph(const Matrix& adjacency, const Matrix& features,
                      const GcnHashParams& params, const EncodeOptions& options = {},
                      ForwardCache* cache = nullptr);
RowVector EncodeGraph(const TissueGraph& graph, const GcnHashParams& params,
                      const EncodeOptions& options = {},
                      ForwardCache* cache = nullptr);

// Accumulates dL/dparams into `grads` (same shapes as params).
void EncodeGraphBackward(const GcnHashParams& params, const ForwardCache& cache,
                         const RowVector& grad_y, GcnHashParams& grads);

// Component-wise sign with sign(0) = +1.
std::vector<std::int8_t> Binarize(const RowVector& y);

// Checkpoint ("GHCK"): dims header then every tensor in ForEachTensor order as
// little-endian f64.
void SaveCheckpoint(const GcnHashParams& params, const std::filesystem::path& path);
GcnHashParams LoadCheckpoint(const std::filesystem::path& path);

template <typename F>
void GcnHashParams::ForEachTensor(F&& f) {
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const std::string prefix = "level" + std::to_string(l);
    for (std::size_t k = 0; k < levels[l].embed.weights.size(); ++k) {
      auto& w = levels[l].embed.weights[k];
      f(prefix + ".embed.w" + std::to_string(k), TensorClass::kEmbed,
        std::span<double>(w.data(), static_cast<std::size_t>(w.size())));
    }
    for (std::size_t k = 0; k < levels[l].pool.weights.size(); ++k) {
      auto& w = levels[l].pool.weights[k];
      f(prefix + ".pool.w" + std::to_string(k), TensorClass::kPool,
        std::span<double>(w.data(), static_cast<std::size_t>(w.size())));
    }
  }
  f(std::string("hash_w"), TensorClass::kHashWeight,
    std::span<double>(hash_w.data(), static_cast<std::size_t>(hash_w.size())));
  f(std::string("hash_b"), TensorClass::kHashBias,
    std::span<double>(hash_b.data(), static_cast<std::size_t>(hash_b.size())));
}

template <typename F>
void GcnHashParams::ForEachTensor(F&& f) const {
  const_cast<GcnHashParams*>(this)->ForEachTensor(
      [&](const std::string& name, TensorClass c, std::span<double> values) {
        f(name, c, std::span<const double>(values.data(), values.size()));
      });
}

}  // namespace gcnhash

#endif  // GCNHASH_GCN_H_
