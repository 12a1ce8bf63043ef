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

#include "gcnhash/gcn.h"

#include <algorithm>
#include <cmath>

#include "gcnhash/binary_io.h"
#include "gcnhash/error.h"

namespace gcnhash {
namespace {

constexpr std::string_view kCheckpointMagic = "GHCK";
constexpr std::uint32_t kCheckpointVersion = 1;

GcnStack MakeStack(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, int steps) {
  GcnStack stack;
  for (int k = 0; k < steps; ++k) {
    const Eigen::Index rows = k == 0 ? in : hidden;
    const Eigen::Index cols = k == steps - 1 ? out : hidden;
    stack.weights.push_back(Matrix::Zero(rows, cols));
  }
  return stack;
}

void RequireFinite(const Matrix& m, const char* what, std::size_t step) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite activation in ") + what + " step " +
                       std::to_string(step));
  }
}

void GlorotFill(Matrix& w, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  // Row-major fill so the draw order matches the checkpoint layout.
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  }
}

void PutMatrix(ByteWriter& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.PutF64(m(i, j));
  }
}

void GetMatrix(ByteReader& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = in.GetF64("weights");
  }
}

}  // namespace

void GcnStack::Validate(std::string_view name) const {
  if (weights.empty()) throw ConfigError(std::string(name) + ": empty GCN stack");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (k > 0 && weights[k].rows() != weights[k - 1].cols()) {
      throw ConfigError(std::string(name) + ": weight " + std::to_string(k) +
                        " does not chain with its predecessor");
    }
    if (!weights[k].allFinite()) {
      throw NumericError(std::string(name) + ": non-finite weight " + std::to_string(k));
    }
  }
}

void ModelDims::Validate() const {
  if (levels < 1) throw ConfigError("model: L must be >= 1");
  if (steps < 1) throw ConfigError("model: K must be >= 1");
  if (embed_dim < 1) throw ConfigError("model: d must be >= 1");
  if (!(pool_ratio > 0.0 && pool_ratio <= 1.0)) {
    throw ConfigError("model: alpha must be in (0, 1]");
  }
  if (code_bits < 1) throw ConfigError("model: d_h must be >= 1");
  if (feature_dim < 1) throw ConfigError("model: d_f must be >= 1");
  if (max_nodes < 1) throw ConfigError("model: n_max must be >= 1");
}

std::vector<Eigen::Index> ModelDims::PoolWidths() const {
  std::vector<Eigen::Index> widths;
  std::size_t n = static_cast<std::size_t>(max_nodes);
  for (int l = 0; l < levels; ++l) {
    n = ClusterCount(n, pool_ratio);
    widths.push_back(static_cast<Eigen::Index>(n));
  }
  return widths;
}

std::size_t ClusterCount(std::size_t n, double ratio) {
  // The small slack keeps e.g. 0.2 * 50 from rounding up to 11.
  const double scaled = ratio * static_cast<double>(n);
  const auto c = static_cast<std::size_t>(std::ceil(scaled - 1e-9));
  return std::max<std::size_t>(1, c);
}

std::string_view TensorClassName(TensorClass c) {
  switch (c) {
    case TensorClass::kEmbed:
      return "embed";
    case TensorClass::kPool:
      return "pool";
    case TensorClass::kHashWeight:
      return "hash_w";
    case TensorClass::kHashBias:
      return "hash_b";
  }
  return "unknown";
}

GcnHashParams GcnHashParams::Zeros(const ModelDims& dims) {
  dims.Validate();
  GcnHashParams p;
  p.dims = dims;
  const auto widths = dims.PoolWidths();
  for (int l = 0; l < dims.levels; ++l) {
    const Eigen::Index in = l == 0 ? dims.feature_dim : dims.embed_dim;
    GcnLevel level;
    level.embed = MakeStack(in, dims.embed_dim, dims.embed_dim, dims.steps);
    level.pool = MakeStack(in, dims.embed_dim, widths[l], dims.steps);
    p.levels.push_back(std::move(level));
  }
  p.hash_w = Matrix::Zero(dims.embed_dim, dims.code_bits);
  p.hash_b = RowVector::Zero(dims.code_bits);
  return p;
}

GcnHashParams GcnHashParams::Initialize(const ModelDims& dims, std::uint64_t seed) {
  auto p = Zeros(dims);
  std::mt19937_64 rng(seed);
  for (auto& level : p.levels) {
    for (auto& w : level.embed.weights) GlorotFill(w, rng);
    for (auto& w : level.pool.weights) GlorotFill(w, rng);
  }
  GlorotFill(p.hash_w, rng);
  return p;
}

void GcnHashParams::Validate() const {
  dims.Validate();
  if (levels.size() != static_cast<std::size_t>(dims.levels)) {
    throw ConfigError("params: level count does not match L");
  }
  const auto reference = Zeros(dims);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto name = "level" + std::to_string(l);
    levels[l].embed.Validate(name + ".embed");
    levels[l].pool.Validate(name + ".pool");
    auto same_shapes = [](const GcnStack& a, const GcnStack& b) {
      if (a.weights.size() != b.weights.size()) return false;
      for (std::size_t k = 0; k < a.weights.size(); ++k) {
        if (a.weights[k].rows() != b.weights[k].rows() ||
            a.weights[k].cols() != b.weights[k].cols()) {
          return false;
        }
      }
      return true;
    };
    if (!same_shapes(levels[l].embed, reference.levels[l].embed) ||
        !same_shapes(levels[l].pool, reference.levels[l].pool)) {
      throw ConfigError("params: " + name + " shapes do not match dims");
    }
  }
  if (hash_w.rows() != dims.embed_dim || hash_w.cols() != dims.code_bits ||
      hash_b.size() != dims.code_bits) {
    throw ConfigError("params: hash head shape does not match dims");
  }
  if (!hash_w.allFinite() || !hash_b.allFinite()) {
    throw NumericError("params: non-finite hash head");
  }
}

std::size_t GcnHashParams::ParameterCount() const {
  std::size_t total = 0;
  ForEachTensor([&](const std::string&, TensorClass, std::span<const double> v) {
    total += v.size();
  });
  return total;
}

Matrix NormalizeAdjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw DataError("NormalizeAdjacency: matrix is not square");
  }
  if (adjacency.size() > 0) {
    if (adjacency.minCoeff() < 0.0) {
      throw DataError("NormalizeAdjacency: negative entry");
    }
    const double scale = 1.0 + adjacency.cwiseAbs().maxCoeff();
    if ((adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw DataError("NormalizeAdjacency: matrix is not symmetric");
    }
  }
  Matrix tilde = adjacency;
  tilde.diagonal().array() += 1.0;
  const Eigen::VectorXd inv_sqrt = tilde.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
}

Matrix NormalizeAdjacency(const PatchAdjacency& adjacency) {
  return NormalizeAdjacency(adjacency.Dense());
}

Matrix NormalizeAdjacencyBackward(const Matrix& adjacency,
                                  const Matrix& grad_normalized) {
  Matrix tilde = adjacency;
  tilde.diagonal().array() += 1.0;
  const Eigen::VectorXd degree = tilde.rowwise().sum();
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  const Matrix normalized = inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
  // N_ij = T_ij s_i s_j with s = d^-1/2 and d_i = sum_j T_ij.
  Matrix grad = grad_normalized.cwiseProduct(inv_sqrt * inv_sqrt.transpose());
  const Matrix weighted = grad_normalized.cwiseProduct(normalized);
  const Eigen::VectorXd grad_degree =
      (-0.5 * (weighted.rowwise().sum() + weighted.colwise().sum().transpose()).array() /
       degree.array())
          .matrix();
  grad.colwise() += grad_degree;
  return grad;
}

Matrix GcnForward(const Matrix& normalized, const Matrix& x, const GcnStack& stack,
                  const DropoutSpec* dropout, StackCache* cache) {
  if (stack.weights.empty()) throw ConfigError("GcnForward: empty stack");
  if (normalized.rows() != normalized.cols() || normalized.rows() != x.rows()) {
    throw DataError("GcnForward: adjacency/feature row mismatch");
  }
  if (x.cols() != stack.input_width()) {
    throw DataError("GcnForward: feature width " + std::to_string(x.cols()) +
                    " does not match stack input width " +
                    std::to_string(stack.input_width()));
  }
  const bool drop = dropout != nullptr && dropout->probability > 0.0;
  if (drop && dropout->rng == nullptr) throw ConfigError("GcnForward: dropout without rng");
  if (cache != nullptr) *cache = StackCache{};

  Matrix h = x;
  for (std::size_t k = 0; k < stack.weights.size(); ++k) {
    Matrix propagated = normalized * h;
    Matrix pre = propagated * stack.weights[k];
    Matrix out = pre.cwiseMax(0.0);
    Matrix mask;
    if (drop) {
      const double keep = 1.0 - dropout->probability;
      std::bernoulli_distribution survive(keep);
      mask.resize(out.rows(), out.cols());
      for (Eigen::Index j = 0; j < mask.cols(); ++j) {
        for (Eigen::Index i = 0; i < mask.rows(); ++i) {
          mask(i, j) = survive(*dropout->rng) ? 1.0 / keep : 0.0;
        }
      }
      out = out.cwiseProduct(mask);
    }
    RequireFinite(out, "GCN", k);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->propagated.push_back(std::move(propagated));
      cache->preactivations.push_back(std::move(pre));
      cache->masks.push_back(std::move(mask));
    }
    h = std::move(out);
  }
  return h;
}

Matrix GcnBackward(const Matrix& normalized, const GcnStack& stack,
                   const StackCache& cache, const Matrix& grad_out,
                   std::vector<Matrix>& weight_grads, Matrix* grad_normalized) {
  Matrix g = grad_out;
  for (std::size_t k = stack.weights.size(); k-- > 0;) {
    if (cache.masks[k].size() > 0) g = g.cwiseProduct(cache.masks[k]);
    g = (cache.preactivations[k].array() > 0.0).select(g, 0.0);
    weight_grads[k].noalias() += cache.propagated[k].transpose() * g;
    const Matrix grad_propagated = g * stack.weights[k].transpose();
    if (grad_normalized != nullptr) {
      grad_normalized->noalias() += grad_propagated * cache.inputs[k].transpose();
    }
    g = normalized.transpose() * grad_propagated;
  }
  return g;
}

Matrix RowSoftmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - peak).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

PoolOutput Coarsen(const Matrix& assign, const Matrix& embedded, const Matrix& adjacency) {
  if (assign.rows() != embedded.rows() || assign.rows() != adjacency.rows() ||
      adjacency.rows() != adjacency.cols()) {
    throw DataError("Coarsen: shape mismatch");
  }
  PoolOutput out;
  out.x_next = assign.transpose() * embedded;
  out.a_next = assign.transpose() * (adjacency * assign);
  out.assign = assign;
  return out;
}

PoolOutput DiffPool(const Matrix& adjacency, const Matrix& x, const GcnLevel& level,
                    Eigen::Index n_next, const DropoutSpec* embed_dropout,
                    const DropoutSpec* pool_dropout, LevelCache* cache) {
  const Eigen::Index n = adjacency.rows();
  if (n_next < 1 || n_next > n) {
    throw DataError("DiffPool: n_next=" + std::to_string(n_next) + " must be in [1, " +
                    std::to_string(n) + "]");
  }
  if (n_next > level.pool.output_width()) {
    throw DataError("DiffPool: n_next exceeds pool stack width");
  }
  Matrix normalized = NormalizeAdjacency(adjacency);
  StackCache* embed_cache = cache ? &cache->embed : nullptr;
  StackCache* pool_cache = cache ? &cache->pool : nullptr;
  Matrix embedded = GcnForward(normalized, x, level.embed, embed_dropout, embed_cache);
  Matrix pooled = GcnForward(normalized, x, level.pool, pool_dropout, pool_cache);
  Matrix logits = pooled.leftCols(n_next);
  PoolOutput out = Coarsen(RowSoftmax(logits), embedded, adjacency);
  if (cache != nullptr) {
    cache->adjacency = adjacency;
    cache->normalized = std::move(normalized);
    cache->input = x;
    cache->embedded = std::move(embedded);
    cache->logits = std::move(logits);
    cache->assign = out.assign;
    cache->x_next = out.x_next;
    cache->a_next = out.a_next;
  }
  return out;
}

RowVector EncodeGraph(const Matrix& adjacency, const Matrix& features,
                      const GcnHashParams& params, const EncodeOptions& options,
                      ForwardCache* cache) {
  const auto& dims = params.dims;
  if (features.rows() < 1) throw DataError("EncodeGraph: graph has no nodes");
  if (features.cols() != dims.feature_dim) {
    throw DataError("EncodeGraph: feature width " + std::to_string(features.cols()) +
                    " does not match model d_f=" + std::to_string(dims.feature_dim));
  }
  if (adjacency.rows() != features.rows()) {
    throw DataError("EncodeGraph: adjacency/feature size mismatch");
  }
  DropoutSpec spec{options.train ? options.dropout : 0.0, options.rng};
  const DropoutSpec* embed_dropout = spec.probability > 0.0 ? &spec : nullptr;
  const DropoutSpec* pool_dropout = dims.pool_dropout ? embed_dropout : nullptr;
  if (embed_dropout != nullptr && spec.rng == nullptr) {
    throw ConfigError("EncodeGraph: training with dropout needs an rng");
  }

  if (cache != nullptr) *cache = ForwardCache{};
  Matrix a = adjacency;
  Matrix x = features;
  for (std::size_t l = 0; l < params.levels.size(); ++l) {
    const auto& level = params.levels[l];
    const auto live = static_cast<Eigen::Index>(
        ClusterCount(static_cast<std::size_t>(a.rows()), dims.pool_ratio));
    const Eigen::Index n_next = std::min(live, level.pool.output_width());
    LevelCache* level_cache = nullptr;
    if (cache != nullptr) level_cache = &cache->levels.emplace_back();
    auto out = DiffPool(a, x, level, n_next, embed_dropout, pool_dropout, level_cache);
    a = std::move(out.a_next);
    x = std::move(out.x_next);
  }

  RowVector z(x.cols());
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::Index best = 0;
    z[j] = x.col(j).maxCoeff(&best);
    rows[static_cast<std::size_t>(j)] = best;
  }
  RowVector pre = z * params.hash_w + params.hash_b;
  RowVector y = pre.array().tanh().matrix();
  if (!y.allFinite()) throw NumericError("EncodeGraph: non-finite hash output");
  if (cache != nullptr) {
    cache->readout_rows = std::move(rows);
    cache->readout = z;
    cache->pre_tanh = std::move(pre);
    cache->y = y;
  }
  return y;
}

RowVector EncodeGraph(const TissueGraph& graph, const GcnHashParams& params,
                      const EncodeOptions& options, ForwardCache* cache) {
  return EncodeGraph(graph.adjacency.Dense(), graph.node_features, params, options, cache);
}

void EncodeGraphBackward(const GcnHashParams& params, const ForwardCache& cache,
                         const RowVector& grad_y, GcnHashParams& grads) {
  const RowVector grad_pre =
      grad_y.cwiseProduct((1.0 - cache.y.array().square()).matrix());
  grads.hash_w.noalias() += cache.readout.transpose() * grad_pre;
  grads.hash_b += grad_pre;
  const RowVector grad_z = grad_pre * params.hash_w.transpose();

  const auto& last = cache.levels.back();
  Matrix grad_x = Matrix::Zero(last.x_next.rows(), last.x_next.cols());
  for (Eigen::Index j = 0; j < grad_z.size(); ++j) {
    grad_x(cache.readout_rows[static_cast<std::size_t>(j)], j) += grad_z[j];
  }
  Matrix grad_a = Matrix::Zero(last.a_next.rows(), last.a_next.cols());

  for (std::size_t l = cache.levels.size(); l-- > 0;) {
    const auto& lc = cache.levels[l];
    const auto& level = params.levels[l];
    auto& level_grads = grads.levels[l];
    const Matrix& s = lc.assign;

    // X' = S^T Z, A' = S^T A S.
    const Matrix grad_embedded = s * grad_x;
    Matrix grad_assign = lc.embedded * grad_x.transpose();
    grad_assign.noalias() += lc.adjacency * s * grad_a.transpose();
    grad_assign.noalias() += lc.adjacency.transpose() * s * grad_a;

    // Row softmax.
    const Eigen::VectorXd inner = grad_assign.cwiseProduct(s).rowwise().sum();
    const Matrix grad_logits =
        s.cwiseProduct((grad_assign.colwise() - inner));
    Matrix grad_pooled = Matrix::Zero(lc.pool.preactivations.back().rows(),
                                      lc.pool.preactivations.back().cols());
    grad_pooled.leftCols(grad_logits.cols()) = grad_logits;

    const bool need_adjacency = l > 0;
    Matrix grad_normalized;
    if (need_adjacency) grad_normalized = Matrix::Zero(lc.normalized.rows(), lc.normalized.cols());
    Matrix* grad_normalized_ptr = need_adjacency ? &grad_normalized : nullptr;

    Matrix grad_input = GcnBackward(lc.normalized, level.pool, lc.pool, grad_pooled,
                                    level_grads.pool.weights, grad_normalized_ptr);
    grad_input += GcnBackward(lc.normalized, level.embed, lc.embed, grad_embedded,
                              level_grads.embed.weights, grad_normalized_ptr);
    if (need_adjacency) {
      Matrix next_grad_a = s * grad_a * s.transpose();
      next_grad_a += NormalizeAdjacencyBackward(lc.adjacency, grad_normalized);
      grad_a = std::move(next_grad_a);
      grad_x = std::move(grad_input);
    }
  }
}

std::vector<std::int8_t> Binarize(const RowVector& y) {
  std::vector<std::int8_t> bits(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      throw NumericError("Binarize: non-finite entry at " + std::to_string(i));
    }
    bits[static_cast<std::size_t>(i)] = y[i] >= 0.0 ? 1 : -1;
  }
  return bits;
}

void SaveCheckpoint(const GcnHashParams& params, const std::filesystem::path& path) {
  params.Validate();
  const auto& d = params.dims;
  ByteWriter out;
  out.PutBytes(kCheckpointMagic);
  out.PutU32(kCheckpointVersion);
  out.PutU32(static_cast<std::uint32_t>(d.levels));
  out.PutU32(static_cast<std::uint32_t>(d.steps));
  out.PutU32(static_cast<std::uint32_t>(d.embed_dim));
  out.PutF64(d.pool_ratio);
  out.PutU32(static_cast<std::uint32_t>(d.code_bits));
  out.PutU32(static_cast<std::uint32_t>(d.feature_dim));
  out.PutU32(static_cast<std::uint32_t>(d.max_nodes));
  out.PutU8(d.pool_dropout ? 1 : 0);
  for (const auto& level : params.levels) {
    for (const auto& w : level.embed.weights) PutMatrix(out, w);
    for (const auto& w : level.pool.weights) PutMatrix(out, w);
  }
  PutMatrix(out, params.hash_w);
  PutMatrix(out, params.hash_b);
  WriteFileBytes(path, out.bytes());
}

GcnHashParams LoadCheckpoint(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  ByteReader in(bytes, path.string());
  if (in.remaining() < 4 || in.GetBytes(4, "magic") != kCheckpointMagic) {
    throw DataError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = in.GetU32("version");
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " +
                    std::to_string(version));
  }
  ModelDims d;
  d.levels = static_cast<int>(in.GetU32("L"));
  d.steps = static_cast<int>(in.GetU32("K"));
  d.embed_dim = static_cast<int>(in.GetU32("d"));
  d.pool_ratio = in.GetF64("alpha");
  d.code_bits = static_cast<int>(in.GetU32("d_h"));
  d.feature_dim = static_cast<int>(in.GetU32("d_f"));
  d.max_nodes = static_cast<int>(in.GetU32("n_max"));
  d.pool_dropout = in.GetU8("pool_dropout") != 0;
  try {
    d.Validate();
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": bad header: " + e.what());
  }
  auto params = GcnHashParams::Zeros(d);
  for (auto& level : params.levels) {
    for (auto& w : level.embed.weights) GetMatrix(in, w);
    for (auto& w : level.pool.weights) GetMatrix(in, w);
  }
  GetMatrix(in, params.hash_w);
  Matrix bias(1, d.code_bits);
  GetMatrix(in, bias);
  params.hash_b = bias.row(0);
  if (in.remaining() != 0) throw DataError(path.string() + ": trailing bytes");
  params.Validate();
  return params;
}

}  // namespace gcnhash
