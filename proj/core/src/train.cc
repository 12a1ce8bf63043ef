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

#include "gcnhash/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gcnhash/binary_io.h"
#include "gcnhash/error.h"
#include "gcnhash/log.h"
#include "gcnhash/seed.h"

namespace gcnhash {
namespace {

constexpr std::string_view kTrainKeys[] = {
    "preset",        "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "batch_size",
    "epochs",        "lambda",     "seed",       "dropout",  "stratified",
    "L",             "K",          "d",          "alpha",    "d_h",
    "n_max",         "pool_dropout"};

std::vector<GraphLabel> LabelsOf(GraphBatch batch) {
  std::vector<GraphLabel> labels;
  labels.reserve(batch.size());
  for (const auto* g : batch) labels.push_back(g->label);
  return labels;
}

// Orders indices so each class is spread evenly along the epoch.
std::vector<const TissueGraph*> StratifiedOrder(
    const std::vector<const TissueGraph*>& graphs, std::mt19937_64& rng) {
  std::vector<const TissueGraph*> by_class[2];
  for (const auto* g : graphs) {
    by_class[g->label == GraphLabel::kCancerous ? 1 : 0].push_back(g);
  }
  struct Slot {
    double position;
    int cls;
    const TissueGraph* graph;
  };
  std::vector<Slot> slots;
  for (int c = 0; c < 2; ++c) {
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    const auto n = static_cast<double>(by_class[c].size());
    for (std::size_t k = 0; k < by_class[c].size(); ++k) {
      slots.push_back({(static_cast<double>(k) + 0.5) / n, c, by_class[c][k]});
    }
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    return std::tie(a.position, a.cls) < std::tie(b.position, b.cls);
  });
  std::vector<const TissueGraph*> order;
  for (const auto& s : slots) order.push_back(s.graph);
  return order;
}

}  // namespace

PairwiseLabels PairwiseLabelMatrix(std::span<const GraphLabel> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == GraphLabel::kExcluded) {
      throw DataError("pairwise labels: graph " + std::to_string(i) +
                      " carries the excluded label");
    }
  }
  PairwiseLabels out;
  out.c.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out.c(i, j) = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]
                        ? 1.0
                        : -1.0;
    }
  }
  return out;
}

HashLossGradient HashLossWithGradient(const Matrix& y, const PairwiseLabels& labels,
                                      const Matrix& hash_w, double lambda) {
  const auto n = y.rows();
  const auto bits = y.cols();
  if (n == 0) throw DataError("hash loss: empty batch");
  if (labels.c.rows() != n || labels.c.cols() != n) {
    throw DataError("hash loss: label matrix is not N x N");
  }
  if (hash_w.cols() != bits) throw DataError("hash loss: W_h columns do not match d_h");
  if (lambda < 0.0) throw ConfigError("hash loss: lambda must be >= 0");

  const double inv_bits = 1.0 / static_cast<double>(bits);
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix residual = inv_bits * (y * y.transpose()) - labels.c;
  const Matrix gram = hash_w.transpose() * hash_w -
                      Matrix::Identity(hash_w.cols(), hash_w.cols());

  HashLossGradient out;
  out.loss = inv_n * residual.squaredNorm() + lambda * gram.squaredNorm();
  out.grad_y = (2.0 * inv_n * inv_bits) * ((residual + residual.transpose()) * y);
  out.grad_hash_w = (2.0 * lambda) * (hash_w * (gram + gram.transpose()));
  return out;
}

double HashLoss(const Matrix& y, const PairwiseLabels& labels, const Matrix& hash_w,
                double lambda) {
  return HashLossWithGradient(y, labels, hash_w, lambda).loss;
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must be in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be > 0");
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (!(lambda >= 0.0)) throw ConfigError("train: lambda must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must be in [0,1)");
}

std::span<const std::string_view> TrainConfig::Keys() { return kTrainKeys; }

TrainConfig TrainConfig::Preset(std::string_view name) {
  TrainConfig c;
  if (name == "acdc") return c;
  if (name == "camelyon") {
    c.dims.embed_dim = 100;
    c.lambda = 0.05;
    return c;
  }
  throw ConfigError("train: unknown preset '" + std::string(name) + "'");
}

TrainConfig TrainConfig::FromConfig(const KeyValueConfig& config) {
  TrainConfig c = Preset(config.GetString("preset", "acdc"));
  c.learning_rate = config.GetDouble("learning_rate", c.learning_rate);
  c.adam_beta1 = config.GetDouble("adam_beta1", c.adam_beta1);
  c.adam_beta2 = config.GetDouble("adam_beta2", c.adam_beta2);
  c.adam_eps = config.GetDouble("adam_eps", c.adam_eps);
  const auto batch = config.GetInt("batch_size", static_cast<std::int64_t>(c.batch_size));
  const auto epochs = config.GetInt("epochs", static_cast<std::int64_t>(c.epochs));
  if (batch < 0 || epochs < 0) throw ConfigError("train: negative batch_size or epochs");
  c.batch_size = static_cast<std::size_t>(batch);
  c.epochs = static_cast<std::size_t>(epochs);
  c.lambda = config.GetDouble("lambda", c.lambda);
  c.seed = static_cast<std::uint64_t>(config.GetInt("seed", static_cast<std::int64_t>(c.seed)));
  c.dropout = config.GetDouble("dropout", c.dropout);
  c.stratified = config.GetBool("stratified", c.stratified);
  c.dims.levels = static_cast<int>(config.GetInt("L", c.dims.levels));
  c.dims.steps = static_cast<int>(config.GetInt("K", c.dims.steps));
  c.dims.embed_dim = static_cast<int>(config.GetInt("d", c.dims.embed_dim));
  c.dims.pool_ratio = config.GetDouble("alpha", c.dims.pool_ratio);
  c.dims.code_bits = static_cast<int>(config.GetInt("d_h", c.dims.code_bits));
  c.dims.max_nodes = static_cast<int>(config.GetInt("n_max", c.dims.max_nodes));
  c.dims.pool_dropout = config.GetBool("pool_dropout", c.dims.pool_dropout);
  c.Validate();
  return c;
}

BatchGradients LossGradients(GraphBatch batch, const GcnHashParams& params,
                             const TrainConfig& config, std::mt19937_64* rng) {
  if (batch.size() < 2) throw DataError("LossGradients: batch needs at least 2 graphs");
  const auto labels = LabelsOf(batch);
  const auto pairwise = PairwiseLabelMatrix(labels);

  EncodeOptions options;
  options.train = rng != nullptr && config.dropout > 0.0;
  options.dropout = config.dropout;
  options.rng = rng;

  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<ForwardCache> caches(batch.size());
  Matrix y(n, params.dims.code_bits);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    y.row(i) = EncodeGraph(*batch[k], params, options, &caches[k]);
  }
  const auto loss = HashLossWithGradient(y, pairwise, params.hash_w, config.lambda);

  BatchGradients out;
  out.loss = loss.loss;
  out.grads = GcnHashParams::Zeros(params.dims);
  out.grads.hash_w += loss.grad_hash_w;
  // Fixed summation order: graphs are accumulated in batch order.
  for (Eigen::Index i = 0; i < n; ++i) {
    EncodeGraphBackward(params, caches[static_cast<std::size_t>(i)], loss.grad_y.row(i),
                        out.grads);
  }
  if (!std::isfinite(out.loss)) throw NumericError("LossGradients: non-finite loss");
  out.grads.ForEachTensor([](const std::string& name, TensorClass, std::span<const double> v) {
    for (double x : v) {
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in " + name);
    }
  });
  return out;
}

double BatchLoss(GraphBatch batch, const GcnHashParams& params, double lambda) {
  const auto labels = LabelsOf(batch);
  const auto pairwise = PairwiseLabelMatrix(labels);
  Matrix y(static_cast<Eigen::Index>(batch.size()), params.dims.code_bits);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y.row(static_cast<Eigen::Index>(i)) = EncodeGraph(*batch[i], params);
  }
  return HashLoss(y, pairwise, params.hash_w, lambda);
}

namespace {

using ExtMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

struct ExtendedEval {
  long double loss = 0.0L;
  std::uint64_t pattern = 0;  // ReLU on/off states and readout argmax rows
};

void MixPattern(std::uint64_t& hash, std::uint64_t value) {
  hash = Fnv1a64(std::string_view(reinterpret_cast<const char*>(&value), sizeof value), hash);
}

ExtMatrix ExtendedStack(const ExtMatrix& normalized, ExtMatrix h, const GcnStack& stack,
                        std::uint64_t& pattern) {
  for (const auto& w : stack.weights) {
    const ExtMatrix pre = normalized * h * w.cast<long double>();
    for (Eigen::Index i = 0; i < pre.size(); ++i) MixPattern(pattern, pre.data()[i] > 0.0L);
    h = pre.cwiseMax(0.0L);
  }
  return h;
}

// Loss evaluation in extended precision for the finite-difference oracle.
// Mirrors EncodeGraph and HashLoss with dropout off.
ExtendedEval ExtendedBatchLoss(GraphBatch batch, const GcnHashParams& params, double lambda) {
  ExtendedEval eval;
  eval.pattern = Fnv1a64("pattern");
  const auto d_h = static_cast<Eigen::Index>(params.dims.code_bits);
  ExtMatrix y(static_cast<Eigen::Index>(batch.size()), d_h);
  for (std::size_t g = 0; g < batch.size(); ++g) {
    ExtMatrix a = batch[g]->adjacency.Dense().cast<long double>();
    ExtMatrix x = batch[g]->node_features.cast<long double>();
    for (const auto& level : params.levels) {
      const auto live = static_cast<Eigen::Index>(
          ClusterCount(static_cast<std::size_t>(a.rows()), params.dims.pool_ratio));
      const Eigen::Index n_next = std::min(live, level.pool.output_width());
      ExtMatrix tilde = a;
      tilde.diagonal().array() += 1.0L;
      const Eigen::Matrix<long double, Eigen::Dynamic, 1> inv_sqrt =
          tilde.rowwise().sum().array().sqrt().inverse();
      const ExtMatrix normalized = inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
      const ExtMatrix z = ExtendedStack(normalized, x, level.embed, eval.pattern);
      const ExtMatrix logits = ExtendedStack(normalized, x, level.pool, eval.pattern).leftCols(n_next);
      ExtMatrix s(logits.rows(), logits.cols());
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        s.row(i) = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
        s.row(i) /= s.row(i).sum();
      }
      x = s.transpose() * z;
      a = s.transpose() * (a * s);
    }
    Eigen::Matrix<long double, 1, Eigen::Dynamic> readout(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Eigen::Index row = 0;
      readout[j] = x.col(j).maxCoeff(&row);
      MixPattern(eval.pattern, static_cast<std::uint64_t>(row));
    }
    const auto pre = readout * params.hash_w.cast<long double>() +
                     params.hash_b.cast<long double>();
    y.row(static_cast<Eigen::Index>(g)) = pre.array().tanh().matrix();
  }
  const auto labels = LabelsOf(batch);
  const ExtMatrix c = PairwiseLabelMatrix(labels).c.cast<long double>();
  const ExtMatrix w = params.hash_w.cast<long double>();
  const long double n = static_cast<long double>(batch.size());
  const ExtMatrix r = y * y.transpose() / static_cast<long double>(d_h) - c;
  const ExtMatrix m = w.transpose() * w - ExtMatrix::Identity(d_h, d_h);
  eval.loss = r.squaredNorm() / n + static_cast<long double>(lambda) * m.squaredNorm();
  return eval;
}

}  // namespace

GradientCheckReport FiniteDiffCheck(const GcnHashParams& params, GraphBatch batch,
                                    double lambda, double step,
                                    std::size_t samples_per_class, std::uint64_t seed) {
  TrainConfig config;
  config.lambda = lambda;
  config.dropout = 0.0;
  const auto analytic = LossGradients(batch, params, config, nullptr).grads;

  GcnHashParams work = params;
  struct Coordinate {
    double* value;
    double gradient;
  };
  std::map<TensorClass, std::vector<Coordinate>> by_class;
  std::vector<std::span<const double>> grad_spans;
  analytic.ForEachTensor([&](const std::string&, TensorClass, std::span<const double> v) {
    grad_spans.push_back(v);
  });
  std::size_t tensor = 0;
  work.ForEachTensor([&](const std::string&, TensorClass cls, std::span<double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      by_class[cls].push_back({&v[i], grad_spans[tensor][i]});
    }
    ++tensor;
  });

  const std::uint64_t base_pattern = ExtendedBatchLoss(batch, work, lambda).pattern;
  GradientCheckReport report;
  std::mt19937_64 rng(seed);
  for (auto& [cls, coords] : by_class) {
    std::shuffle(coords.begin(), coords.end(), rng);
    std::size_t checked = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < coords.size() && checked < samples_per_class; ++i) {
      double* value = coords[i].value;
      const double original = *value;
      *value = original + step;
      const auto plus = ExtendedBatchLoss(batch, work, lambda);
      *value = original - step;
      const auto minus = ExtendedBatchLoss(batch, work, lambda);
      *value = original;
      // The stencil straddles a ReLU or max-readout switch: the loss is not
      // differentiable there, so draw another coordinate.
      if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
        ++report.skipped;
        continue;
      }
      const double numeric =
          static_cast<double>((plus.loss - minus.loss) / (2.0L * static_cast<long double>(step)));
      const double error = std::abs(coords[i].gradient - numeric) /
                           std::max(std::abs(numeric), 1e-8);
      worst = std::max(worst, error);
      report.max_abs_gradient = std::max(report.max_abs_gradient, std::abs(coords[i].gradient));
      ++checked;
    }
    report.per_class[cls] = worst;
    report.coordinates[cls] = checked;
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  return report;
}

AdamOptimizer::AdamOptimizer(const GcnHashParams& shape, double learning_rate,
                             double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  shape.ForEachTensor([&](const std::string&, TensorClass, std::span<const double> v) {
    m_.emplace_back(v.size(), 0.0);
    v_.emplace_back(v.size(), 0.0);
  });
}

void AdamOptimizer::Step(GcnHashParams& params, const GcnHashParams& grads) {
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<std::span<const double>> g;
  grads.ForEachTensor([&](const std::string&, TensorClass, std::span<const double> v) {
    g.push_back(v);
  });
  std::size_t tensor = 0;
  params.ForEachTensor([&](const std::string& name, TensorClass, std::span<double> p) {
    if (tensor >= g.size() || g[tensor].size() != p.size()) {
      throw ConfigError("Adam: gradient shape mismatch at " + name);
    }
    auto& m = m_[tensor];
    auto& v = v_[tensor];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[tensor][i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
    ++tensor;
  });
}

TrainResult Train(std::span<const TissueGraph> graphs, const TrainConfig& config,
                  const GcnHashParams* initial) {
  config.Validate();
  std::vector<const TissueGraph*> usable;
  for (const auto& g : graphs) {
    if (g.label != GraphLabel::kExcluded) usable.push_back(&g);
  }
  if (usable.size() < 2) throw DataError("Train: need at least 2 labeled graphs");
  const auto feature_dim = usable.front()->node_features.cols();
  bool has_cancerous = false;
  bool has_cancer_free = false;
  for (const auto* g : usable) {
    if (g->node_features.cols() != feature_dim) {
      throw DataError("Train: graph '" + g->graph_id + "' has a different feature width");
    }
    (g->label == GraphLabel::kCancerous ? has_cancerous : has_cancer_free) = true;
  }
  if (!(has_cancerous && has_cancer_free)) {
    LogWarning("Train: training set holds a single class; the pairwise loss is degenerate");
  }

  ModelDims dims = config.dims;
  if (dims.feature_dim == 0) dims.feature_dim = static_cast<int>(feature_dim);
  if (dims.feature_dim != feature_dim) {
    throw DataError("Train: model d_f does not match graph features");
  }

  TrainResult result;
  if (initial != nullptr) {
    initial->Validate();
    if (initial->dims.feature_dim != dims.feature_dim) {
      throw DataError("Train: initial parameters have a different d_f");
    }
    result.params = *initial;
  } else {
    result.params = GcnHashParams::Initialize(dims, DeriveSeed(config.seed, "train/init"));
  }

  std::mt19937_64 shuffle_rng(DeriveSeed(config.seed, "train/shuffle"));
  std::mt19937_64 dropout_rng(DeriveSeed(config.seed, "train/dropout"));
  std::mt19937_64* dropout = config.dropout > 0.0 ? &dropout_rng : nullptr;
  AdamOptimizer adam(result.params, config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<const TissueGraph*> order;
    if (config.stratified) {
      order = StratifiedOrder(usable, shuffle_rng);
    } else {
      order = usable;
      std::shuffle(order.begin(), order.end(), shuffle_rng);
    }
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batches.emplace_back(start, std::min(order.size(), start + config.batch_size));
    }
    // A trailing singleton cannot form a pair; fold it into the previous batch.
    if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    double epoch_loss = 0.0;
    for (const auto& [begin, end] : batches) {
      GraphBatch batch(order.data() + begin, end - begin);
      BatchGradients step;
      try {
        step = LossGradients(batch, result.params, config, dropout);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " +
                           e.what());
      }
      adam.Step(result.params, step.grads);
      epoch_loss += step.loss;
    }
    epoch_loss /= static_cast<double>(batches.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    }
    result.history.push_back(epoch_loss);
    if (Verbose() && (epoch % 10 == 0 || epoch + 1 == config.epochs)) {
      LogInfo("epoch " + std::to_string(epoch) + " loss " + std::to_string(epoch_loss));
    }
  }
  return result;
}

void WriteHistoryCsv(const std::vector<double>& history,
                     const std::filesystem::path& path) {
  std::string text = "epoch,loss\n";
  char line[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.17g\n", i, history[i]);
    text += line;
  }
  WriteFileBytes(path, text);
}

}  // namespace gcnhash
