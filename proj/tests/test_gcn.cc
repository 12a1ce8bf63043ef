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

#include <cmath>
#include <numeric>
#include <random>

#include "gcnhash/binary_io.h"
#include "gcnhash/gcn.h"
#include "support/expect.h"
#include "support/oracles.h"

namespace gcnhash {
namespace {

using testing::TempDir;
using testing::ThrowsWith;

Matrix RandomMatrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Matrix RandomSymmetricAdjacency(std::mt19937_64& rng, Eigen::Index n, bool weighted) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = u(rng);
      const double w = weighted ? v : (v < 0.4 ? 1.0 : 0.0);
      a(i, j) = a(j, i) = w;
    }
  }
  return a;
}

ModelDims SmallDims() {
  ModelDims d;
  d.levels = 2;
  d.steps = 2;
  d.embed_dim = 8;
  d.code_bits = 4;
  d.feature_dim = 5;
  d.max_nodes = 16;
  return d;
}

TEST(NormalizeAdjacency, IsolatedNode) {
  EXPECT_EQ(NormalizeAdjacency(Matrix::Zero(1, 1)), Matrix::Ones(1, 1));
}

TEST(NormalizeAdjacency, TwoConnectedNodes) {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  const Matrix n = NormalizeAdjacency(a);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(n.data()[i], 0.5);
}

TEST(NormalizeAdjacency, SymmetricAndMatchesReference) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = RandomSymmetricAdjacency(rng, 1 + t % 9, t % 2 == 0);
    const Matrix n = NormalizeAdjacency(a);
    EXPECT_LE((n - n.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((n - testing::OracleNormalize(a)).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < n.rows(); ++i) {
      EXPECT_GT(n(i, i), 0.0);
      EXPECT_LE(n(i, i), 1.0);
    }
  }
}

TEST(NormalizeAdjacency, RejectsBadInput) {
  Matrix asym(2, 2);
  asym << 0, 1, 0, 0;
  EXPECT_TRUE(ThrowsWith<DataError>([&] { NormalizeAdjacency(asym); }, "symmetric"));
  Matrix neg(2, 2);
  neg << 0, -1, -1, 0;
  EXPECT_TRUE(ThrowsWith<DataError>([&] { NormalizeAdjacency(neg); }, "negative"));
  EXPECT_THROW(NormalizeAdjacency(Matrix::Zero(2, 3)), DataError);
}

TEST(NormalizeAdjacency, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  const Matrix a = RandomSymmetricAdjacency(rng, 5, true);
  const Matrix g = RandomMatrix(rng, 5, 5);
  const Matrix analytic = NormalizeAdjacencyBackward(a, g);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) {
      Matrix p = a, m = a;
      p(i, j) += h;
      m(i, j) -= h;
      // Degrees are row sums, so a one-sided perturbation is well defined.
      const double numeric = (testing::OracleNormalize(p).cwiseProduct(g).sum() -
                              testing::OracleNormalize(m).cwiseProduct(g).sum()) /
                             (2 * h);
      EXPECT_NEAR(analytic(i, j), numeric, 1e-6) << i << "," << j;
    }
  }
}

TEST(GcnForward, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(3);
  GcnStack stack{{RandomMatrix(rng, 4, 6), RandomMatrix(rng, 6, 6)}};
  const Matrix out = GcnForward(NormalizeAdjacency(RandomSymmetricAdjacency(rng, 5, false)),
                                Matrix::Zero(5, 4), stack);
  EXPECT_TRUE(out.isZero(0.0));
}

TEST(GcnForward, IdentityOnSingleNode) {
  GcnStack stack{{Matrix::Identity(1, 1)}};
  const Matrix out = GcnForward(Matrix::Ones(1, 1), Matrix::Constant(1, 1, 2.5), stack);
  EXPECT_EQ(out(0, 0), 2.5);
}

TEST(GcnForward, MatchesStepByStepReference) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 3 + t % 4;
    const Matrix norm = NormalizeAdjacency(RandomSymmetricAdjacency(rng, n, t % 2 == 1));
    const Matrix x = RandomMatrix(rng, n, 3);
    GcnStack stack{{RandomMatrix(rng, 3, 4), RandomMatrix(rng, 4, 4)}};
    const Matrix out = GcnForward(norm, x, stack);
    const Matrix ref = testing::OracleGcnForward(norm, x, stack.weights);
    EXPECT_LE((out - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GcnForward, DropoutIsSeededAndRescaled) {
  std::mt19937_64 rng(5);
  const Matrix norm = NormalizeAdjacency(Matrix::Zero(40, 40));
  const Matrix x = Matrix::Ones(40, 50);
  GcnStack stack{{Matrix::Identity(50, 50)}};
  std::mt19937_64 r1(9), r2(9);
  DropoutSpec d1{0.5, &r1}, d2{0.5, &r2};
  const Matrix a = GcnForward(norm, x, stack, &d1);
  const Matrix b = GcnForward(norm, x, stack, &d2);
  EXPECT_EQ(a, b);
  int zeros = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    ASSERT_TRUE(v == 0.0 || v == 2.0);
    zeros += v == 0.0;
  }
  EXPECT_NEAR(zeros / 2000.0, 0.5, 0.05);
  DropoutSpec missing_rng{0.5, nullptr};
  EXPECT_THROW(GcnForward(norm, x, stack, &missing_rng), ConfigError);
}

TEST(GcnForward, ShapeAndFinitenessErrors) {
  GcnStack stack{{Matrix::Identity(2, 2)}};
  EXPECT_THROW(GcnForward(Matrix::Identity(3, 3), Matrix::Ones(3, 4), stack), DataError);
  EXPECT_THROW(GcnForward(Matrix::Identity(3, 3), Matrix::Ones(2, 2), stack), DataError);
  GcnStack huge{{Matrix::Constant(2, 2, 1e300), Matrix::Constant(2, 2, 1e300)}};
  EXPECT_THROW(GcnForward(Matrix::Identity(1, 1), Matrix::Constant(1, 2, 1e10), huge),
               NumericError);
}

TEST(DiffPool, IdentityAssignmentPreservesGraph) {
  const Eigen::Index n = 4;
  GcnLevel level{GcnStack{{Matrix::Identity(n, n)}}, GcnStack{{1000.0 * Matrix::Identity(n, n)}}};
  const Matrix x = Matrix::Identity(n, n);
  const auto out = DiffPool(Matrix::Zero(n, n), x, level, n);
  EXPECT_EQ(out.assign, Matrix::Identity(n, n));
  EXPECT_EQ(out.x_next, x);
  EXPECT_EQ(out.a_next, Matrix::Zero(n, n));

  std::mt19937_64 rng(6);
  const Matrix a = RandomSymmetricAdjacency(rng, n, true);
  const Matrix z = RandomMatrix(rng, n, 3);
  const auto coarse = Coarsen(Matrix::Identity(n, n), z, a);
  EXPECT_EQ(coarse.x_next, z);
  EXPECT_EQ(coarse.a_next, a);
}

TEST(DiffPool, AssignmentRowsAreDistributions) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 2 + t % 8;
    GcnLevel level{GcnStack{{RandomMatrix(rng, 3, 5), RandomMatrix(rng, 5, 5)}},
                   GcnStack{{RandomMatrix(rng, 3, 5), RandomMatrix(rng, 5, 4)}}};
    const Eigen::Index next = std::min<Eigen::Index>(n, 1 + t % 4);
    const Matrix a = RandomSymmetricAdjacency(rng, n, false);
    const auto out = DiffPool(a, RandomMatrix(rng, n, 3), level, next);
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_NEAR(out.assign.row(i).sum(), 1.0, 1e-12);
      for (Eigen::Index j = 0; j < next; ++j) {
        EXPECT_GT(out.assign(i, j), 0.0);
        EXPECT_LE(out.assign(i, j), 1.0);
      }
    }
    EXPECT_LE((out.a_next - out.a_next.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DiffPool, CoarseAdjacencyMatchesTripleProduct) {
  std::mt19937_64 rng(8);
  GcnLevel level{GcnStack{{RandomMatrix(rng, 3, 4)}}, GcnStack{{RandomMatrix(rng, 3, 2)}}};
  const Matrix a = RandomSymmetricAdjacency(rng, 4, false);
  const Matrix x = RandomMatrix(rng, 4, 3);
  const auto out = DiffPool(a, x, level, 2);
  EXPECT_LE((out.a_next - testing::OracleTripleProduct(out.assign, a)).cwiseAbs().maxCoeff(),
            1e-12);
  const Matrix z = GcnForward(NormalizeAdjacency(a), x, level.embed);
  EXPECT_LE((out.x_next - testing::OracleMatMul(testing::OracleTranspose(out.assign), z))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(DiffPool, RejectsBadClusterCount) {
  GcnLevel level{GcnStack{{Matrix::Identity(2, 2)}}, GcnStack{{Matrix::Identity(2, 2)}}};
  EXPECT_THROW(DiffPool(Matrix::Zero(2, 2), Matrix::Ones(2, 2), level, 3), DataError);
  EXPECT_THROW(DiffPool(Matrix::Zero(2, 2), Matrix::Ones(2, 2), level, 0), DataError);
  EXPECT_THROW(DiffPool(Matrix::Zero(3, 3), Matrix::Ones(3, 2), level, 3), DataError);
}

TEST(ClusterCount, Schedule) {
  EXPECT_EQ(ClusterCount(50, 0.2), 10u);
  EXPECT_EQ(ClusterCount(10, 0.2), 2u);
  EXPECT_EQ(ClusterCount(2, 0.2), 1u);
  EXPECT_EQ(ClusterCount(1, 0.2), 1u);
  EXPECT_EQ(ClusterCount(51, 0.2), 11u);
  EXPECT_EQ(ClusterCount(7, 1.0), 7u);
  ModelDims d;
  d.max_nodes = 50;
  EXPECT_EQ(d.PoolWidths(), (std::vector<Eigen::Index>{10, 2}));
}

TEST(Params, ShapesAndCounts) {
  const auto dims = SmallDims();
  const auto p = GcnHashParams::Initialize(dims, 1);
  p.Validate();
  ASSERT_EQ(p.levels.size(), 2u);
  EXPECT_EQ(p.levels[0].embed.weights[0].rows(), 5);
  EXPECT_EQ(p.levels[0].embed.weights[1].cols(), 8);
  EXPECT_EQ(p.levels[0].pool.output_width(), 4);
  EXPECT_EQ(p.levels[1].embed.input_width(), 8);
  EXPECT_EQ(p.levels[1].pool.output_width(), 1);
  EXPECT_EQ(p.hash_w.rows(), 8);
  EXPECT_EQ(p.hash_w.cols(), 4);
  EXPECT_TRUE(p.hash_b.isZero(0.0));
  std::size_t total = 0;
  p.ForEachTensor([&](const std::string&, TensorClass, std::span<const double> v) {
    total += v.size();
  });
  EXPECT_EQ(total, p.ParameterCount());
  const auto q = GcnHashParams::Initialize(dims, 1);
  EXPECT_EQ(p.hash_w, q.hash_w);
  const double bound = std::sqrt(6.0 / (8 + 4));
  EXPECT_LE(p.hash_w.cwiseAbs().maxCoeff(), bound);
}

TEST(EncodeGraph, ZeroHashHeadGivesZeroCode) {
  std::mt19937_64 rng(9);
  auto p = GcnHashParams::Initialize(SmallDims(), 2);
  p.hash_w.setZero();
  p.hash_b.setZero();
  const auto g = testing::RandomGraph(rng, 7, 5, GraphLabel::kCancerous, "g");
  EXPECT_TRUE(EncodeGraph(g, p).isZero(0.0));
}

TEST(EncodeGraph, SingleNodeCollapsesEveryLevel) {
  std::mt19937_64 rng(10);
  const auto p = GcnHashParams::Initialize(SmallDims(), 3);
  const auto g = testing::RandomGraph(rng, 1, 5, GraphLabel::kCancerFree, "one");
  ForwardCache cache;
  const auto y = EncodeGraph(g, p, {}, &cache);
  for (const auto& level : cache.levels) {
    EXPECT_EQ(level.assign, Matrix::Ones(1, 1));
  }
  EXPECT_EQ(EncodeGraph(g.adjacency.Dense(), g.node_features, p), y);
}

TEST(EncodeGraph, OutputsInsideOpenInterval) {
  std::mt19937_64 rng(11);
  const auto p = GcnHashParams::Initialize(SmallDims(), 4);
  for (int t = 0; t < 40; ++t) {
    const auto g = testing::RandomGraph(rng, 1 + t % 12, 5, GraphLabel::kCancerous, "g");
    const auto y = EncodeGraph(g, p);
    EXPECT_LT(y.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(EncodeGraph, PermutationInvariant) {
  std::mt19937_64 rng(12);
  const auto p = GcnHashParams::Initialize(SmallDims(), 5);
  for (int t = 0; t < 30; ++t) {
    const auto g = testing::RandomGraph(rng, 2 + t % 14, 5, GraphLabel::kCancerous, "g");
    std::vector<std::uint32_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto y1 = EncodeGraph(g, p);
    const auto y2 = EncodeGraph(testing::PermuteGraph(g, perm), p);
    EXPECT_LE((y1 - y2).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(EncodeGraph, TrainModeIsDeterministicGivenSeed) {
  std::mt19937_64 rng(13);
  const auto p = GcnHashParams::Initialize(SmallDims(), 6);
  const auto g = testing::RandomGraph(rng, 9, 5, GraphLabel::kCancerous, "g");
  std::mt19937_64 a(77), b(77);
  EncodeOptions oa{true, 0.5, &a}, ob{true, 0.5, &b};
  EXPECT_EQ(EncodeGraph(g, p, oa), EncodeGraph(g, p, ob));
  EncodeOptions no_rng{true, 0.5, nullptr};
  EXPECT_THROW(EncodeGraph(g, p, no_rng), ConfigError);
}

TEST(EncodeGraph, DimensionMismatch) {
  std::mt19937_64 rng(14);
  const auto p = GcnHashParams::Initialize(SmallDims(), 7);
  const auto g = testing::RandomGraph(rng, 4, 6, GraphLabel::kCancerous, "g");
  EXPECT_TRUE(ThrowsWith<DataError>([&] { EncodeGraph(g, p); }, "d_f"));
}

TEST(Binarize, SignConvention) {
  RowVector y(3);
  y << 0.9, -0.2, 0.0;
  EXPECT_EQ(Binarize(y), (std::vector<std::int8_t>{1, -1, 1}));
  EXPECT_EQ(Binarize(RowVector::Constant(5, -0.3)), std::vector<std::int8_t>(5, -1));
  std::mt19937_64 rng(15);
  for (int t = 0; t < 100; ++t) {
    const RowVector v = RandomMatrix(rng, 1, 16);
    const auto b = Binarize(v);
    RowVector scaled(16);
    for (int i = 0; i < 16; ++i) scaled[i] = 0.5 * b[static_cast<std::size_t>(i)];
    EXPECT_EQ(Binarize(scaled), b);
  }
  y[1] = std::nan("");
  EXPECT_THROW(Binarize(y), NumericError);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  TempDir dir;
  auto dims = SmallDims();
  dims.pool_dropout = false;
  const auto p = GcnHashParams::Initialize(dims, 8);
  SaveCheckpoint(p, dir.path() / "m.ckpt");
  const auto q = LoadCheckpoint(dir.path() / "m.ckpt");
  EXPECT_EQ(q.dims.levels, dims.levels);
  EXPECT_EQ(q.dims.pool_ratio, dims.pool_ratio);
  EXPECT_EQ(q.dims.pool_dropout, false);
  EXPECT_EQ(q.hash_w, p.hash_w);
  EXPECT_EQ(q.hash_b, p.hash_b);
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    EXPECT_EQ(q.levels[l].embed.weights, p.levels[l].embed.weights);
    EXPECT_EQ(q.levels[l].pool.weights, p.levels[l].pool.weights);
  }
  const auto bytes = ReadFileBytes(dir.path() / "m.ckpt");
  WriteFileBytes(dir.path() / "short.ckpt", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(LoadCheckpoint(dir.path() / "short.ckpt"), DataError);
  WriteFileBytes(dir.path() / "long.ckpt", bytes + "zz");
  EXPECT_THROW(LoadCheckpoint(dir.path() / "long.ckpt"), DataError);
  std::string bad = bytes;
  bad[4] = 9;
  WriteFileBytes(dir.path() / "ver.ckpt", bad);
  EXPECT_TRUE(ThrowsWith<DataError>([&] { LoadCheckpoint(dir.path() / "ver.ckpt"); },
                                    "version"));
}

}  // namespace
}  // namespace gcnhash
