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

#include "gcnhash/graphcons.h"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <set>
#include <tuple>

#include "gcnhash/binary_io.h"
#include "gcnhash/error.h"

namespace gcnhash {
namespace {

constexpr std::string_view kGraphMagic = "TGC1";
constexpr std::uint32_t kGraphFileVersion = 1;

std::vector<std::uint32_t> MergeSorted(const std::vector<std::uint32_t>& a,
                                       const std::vector<std::uint32_t>& b) {
  std::vector<std::uint32_t> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

class MergeCost {
 public:
  MergeCost(const Eigen::MatrixXd& features, MergeCriterion criterion)
      : features_(features), criterion_(criterion) {}

  double operator()(const std::vector<std::uint32_t>& a,
                    const std::vector<std::uint32_t>& b) const {
    const auto merged = MergeSorted(a, b);
    const double joint = EesOfRows(features_, merged);
    if (criterion_ == MergeCriterion::kUnionEes) return joint;
    return joint - EesOfRows(features_, a) - EesOfRows(features_, b);
  }

 private:
  const Eigen::MatrixXd& features_;
  MergeCriterion criterion_;
};

Partition NaiveHac(const PatchGrid& grid, const PatchAdjacency& adjacency,
                   std::size_t target, const MergeCost& cost) {
  const std::size_t m = grid.size();
  std::vector<std::vector<std::uint32_t>> clusters(m);
  std::vector<std::uint32_t> owner(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    clusters[i] = {i};
    owner[i] = i;
  }
  Partition out;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
  while (clusters.size() > target) {
    candidates.clear();
    for (const auto& [p, q] : adjacency.pairs) {
      const auto a = owner[p];
      const auto b = owner[q];
      if (a != b) candidates.emplace_back(std::min(a, b), std::max(a, b));
    }
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());

    auto best = candidates.front();
    double best_cost = cost(clusters[best.first], clusters[best.second]);
    for (std::size_t k = 1; k < candidates.size(); ++k) {
      const auto [a, b] = candidates[k];
      const double c = cost(clusters[a], clusters[b]);
      if (c < best_cost) {
        best_cost = c;
        best = candidates[k];
      }
    }
    const auto [a, b] = best;
    out.merge_log.push_back({clusters[a].front(), clusters[b].front(), best_cost});
    clusters[a] = MergeSorted(clusters[a], clusters[b]);
    clusters.erase(clusters.begin() + b);
    for (std::uint32_t pos = 0; pos < clusters.size(); ++pos) {
      for (auto patch : clusters[pos]) owner[patch] = pos;
    }
  }
  out.clusters = std::move(clusters);
  return out;
}

Partition LazyHac(const PatchGrid& grid, const PatchAdjacency& adjacency,
                  std::size_t target, const MergeCost& cost) {
  const std::size_t m = grid.size();
  // Clusters are keyed by their smallest member, which orders them the same
  // way as list positions in the naive path.
  std::vector<std::vector<std::uint32_t>> members(m);
  std::vector<std::set<std::uint32_t>> neighbors(m);
  std::vector<std::uint32_t> version(m, 0);
  std::vector<bool> alive(m, true);
  for (std::uint32_t i = 0; i < m; ++i) members[i] = {i};
  for (const auto& [p, q] : adjacency.pairs) {
    neighbors[p].insert(q);
    neighbors[q].insert(p);
  }

  struct Candidate {
    double cost;
    std::uint32_t a, b;
    std::uint32_t version_a, version_b;
  };
  auto later = [](const Candidate& x, const Candidate& y) {
    return std::tie(x.cost, x.a, x.b) > std::tie(y.cost, y.a, y.b);
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(later)> queue(later);
  auto push = [&](std::uint32_t x, std::uint32_t y) {
    const auto a = std::min(x, y);
    const auto b = std::max(x, y);
    queue.push({cost(members[a], members[b]), a, b, version[a], version[b]});
  };
  for (const auto& [p, q] : adjacency.pairs) push(p, q);

  Partition out;
  std::size_t count = m;
  while (count > target && !queue.empty()) {
    const auto top = queue.top();
    queue.pop();
    if (!alive[top.a] || !alive[top.b] || version[top.a] != top.version_a ||
        version[top.b] != top.version_b) {
      continue;
    }
    const auto a = top.a;
    const auto b = top.b;
    out.merge_log.push_back({a, b, top.cost});
    members[a] = MergeSorted(members[a], members[b]);
    members[b].clear();
    alive[b] = false;
    ++version[a];
    for (auto n : neighbors[b]) {
      neighbors[n].erase(b);
      if (n != a) {
        neighbors[n].insert(a);
        neighbors[a].insert(n);
      }
    }
    neighbors[a].erase(b);
    neighbors[b].clear();
    for (auto n : neighbors[a]) push(a, n);
    --count;
  }
  for (std::uint32_t i = 0; i < m; ++i) {
    if (alive[i]) out.clusters.push_back(std::move(members[i]));
  }
  return out;
}

}  // namespace

std::string_view GraphLabelName(GraphLabel label) {
  switch (label) {
    case GraphLabel::kCancerFree:
      return "cancer_free";
    case GraphLabel::kCancerous:
      return "cancerous";
    case GraphLabel::kExcluded:
      return "excluded";
  }
  return "unknown";
}

GraphLabel LabelForTumorFraction(double tumor_fraction) {
  if (tumor_fraction > 0.10) return GraphLabel::kCancerous;
  if (tumor_fraction == 0.0) return GraphLabel::kCancerFree;
  return GraphLabel::kExcluded;
}

double EesOfRows(const Eigen::MatrixXd& features,
                 std::span<const std::uint32_t> rows) {
  if (rows.empty()) throw DataError("EES of an empty cluster");
  const Eigen::Index d = features.cols();
  const auto k = static_cast<double>(rows.size());
  // (k * sum |v|^2 - |sum v|^2) / k over offsets v from the first row: exact
  // zero for coincident points, and exact before the final division when the
  // offsets are small integers.
  const auto pivot = static_cast<Eigen::Index>(rows.front());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  double squares = 0.0;
  for (auto r : rows) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double v = features(r, c) - features(pivot, c);
      sum[c] += v;
      squares += v * v;
    }
  }
  const double scaled = k * squares - sum.squaredNorm();
  return std::max(0.0, scaled / k);
}

double Ees(const Eigen::MatrixXd& rows) {
  std::vector<std::uint32_t> all(static_cast<std::size_t>(rows.rows()));
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  return EesOfRows(rows, all);
}

std::size_t TargetGraphCount(std::size_t m_s, std::size_t n_bar) {
  if (m_s == 0 || n_bar == 0) throw ConfigError("TargetGraphCount needs m_s, n_bar >= 1");
  return std::max<std::size_t>(1, (2 * m_s + n_bar) / (2 * n_bar));
}

Partition HacPartition(const PatchGrid& grid, const PatchAdjacency& adjacency,
                       std::size_t target, const HacOptions& options) {
  if (grid.size() == 0) throw DataError("HAC on an empty grid '" + grid.wsi_id + "'");
  if (target == 0) throw ConfigError("HAC target must be >= 1");
  if (target > grid.size()) {
    throw ConfigError("HAC target " + std::to_string(target) + " exceeds m_s=" +
                      std::to_string(grid.size()));
  }
  if (adjacency.n != grid.size()) {
    throw DataError("adjacency does not belong to grid '" + grid.wsi_id + "'");
  }
  const MergeCost cost(grid.features, options.criterion);
  return options.strategy == HacStrategy::kNaive
             ? NaiveHac(grid, adjacency, target, cost)
             : LazyHac(grid, adjacency, target, cost);
}

std::vector<TissueGraph> ExtractGraphs(const PatchGrid& grid,
                                       const PatchAdjacency& adjacency,
                                       const Partition& partition) {
  const std::size_t m = grid.size();
  if (adjacency.n != m) throw DataError("partition/grid mismatch: adjacency size");
  constexpr auto kUnowned = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> owner(m, kUnowned);
  std::vector<std::uint32_t> local(m, 0);
  for (std::uint32_t c = 0; c < partition.clusters.size(); ++c) {
    const auto& cluster = partition.clusters[c];
    if (cluster.empty()) throw DataError("partition/grid mismatch: empty cluster");
    for (std::uint32_t k = 0; k < cluster.size(); ++k) {
      const auto p = cluster[k];
      if (p >= m) throw DataError("partition/grid mismatch: patch index out of range");
      if (owner[p] != kUnowned) {
        throw DataError("partition/grid mismatch: patch " + std::to_string(p) +
                        " in two clusters");
      }
      owner[p] = c;
      local[p] = k;
    }
  }
  if (std::find(owner.begin(), owner.end(), kUnowned) != owner.end()) {
    throw DataError("partition/grid mismatch: clusters do not cover every patch");
  }

  std::vector<TissueGraph> graphs(partition.clusters.size());
  for (const auto& [p, q] : adjacency.pairs) {
    if (owner[p] != owner[q]) continue;
    const auto a = local[p];
    const auto b = local[q];
    graphs[owner[p]].adjacency.pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  for (std::size_t c = 0; c < graphs.size(); ++c) {
    const auto& cluster = partition.clusters[c];
    auto& g = graphs[c];
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "/g%04zu", c);
    g.graph_id = grid.wsi_id + suffix;
    g.wsi_id = grid.wsi_id;
    g.member_patch_ids = cluster;
    g.node_features.resize(static_cast<Eigen::Index>(cluster.size()), grid.features.cols());
    double ratio_sum = 0.0;
    for (std::size_t k = 0; k < cluster.size(); ++k) {
      g.node_features.row(static_cast<Eigen::Index>(k)) =
          grid.features.row(static_cast<Eigen::Index>(cluster[k]));
      ratio_sum += grid.tumor_ratio[cluster[k]];
    }
    g.tumor_fraction = ratio_sum / static_cast<double>(cluster.size());
    g.label = LabelForTumorFraction(g.tumor_fraction);
    g.adjacency.n = cluster.size();
    std::sort(g.adjacency.pairs.begin(), g.adjacency.pairs.end());
  }
  return graphs;
}

std::vector<TissueGraph> BuildTissueGraphs(const PatchGrid& grid, std::size_t n_bar,
                                           const HacOptions& options) {
  const auto adjacency = ComputePatchAdjacency(grid);
  const auto target = TargetGraphCount(grid.size(), n_bar);
  return ExtractGraphs(grid, adjacency, HacPartition(grid, adjacency, target, options));
}

void SaveGraphFile(const std::filesystem::path& path, std::string_view wsi_id,
                   std::span<const TissueGraph> graphs) {
  ByteWriter out;
  out.PutBytes(kGraphMagic);
  out.PutU32(kGraphFileVersion);
  out.PutString(wsi_id);
  out.PutU32(static_cast<std::uint32_t>(graphs.size()));
  for (const auto& g : graphs) {
    const auto n = static_cast<std::uint32_t>(g.size());
    if (g.node_features.rows() != static_cast<Eigen::Index>(n) || g.adjacency.n != n) {
      throw DataError("graph '" + g.graph_id + "': inconsistent node count");
    }
    out.PutString(g.graph_id);
    out.PutU8(static_cast<std::uint8_t>(g.label));
    out.PutF64(g.tumor_fraction);
    out.PutU32(n);
    out.PutU32(static_cast<std::uint32_t>(g.node_features.cols()));
    out.PutU32(static_cast<std::uint32_t>(g.adjacency.pairs.size()));
    for (Eigen::Index i = 0; i < g.node_features.rows(); ++i) {
      for (Eigen::Index k = 0; k < g.node_features.cols(); ++k) {
        out.PutF32(static_cast<float>(g.node_features(i, k)));
      }
    }
    for (const auto& [a, b] : g.adjacency.pairs) {
      out.PutU32(a);
      out.PutU32(b);
    }
    for (auto id : g.member_patch_ids) out.PutU32(id);
  }
  WriteFileBytes(path, out.bytes());
}

std::vector<TissueGraph> LoadGraphFile(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  ByteReader in(bytes, path.string());
  if (in.remaining() < 4 || in.GetBytes(4, "magic") != kGraphMagic) {
    throw DataError(path.string() + ": not a graph file (bad magic)");
  }
  const auto version = in.GetU32("version");
  if (version != kGraphFileVersion) {
    throw DataError(path.string() + ": unsupported graph file version " +
                    std::to_string(version));
  }
  const std::string wsi_id = in.GetString("wsi_id");
  const auto count = in.GetU32("graph count");
  std::vector<TissueGraph> graphs;
  graphs.reserve(count);
  for (std::uint32_t gi = 0; gi < count; ++gi) {
    TissueGraph g;
    g.wsi_id = wsi_id;
    g.graph_id = in.GetString("graph_id");
    const auto label = in.GetU8("label");
    if (label > static_cast<std::uint8_t>(GraphLabel::kExcluded)) {
      throw DataError(path.string() + ": graph '" + g.graph_id + "': bad label");
    }
    g.label = static_cast<GraphLabel>(label);
    g.tumor_fraction = in.GetF64("tumor_fraction");
    const auto n = in.GetU32("n");
    const auto d_f = in.GetU32("d_f");
    const auto edges = in.GetU32("edge count");
    if (n == 0) throw DataError(path.string() + ": graph '" + g.graph_id + "' is empty");
    g.node_features.resize(n, d_f);
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t k = 0; k < d_f; ++k) g.node_features(i, k) = in.GetF32("features");
    }
    g.adjacency.n = n;
    g.adjacency.pairs.reserve(edges);
    for (std::uint32_t e = 0; e < edges; ++e) {
      const auto a = in.GetU32("edge");
      const auto b = in.GetU32("edge");
      if (a >= b || b >= n) {
        throw DataError(path.string() + ": graph '" + g.graph_id + "': bad edge");
      }
      g.adjacency.pairs.emplace_back(a, b);
    }
    g.member_patch_ids.resize(n);
    for (auto& id : g.member_patch_ids) id = in.GetU32("member id");
    graphs.push_back(std::move(g));
  }
  if (in.remaining() != 0) throw DataError(path.string() + ": trailing bytes");
  return graphs;
}

std::vector<TissueGraph> LoadGraphDir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("graph directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tgc") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<TissueGraph> graphs;
  for (const auto& f : files) {
    auto part = LoadGraphFile(f);
    std::move(part.begin(), part.end(), std::back_inserter(graphs));
  }
  return graphs;
}

}  // namespace gcnhash
