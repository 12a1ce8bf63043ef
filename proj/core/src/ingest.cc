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

#include "gcnhash/ingest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "gcnhash/binary_io.h"
#include "gcnhash/error.h"

namespace gcnhash {
namespace {

constexpr std::string_view kFeatureMagic = "PGF1";
constexpr std::string_view kConnectivityNote =
    "# connectivity: 4-neighbour on sliding-window lattice indices";

std::string RowTag(std::size_t row) { return "record " + std::to_string(row); }

}  // namespace

void PatchGrid::Validate() const {
  const std::string where = "grid '" + wsi_id + "'";
  if (rows == 0 || cols == 0) throw DataError(where + ": zero grid area");
  if (features.rows() != static_cast<Eigen::Index>(grid_pos.size()) ||
      tumor_ratio.size() != grid_pos.size()) {
    throw DataError(where + ": features/grid_pos/tumor_ratio length mismatch");
  }
  std::set<GridPos> seen;
  for (std::size_t i = 0; i < grid_pos.size(); ++i) {
    const auto& p = grid_pos[i];
    if (p.row >= rows || p.col >= cols) {
      throw DataError(where + ": patch " + std::to_string(i) +
                      " position out of bounds");
    }
    if (!seen.insert(p).second) {
      throw DataError(where + ": patch " + std::to_string(i) +
                      " duplicates grid position (" + std::to_string(p.row) + "," +
                      std::to_string(p.col) + ")");
    }
    if (!(tumor_ratio[i] >= 0.0 && tumor_ratio[i] <= 1.0)) {
      throw DataError(where + ": patch " + std::to_string(i) +
                      " tumor_ratio out of [0,1]");
    }
  }
  if (!features.allFinite()) throw DataError(where + ": non-finite feature value");
}

std::vector<std::vector<std::uint32_t>> PatchAdjacency::NeighborLists() const {
  std::vector<std::vector<std::uint32_t>> out(n);
  for (const auto& [a, b] : pairs) {
    out[a].push_back(b);
    out[b].push_back(a);
  }
  for (auto& list : out) std::sort(list.begin(), list.end());
  return out;
}

Eigen::MatrixXd PatchAdjacency::Dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  for (const auto& [i, j] : pairs) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

void SyntheticSpec::Validate() const {
  if (rows == 0 || cols == 0) throw ConfigError("synthetic spec: zero grid area");
  if (feature_dim == 0) throw ConfigError("synthetic spec: feature_dim must be > 0");
  if (!(separation >= 0.0)) throw ConfigError("synthetic spec: separation must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("synthetic spec: sigma must be > 0");
  if (!(background >= 0.0 && background < 1.0)) {
    throw ConfigError("synthetic spec: background must be in [0,1)");
  }
  if (blobs > 0 && (blob_min == 0 || blob_min > blob_max ||
                    blob_max > std::min(rows, cols))) {
    throw ConfigError("synthetic spec: need 1 <= blob_min <= blob_max <= min(rows, cols)");
  }
}

SyntheticSpec SyntheticSpec::FromConfig(const KeyValueConfig& config) {
  static constexpr std::string_view kKeys[] = {
      "rows", "cols",  "feature_dim", "blobs",      "blob_min",
      "blob_max", "separation", "sigma", "background", "mean_seed"};
  config.RequireKnownKeys(kKeys);
  SyntheticSpec spec;
  auto as_u32 = [&](std::string_view key, std::uint32_t fallback) {
    const auto v = config.GetInt(key, fallback);
    if (v < 0 || v > 0xffffffffLL) {
      throw ConfigError("synthetic spec: " + std::string(key) + " out of range");
    }
    return static_cast<std::uint32_t>(v);
  };
  spec.rows = as_u32("rows", spec.rows);
  spec.cols = as_u32("cols", spec.cols);
  spec.feature_dim = as_u32("feature_dim", spec.feature_dim);
  spec.blobs = as_u32("blobs", spec.blobs);
  spec.blob_min = as_u32("blob_min", spec.blob_min);
  spec.blob_max = as_u32("blob_max", spec.blob_max);
  spec.separation = config.GetDouble("separation", spec.separation);
  spec.sigma = config.GetDouble("sigma", spec.sigma);
  spec.background = config.GetDouble("background", spec.background);
  spec.mean_seed = static_cast<std::uint64_t>(
      config.GetInt("mean_seed", static_cast<std::int64_t>(spec.mean_seed)));
  spec.Validate();
  return spec;
}

KeyValueConfig SyntheticSpec::ToConfig() const {
  KeyValueConfig c;
  auto put = [&](const char* key, auto value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    c.Set(key, os.str());
  };
  put("rows", rows);
  put("cols", cols);
  put("feature_dim", feature_dim);
  put("blobs", blobs);
  put("blob_min", blob_min);
  put("blob_max", blob_max);
  put("separation", separation);
  put("sigma", sigma);
  put("background", background);
  put("mean_seed", mean_seed);
  return c;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> SyntheticClassMeans(
    const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.mean_seed);
  std::uniform_real_distribution<double> base(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.feature_dim);
  Eigen::VectorXd normal(d);
  for (Eigen::Index i = 0; i < d; ++i) normal[i] = base(rng);
  Eigen::VectorXd direction(d);
  do {
    for (Eigen::Index i = 0; i < d; ++i) direction[i] = gauss(rng);
  } while (direction.norm() < 1e-12);
  direction.normalize();
  return {normal, normal + spec.separation * direction};
}

PatchGrid GenerateSyntheticWsi(const SyntheticSpec& spec, std::uint64_t seed,
                               std::string wsi_id) {
  spec.Validate();
  std::mt19937_64 rng(seed);
  const auto rows = spec.rows;
  const auto cols = spec.cols;

  std::vector<double> ratio(static_cast<std::size_t>(rows) * cols, 0.0);
  for (std::uint32_t b = 0; b < spec.blobs; ++b) {
    std::uniform_int_distribution<std::uint32_t> size(spec.blob_min, spec.blob_max);
    const auto h = size(rng);
    const auto w = size(rng);
    const auto top = std::uniform_int_distribution<std::uint32_t>(0, rows - h)(rng);
    const auto left = std::uniform_int_distribution<std::uint32_t>(0, cols - w)(rng);
    // Core plus a one-patch ring; ring cells touching an edge of the core get
    // 0.5, diagonal corner cells 0.25.
    const auto r0 = static_cast<std::int64_t>(top) - 1;
    const auto c0 = static_cast<std::int64_t>(left) - 1;
    for (std::int64_t r = r0; r <= r0 + h + 1; ++r) {
      for (std::int64_t c = c0; c <= c0 + w + 1; ++c) {
        if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
        const bool row_in = r > r0 && r <= r0 + h;
        const bool col_in = c > c0 && c <= c0 + w;
        double value = 0.25;
        if (row_in && col_in) {
          value = 1.0;
        } else if (row_in || col_in) {
          value = 0.5;
        }
        auto& cell = ratio[static_cast<std::size_t>(r) * cols + c];
        cell = std::max(cell, value);
      }
    }
  }

  const auto [normal_mean, tumor_mean] = SyntheticClassMeans(spec);
  std::normal_distribution<double> noise(0.0, spec.sigma);
  std::bernoulli_distribution is_background(spec.background);

  PatchGrid grid;
  grid.wsi_id = std::move(wsi_id);
  grid.rows = rows;
  grid.cols = cols;
  std::vector<Eigen::VectorXd> feature_rows;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const double t = ratio[static_cast<std::size_t>(r) * cols + c];
      // Drawn for every cell so the blob layout does not shift the stream.
      const bool background = is_background(rng);
      Eigen::VectorXd x = (1.0 - t) * normal_mean + t * tumor_mean;
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        // Rounded to f32 so a save/load round trip is exact.
        x[k] = static_cast<double>(static_cast<float>(x[k] + noise(rng)));
      }
      if (background && t == 0.0) continue;
      grid.grid_pos.push_back({r, c});
      grid.tumor_ratio.push_back(t);
      feature_rows.push_back(std::move(x));
    }
  }
  grid.features.resize(static_cast<Eigen::Index>(feature_rows.size()),
                       static_cast<Eigen::Index>(spec.feature_dim));
  for (std::size_t i = 0; i < feature_rows.size(); ++i) {
    grid.features.row(static_cast<Eigen::Index>(i)) = feature_rows[i].transpose();
  }
  return grid;
}

PatchAdjacency ComputePatchAdjacency(const PatchGrid& grid) {
  grid.Validate();
  constexpr auto kNone = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> at(static_cast<std::size_t>(grid.rows) * grid.cols, kNone);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    at[static_cast<std::size_t>(grid.grid_pos[i].row) * grid.cols + grid.grid_pos[i].col] =
        static_cast<std::uint32_t>(i);
  }
  PatchAdjacency adj;
  adj.n = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto [r, c] = grid.grid_pos[i];
    const auto self = static_cast<std::uint32_t>(i);
    auto link = [&](std::uint32_t other) {
      if (other == kNone) return;
      adj.pairs.emplace_back(std::min(self, other), std::max(self, other));
    };
    if (c + 1 < grid.cols) link(at[static_cast<std::size_t>(r) * grid.cols + c + 1]);
    if (r + 1 < grid.rows) link(at[static_cast<std::size_t>(r + 1) * grid.cols + c]);
  }
  std::sort(adj.pairs.begin(), adj.pairs.end());
  return adj;
}

PatchGrid LoadPatchGrid(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  ByteReader in(bytes, path.string());
  if (in.remaining() < 4 || in.GetBytes(4, "magic") != kFeatureMagic) {
    throw DataError(path.string() + ": malformed header: bad magic (expected PGF1)");
  }
  PatchGrid grid;
  grid.wsi_id = path.stem().string();
  grid.rows = in.GetU32("header.rows");
  grid.cols = in.GetU32("header.cols");
  const auto m_s = in.GetU32("header.m_s");
  const auto d_f = in.GetU32("header.d_f");
  if (grid.rows == 0 || grid.cols == 0) {
    throw DataError(path.string() + ": malformed header: zero rows or cols");
  }
  if (d_f == 0) throw DataError(path.string() + ": malformed header: d_f is 0");
  if (static_cast<std::uint64_t>(m_s) > static_cast<std::uint64_t>(grid.rows) * grid.cols) {
    throw DataError(path.string() + ": malformed header: m_s exceeds rows*cols");
  }
  const std::size_t record_size = 12 + 4 * static_cast<std::size_t>(d_f);
  const std::size_t present = in.remaining() / record_size;
  if (present != m_s || in.remaining() % record_size != 0) {
    throw DataError(path.string() + ": row count mismatch: header declares m_s=" +
                    std::to_string(m_s) + " but file holds " +
                    std::to_string(present) + " complete records" +
                    (in.remaining() % record_size ? " plus trailing bytes" : ""));
  }
  grid.features.resize(m_s, d_f);
  grid.grid_pos.reserve(m_s);
  grid.tumor_ratio.reserve(m_s);
  for (std::uint32_t i = 0; i < m_s; ++i) {
    GridPos p;
    p.row = in.GetU32("record.row");
    p.col = in.GetU32("record.col");
    if (p.row >= grid.rows || p.col >= grid.cols) {
      throw DataError(path.string() + ": " + RowTag(i) + ": grid position out of bounds");
    }
    const double t = in.GetF32("record.tumor_ratio");
    if (!(t >= 0.0 && t <= 1.0)) {
      throw DataError(path.string() + ": " + RowTag(i) + ": tumor_ratio " +
                      std::to_string(t) + " out of [0,1]");
    }
    for (std::uint32_t k = 0; k < d_f; ++k) {
      const float v = in.GetF32("record.features");
      if (!std::isfinite(v)) {
        throw DataError(path.string() + ": " + RowTag(i) +
                        ": non-finite feature value at column " + std::to_string(k));
      }
      grid.features(i, k) = v;
    }
    grid.grid_pos.push_back(p);
    grid.tumor_ratio.push_back(t);
  }
  grid.Validate();
  return grid;
}

void SavePatchGrid(const PatchGrid& grid, const std::filesystem::path& path) {
  grid.Validate();
  ByteWriter out;
  out.PutBytes(kFeatureMagic);
  out.PutU32(grid.rows);
  out.PutU32(grid.cols);
  out.PutU32(static_cast<std::uint32_t>(grid.size()));
  out.PutU32(static_cast<std::uint32_t>(grid.feature_dim()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.PutU32(grid.grid_pos[i].row);
    out.PutU32(grid.grid_pos[i].col);
    out.PutF32(static_cast<float>(grid.tumor_ratio[i]));
    for (Eigen::Index k = 0; k < grid.features.cols(); ++k) {
      out.PutF32(static_cast<float>(grid.features(static_cast<Eigen::Index>(i), k)));
    }
  }
  WriteFileBytes(path, out.bytes());
}

void WriteFeatureManifest(const std::filesystem::path& dir,
                          const std::vector<ManifestEntry>& entries) {
  std::string text(kConnectivityNote);
  text += '\n';
  for (const auto& e : entries) {
    if (e.file.find_first_of("\t\n") != std::string::npos ||
        e.wsi_id.find_first_of("\t\n") != std::string::npos) {
      throw DataError("manifest entries may not contain tabs or newlines");
    }
    text += e.file + '\t' + e.wsi_id + '\n';
  }
  WriteFileBytes(dir / kManifestName, text);
}

std::vector<ManifestEntry> ReadFeatureManifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw DataError("missing feature manifest " + (dir / kManifestName).string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError((dir / kManifestName).string() + ":" + std::to_string(line_no) +
                      ": expected '<file>\\t<wsi_id>'");
    }
    entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return entries;
}

std::vector<PatchGrid> LoadFeatureDir(const std::filesystem::path& dir) {
  std::vector<PatchGrid> grids;
  for (const auto& entry : ReadFeatureManifest(dir)) {
    auto grid = LoadPatchGrid(dir / entry.file);
    grid.wsi_id = entry.wsi_id;
    grids.push_back(std::move(grid));
  }
  return grids;
}

}  // namespace gcnhash
