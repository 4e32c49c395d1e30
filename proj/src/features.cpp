#include "maseg/features.hpp"

#include <algorithm>
#include <cmath>

#include "maseg/errors.hpp"

namespace maseg {

void PatchConfig::validate() const {
  if (patch_radius < 1) throw ValidationError("PatchConfig: patch_radius must be >= 1");
  if (neighborhood_radius < 0)
    throw ValidationError("PatchConfig: neighborhood_radius must be >= 0");
}

void extract_patch_into(const IntensityVolume& v, const VoxelIndex& center,
                        const PatchConfig& cfg, Eigen::ArrayXf& out) {
  const int R = cfg.patch_radius;
  const int edge = cfg.patch_edge();
  out.resize(cfg.patch_size());

  const int x0 = center.x - R, y0 = center.y - R, z0 = center.z - R;
  // Fast path: patch fully interior, copy contiguous x-runs.
  if (x0 >= 0 && y0 >= 0 && z0 >= 0 && x0 + edge <= v.nx() &&
      y0 + edge <= v.ny() && z0 + edge <= v.nz()) {
    float* dst = out.data();
    for (int dz = 0; dz < edge; ++dz)
      for (int dy = 0; dy < edge; ++dy) {
        const float* src = v.data() + v.linear_index(x0, y0 + dy, z0 + dz);
        std::copy(src, src + edge, dst);
        dst += edge;
      }
    return;
  }

  out.setZero();
  float* dst = out.data();
  for (int dz = 0; dz < edge; ++dz) {
    const int z = z0 + dz;
    const bool zin = z >= 0 && z < v.nz();
    for (int dy = 0; dy < edge; ++dy, dst += edge) {
      const int y = y0 + dy;
      if (!zin || y < 0 || y >= v.ny()) continue;
      const int xa = std::max(0, x0);
      const int xb = std::min(v.nx() - 1, x0 + edge - 1);
      if (xa > xb) continue;
      const float* src = v.data() + v.linear_index(xa, y, z);
      std::copy(src, src + (xb - xa + 1), dst + (xa - x0));
    }
  }
}

Eigen::ArrayXf extract_patch(const IntensityVolume& v, const VoxelIndex& center,
                             const PatchConfig& cfg) {
  Eigen::ArrayXf out;
  extract_patch_into(v, center, cfg, out);
  return out;
}

void compute_features_into(const Eigen::ArrayXf& patch, const PatchConfig& cfg,
                           Eigen::ArrayXf& out) {
  const std::int64_t n = cfg.patch_size();
  if (patch.size() != n)
    throw ValidationError("compute_features: patch length does not match config");
  out.resize(cfg.feature_length());

  const double mean = patch.cast<double>().mean();
  const double var =
      (patch.cast<double>() - mean).square().sum() / static_cast<double>(n);
  const double sd = std::sqrt(var);

  // z-normalized intensities; a zero-variance patch maps to zeros.
  if (sd > 0.0)
    out.head(n) = ((patch.cast<double>() - mean) / sd).cast<float>();
  else
    out.head(n).setZero();

  if (cfg.feature_mode == FeatureMode::IntensityOnly) return;

  // Per-voxel gradient magnitude, central differences inside the patch and
  // one-sided at the patch faces.
  const int e = cfg.patch_edge();
  auto at = [&](int i, int j, int k) -> float {
    return patch[i + static_cast<std::int64_t>(e) * (j + static_cast<std::int64_t>(e) * k)];
  };
  auto diff1 = [&](auto&& get, int c, int last) -> double {
    if (c == 0) return static_cast<double>(get(1)) - get(0);
    if (c == last) return static_cast<double>(get(last)) - get(last - 1);
    return 0.5 * (static_cast<double>(get(c + 1)) - get(c - 1));
  };
  float* grad = out.data() + n;
  const int last = e - 1;
  for (int k = 0; k < e; ++k)
    for (int j = 0; j < e; ++j)
      for (int i = 0; i < e; ++i) {
        const double gx = diff1([&](int c) { return at(c, j, k); }, i, last);
        const double gy = diff1([&](int c) { return at(i, c, k); }, j, last);
        const double gz = diff1([&](int c) { return at(i, j, c); }, k, last);
        *grad++ = static_cast<float>(std::sqrt(gx * gx + gy * gy + gz * gz));
      }

  // First-order statistics of the raw patch.
  out[2 * n + 0] = static_cast<float>(mean);
  out[2 * n + 1] = static_cast<float>(sd);
  out[2 * n + 2] = patch.minCoeff();
  out[2 * n + 3] = patch.maxCoeff();
}

Eigen::ArrayXf compute_features(const Eigen::ArrayXf& patch, const PatchConfig& cfg) {
  Eigen::ArrayXf out;
  compute_features_into(patch, cfg, out);
  return out;
}

double patch_distance(const Eigen::ArrayXf& a, const Eigen::ArrayXf& b) {
  if (a.size() != b.size())
    throw ValidationError("patch_distance: length mismatch");
  return static_cast<double>((a - b).matrix().squaredNorm());
}

void PatchSampleBank::reset(std::int64_t patch_len, std::int32_t capacity) {
  if (patches.rows() != patch_len || patches.cols() < capacity)
    patches.resize(patch_len, capacity);
  labels.clear();
  atlas_index.clear();
  voxel_index.clear();
  labels.reserve(capacity);
  atlas_index.reserve(capacity);
  voxel_index.reserve(capacity);
}

void PatchSampleBank::push(const Eigen::ArrayXf& patch, float label,
                           std::int32_t atlas, std::int64_t voxel) {
  const auto col = count();
  if (col >= patches.cols()) patches.conservativeResize(Eigen::NoChange, col + 64);
  patches.col(col) = patch.matrix();
  labels.push_back(label);
  atlas_index.push_back(atlas);
  voxel_index.push_back(voxel);
}

BalancedSelection select_balanced_samples(const PatchSampleBank& bank,
                                          const Eigen::ArrayXf& target_patch,
                                          int k) {
  if (k < 1) throw ValidationError("select_balanced_samples: k must be >= 1");
  const std::int32_t n = bank.count();
  if (bank.patches.rows() != target_patch.size())
    throw ValidationError("select_balanced_samples: patch length mismatch");

  struct Entry {
    double dist;
    std::int32_t atlas;
    std::int64_t voxel;
    std::int32_t index;
  };
  std::vector<Entry> pos, neg;
  pos.reserve(n);
  neg.reserve(n);
  for (std::int32_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(
        (bank.patches.col(i) - target_patch.matrix()).squaredNorm());
    Entry e{d, bank.atlas_index[i], bank.voxel_index[i], i};
    (bank.labels[i] > 0 ? pos : neg).push_back(e);
  }
  if (pos.empty() || neg.empty())
    throw ValidationError("select_balanced_samples: a class has no members");

  auto order = [](const Entry& a, const Entry& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.atlas != b.atlas) return a.atlas < b.atlas;
    return a.voxel < b.voxel;
  };
  auto take = [&](std::vector<Entry>& v) {
    const auto m = std::min<std::size_t>(v.size(), static_cast<std::size_t>(k));
    std::partial_sort(v.begin(), v.begin() + m, v.end(), order);
    v.resize(m);
  };
  take(pos);
  take(neg);

  BalancedSelection sel;
  sel.n_positive = static_cast<std::int32_t>(pos.size());
  sel.n_negative = static_cast<std::int32_t>(neg.size());
  sel.positive_short = sel.n_positive < k;
  sel.negative_short = sel.n_negative < k;
  sel.indices.reserve(pos.size() + neg.size());
  for (const Entry& e : pos) sel.indices.push_back(e.index);
  for (const Entry& e : neg) sel.indices.push_back(e.index);
  return sel;
}

}  // namespace maseg
