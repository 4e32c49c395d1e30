#include "maseg/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "maseg/errors.hpp"
#include "maseg/parallel.hpp"
#include "maseg/rng.hpp"

namespace maseg {

ProbMap majority_vote(const std::vector<const LabelVolume*>& atlas_labels,
                      const BoundingBox& box) {
  if (atlas_labels.empty()) throw ValidationError("majority_vote: no atlases");
  const Dims3 dims = atlas_labels.front()->dims();
  for (const LabelVolume* lv : atlas_labels)
    if (lv->dims() != dims)
      throw ValidationError("majority_vote: mismatched atlas dims");
  if (!box.inside(dims))
    throw ValidationError("majority_vote: box exceeds volume dims");

  const int n = static_cast<int>(atlas_labels.size());
  ProbMap map(box);
  std::int64_t o = 0;
  for (int z = box.min_corner.z; z <= box.max_corner.z; ++z)
    for (int y = box.min_corner.y; y <= box.max_corner.y; ++y)
      for (int x = box.min_corner.x; x <= box.max_corner.x; ++x, ++o) {
        int fg = 0;
        for (const LabelVolume* lv : atlas_labels) fg += (*lv)(x, y, z);
        map.values[o] = static_cast<double>(2 * fg - n) / n;
        map.decided[o] = (fg == 0 || fg == n) ? 1 : 0;
      }
  return map;
}

ProbMap majority_vote(const AtlasSet& atlases, const BoundingBox& box) {
  std::vector<const LabelVolume*> labels;
  labels.reserve(atlases.size());
  for (const Atlas& a : atlases) labels.push_back(&a.labels);
  return majority_vote(labels, box);
}

std::vector<VoxelIndex> candidate_voxels(const ProbMap& mv) {
  std::vector<VoxelIndex> out;
  for (std::int64_t i = 0; i < mv.size(); ++i)
    if (std::abs(mv.values[i]) < 1.0) out.push_back(mv.box.delocalize(i));
  return out;
}

namespace {

/// Neighborhood offsets in scan order (x fastest), matching the voxel-index
/// tie-break order of sample selection.
std::vector<VoxelIndex> neighborhood_offsets(int r) {
  std::vector<VoxelIndex> offsets;
  offsets.reserve(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1) * (2 * r + 1));
  for (int dz = -r; dz <= r; ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) offsets.push_back({dx, dy, dz});
  return offsets;
}

struct FuseWorkspace {
  PatchSampleBank bank;
  Eigen::ArrayXf target_patch;
  Eigen::ArrayXf patch_buf;
  Eigen::ArrayXf feat_buf;
  Eigen::ArrayXf target_features;
  Eigen::MatrixXf features_t;  // feature_length x n_selected
  Eigen::MatrixXf X;           // n_selected x feature_length
  Eigen::ArrayXd y;
  ForestScratch forest;
};

}  // namespace

ProbMap fuse_rf(const IntensityVolume& target,
                const std::vector<const Atlas*>& atlases,
                const std::vector<VoxelIndex>& candidates, const ProbMap& mv,
                const FusionConfig& cfg, int threads) {
  if (atlases.empty()) throw ValidationError("fuse_rf: no atlases");
  for (const Atlas* a : atlases)
    if (!a->image.same_grid(target) || !a->labels.same_grid(target))
      throw ValidationError("fuse_rf: atlas grid differs from target");
  for (const VoxelIndex& c : candidates)
    if (!mv.box.contains(c))
      throw ValidationError("fuse_rf: candidate outside the map box");
  cfg.patch.validate();
  if (cfg.k < 1) throw ValidationError("fuse_rf: k must be >= 1");

  ProbMap out = mv;
  const auto offsets = neighborhood_offsets(cfg.patch.neighborhood_radius);
  const std::int64_t patch_len = cfg.patch.patch_size();
  const std::int64_t feat_len = cfg.patch.feature_length();
  const std::int32_t gather_cap =
      static_cast<std::int32_t>(offsets.size() * atlases.size());

  parallel_for(
      static_cast<std::int64_t>(candidates.size()), threads,
      [&](int, std::int64_t begin, std::int64_t end) {
        FuseWorkspace ws;
        ws.bank.reset(patch_len, gather_cap);
        for (std::int64_t c = begin; c < end; ++c) {
          const VoxelIndex x = candidates[c];
          const std::int64_t slot = mv.box.local_index(x);
          if (mv.decided[slot]) continue;  // unanimous voxels never move

          // Labelled patches from every atlas voxel in the neighborhood.
          ws.bank.reset(patch_len, gather_cap);
          int n_pos = 0, n_neg = 0;
          for (std::int32_t i = 0; i < static_cast<std::int32_t>(atlases.size()); ++i) {
            const Atlas& atlas = *atlases[i];
            for (const VoxelIndex& o : offsets) {
              const VoxelIndex j{x.x + o.x, x.y + o.y, x.z + o.z};
              if (!target.contains(j)) continue;
              const float label = atlas.labels(j) != 0 ? 1.0f : -1.0f;
              (label > 0 ? n_pos : n_neg)++;
              extract_patch_into(atlas.image, j, cfg.patch, ws.patch_buf);
              ws.bank.push(ws.patch_buf, label, i, target.linear_index(j));
            }
          }

          // One-class neighborhoods are decisive without training.
          if (n_pos == 0 || n_neg == 0) {
            out.values[slot] = n_pos > 0 ? 1.0 : -1.0;
            continue;
          }

          extract_patch_into(target, x, cfg.patch, ws.target_patch);
          const BalancedSelection sel =
              select_balanced_samples(ws.bank, ws.target_patch, cfg.k);

          const std::int32_t m = static_cast<std::int32_t>(sel.indices.size());
          ws.features_t.resize(feat_len, m);
          ws.y.resize(m);
          for (std::int32_t t = 0; t < m; ++t) {
            const std::int32_t s = sel.indices[t];
            ws.patch_buf = ws.bank.patches.col(s).array();
            compute_features_into(ws.patch_buf, cfg.patch, ws.feat_buf);
            ws.features_t.col(t) = ws.feat_buf.matrix();
            ws.y[t] = ws.bank.labels[s];
          }
          ws.X = ws.features_t.transpose();
          compute_features_into(ws.target_patch, cfg.patch, ws.target_features);

          // Voxel-derived seed: results do not depend on iteration order.
          ForestConfig fc = cfg.forest;
          fc.seed = mix_seed(cfg.forest.seed,
                             static_cast<std::uint64_t>(target.linear_index(x)));
          const ForestModel model = train_forest(ws.X, ws.y, fc, &ws.forest);
          const double p = predict(model, ws.target_features);
          out.values[slot] = std::clamp(p, -1.0, 1.0);
        }
      });
  return out;
}

ProbMap fuse_rf(const IntensityVolume& target, const AtlasSet& atlases,
                const std::vector<VoxelIndex>& candidates, const ProbMap& mv,
                const FusionConfig& cfg, int threads) {
  std::vector<const Atlas*> ptrs;
  ptrs.reserve(atlases.size());
  for (const Atlas& a : atlases) ptrs.push_back(&a);
  return fuse_rf(target, ptrs, candidates, mv, cfg, threads);
}

LabelVolume binarize(const ProbMap& p, double threshold) {
  LabelVolume out(p.box.extent());
  for (std::int64_t i = 0; i < p.size(); ++i)
    out[i] = p.values[i] > threshold ? 1 : 0;
  return out;
}

}  // namespace maseg
