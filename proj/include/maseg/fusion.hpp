#pragma once

#include <cstdint>
#include <vector>

#include "maseg/features.hpp"
#include "maseg/forest.hpp"
#include "maseg/prob_map.hpp"
#include "maseg/volume.hpp"

namespace maseg {

struct FusionConfig {
  int k = 100;  // balanced sample count per class
  PatchConfig patch;
  ForestConfig forest;
};

/// Per-voxel vote score (n_fg - n_bg)/N with labels mapped to +/-1.
/// Unanimous voxels are marked decided.
ProbMap majority_vote(const std::vector<const LabelVolume*>& atlas_labels,
                      const BoundingBox& box);
ProbMap majority_vote(const AtlasSet& atlases, const BoundingBox& box);

/// Voxels without a unanimous vote, in box scan order.
std::vector<VoxelIndex> candidate_voxels(const ProbMap& mv);

/// Local label fusion: starting from the vote map, each candidate voxel
/// gets its own regression forest trained on balanced labelled patches
/// gathered from the atlas neighborhoods around it. Decided voxels pass
/// through untouched; output values lie in [-1, +1]. Results are identical
/// for any thread count.
ProbMap fuse_rf(const IntensityVolume& target,
                const std::vector<const Atlas*>& atlases,
                const std::vector<VoxelIndex>& candidates, const ProbMap& mv,
                const FusionConfig& cfg, int threads = 1);
ProbMap fuse_rf(const IntensityVolume& target, const AtlasSet& atlases,
                const std::vector<VoxelIndex>& candidates, const ProbMap& mv,
                const FusionConfig& cfg, int threads = 1);

/// Label 1 where value > threshold, else 0. The returned volume covers the
/// map's box extent.
LabelVolume binarize(const ProbMap& p, double threshold = 0.0);

}  // namespace maseg
