#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "maseg/volume.hpp"

namespace maseg {

/// Per-voxel real segmentation score over a region of interest, in box
/// scan order (x fastest). Sign encodes class (+ foreground), magnitude
/// encodes confidence. Fusion outputs lie in [-1, +1]; the class-wise
/// normalization applied before propagation may rescale beyond that range.
/// `decided` marks voxels fixed by a unanimous vote; those always carry
/// exactly +1 or -1 when produced by fusion.
struct ProbMap {
  BoundingBox box;
  Eigen::ArrayXd values;
  std::vector<std::uint8_t> decided;

  ProbMap() = default;
  explicit ProbMap(const BoundingBox& b)
      : box(b), values(Eigen::ArrayXd::Zero(b.count())),
        decided(static_cast<std::size_t>(b.count()), 0) {}

  std::int64_t size() const { return values.size(); }
  double operator()(const VoxelIndex& v) const { return values[box.local_index(v)]; }
  double& operator()(const VoxelIndex& v) { return values[box.local_index(v)]; }
};

}  // namespace maseg
