#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maseg/volume.hpp"

namespace maseg {

/// Evaluation summary for one predicted mask against ground truth.
struct EvalReport {
  double dice = 0.0;
  double mean_distance_mm = 0.0;
  std::int64_t n_pred = 0;   // foreground voxels in the prediction
  std::int64_t n_truth = 0;  // foreground voxels in the truth

  std::string to_json() const;
};

/// Dice overlap 2|A&B| / (|A|+|B|), 1 when both masks are empty.
double dice(const LabelVolume& pred, const LabelVolume& truth);

/// Symmetric mean surface distance in millimetres: the average of the two
/// directed means over boundary voxels (foreground voxels with at least one
/// background 6-neighbor; volume faces count as background) of the Euclidean
/// distance, scaled by spacing, to the nearest boundary voxel of the other
/// mask. Both masks must be nonempty and share dims and spacing.
double mean_distance(const LabelVolume& pred, const LabelVolume& truth);

/// Boundary voxels of a binary mask in scan order (helper shared with the
/// brute-force test oracle's expectations).
std::vector<VoxelIndex> boundary_voxels(const LabelVolume& mask);

/// Normalized mutual information (H(A)+H(B)) / H(A,B) over a joint histogram
/// with `bins` equal-width bins spanning each image's own min-max range;
/// entropies in nats. A constant image occupies a single bin, giving H = 0;
/// when both images are constant the result is the sentinel 2.
double nmi(const IntensityVolume& a, const IntensityVolume& b, int bins = 64);

/// Indices of the n atlases with the highest NMI between their intensity
/// image and the target inside `box`, in descending NMI order, ties broken
/// by lower index.
std::vector<std::size_t> rank_atlases(const IntensityVolume& target,
                                      const AtlasSet& atlases,
                                      const BoundingBox& box, std::size_t n);

}  // namespace maseg
