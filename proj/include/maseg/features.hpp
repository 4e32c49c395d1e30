#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "maseg/volume.hpp"

namespace maseg {

enum class FeatureMode {
  IntensityOnly,         // z-normalized patch intensities
  IntensityPlusTexture,  // + per-voxel gradient magnitudes + 4 patch statistics
};

struct PatchConfig {
  int patch_radius = 3;        // patch edge = 2*patch_radius + 1  (default 7^3)
  int neighborhood_radius = 1; // sample neighborhood edge = 2r + 1 (default 3^3)
  FeatureMode feature_mode = FeatureMode::IntensityPlusTexture;

  int patch_edge() const { return 2 * patch_radius + 1; }
  std::int64_t patch_size() const {
    const std::int64_t e = patch_edge();
    return e * e * e;
  }
  std::int64_t neighborhood_size() const {
    const std::int64_t e = 2 * neighborhood_radius + 1;
    return e * e * e;
  }
  /// Feature vector length is a pure function of the config.
  std::int64_t feature_length() const {
    return feature_mode == FeatureMode::IntensityOnly ? patch_size()
                                                      : 2 * patch_size() + 4;
  }
  void validate() const;
};

/// Cubic patch around `center` in volume scan order (x fastest); positions
/// outside the volume are zero-filled.
void extract_patch_into(const IntensityVolume& v, const VoxelIndex& center,
                        const PatchConfig& cfg, Eigen::ArrayXf& out);
Eigen::ArrayXf extract_patch(const IntensityVolume& v, const VoxelIndex& center,
                             const PatchConfig& cfg);

/// IntensityOnly: z-normalized intensities (population std; an all-constant
/// patch maps to the zero vector). IntensityPlusTexture appends
/// central-difference gradient magnitudes per patch voxel (one-sided at the
/// patch faces) and the raw patch's mean, std, min and max.
void compute_features_into(const Eigen::ArrayXf& patch, const PatchConfig& cfg,
                           Eigen::ArrayXf& out);
Eigen::ArrayXf compute_features(const Eigen::ArrayXf& patch, const PatchConfig& cfg);

/// Sum of squared differences of raw patch intensities.
double patch_distance(const Eigen::ArrayXf& a, const Eigen::ArrayXf& b);

/// Column-packed pool of labelled raw patches gathered for one target voxel.
/// `atlas_index` / `voxel_index` record the provenance used for the
/// deterministic tie-break during selection.
struct PatchSampleBank {
  Eigen::MatrixXf patches;  // patch_size x count, one column per sample
  std::vector<float> labels;               // +1 / -1
  std::vector<std::int32_t> atlas_index;
  std::vector<std::int64_t> voxel_index;   // full-volume scan index

  std::int32_t count() const { return static_cast<std::int32_t>(labels.size()); }
  void reset(std::int64_t patch_len, std::int32_t capacity);
  void push(const Eigen::ArrayXf& patch, float label, std::int32_t atlas,
            std::int64_t voxel);
};

struct BalancedSelection {
  /// Indices into the bank: the selected positives (nearest first), then the
  /// selected negatives.
  std::vector<std::int32_t> indices;
  std::int32_t n_positive = 0;
  std::int32_t n_negative = 0;
  bool positive_short = false;  // class had fewer than k members
  bool negative_short = false;
};

/// The k positive and k negative samples whose raw patches are nearest the
/// target patch (SSD), ties broken by atlas index then voxel scan order.
/// A class smaller than k is returned whole with its shortfall flagged;
/// an empty class is an error (callers fall back to the vote label).
BalancedSelection select_balanced_samples(const PatchSampleBank& bank,
                                          const Eigen::ArrayXf& target_patch,
                                          int k);

}  // namespace maseg
