#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "maseg/errors.hpp"

namespace maseg {

struct VoxelIndex {
  int x = 0;
  int y = 0;
  int z = 0;

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

using Dims3 = std::array<int, 3>;
using Spacing3 = std::array<double, 3>;

/// Dense 3D scalar grid. Data is stored in x-fastest linear order
/// (index = x + nx*(y + ny*z)), which is also the on-disk order.
/// Volumes are treated as immutable once filled and are safe to share
/// across threads.
template <typename Scalar>
class Volume {
public:
  Volume() = default;

  Volume(Dims3 dims, Spacing3 spacing_mm = {1.0, 1.0, 1.0})
      : dims_(dims), spacing_(spacing_mm) {
    for (int d = 0; d < 3; ++d) {
      if (dims_[d] <= 0)
        throw ValidationError("Volume: dims must be positive");
      if (!(spacing_[d] > 0.0) || !std::isfinite(spacing_[d]))
        throw ValidationError("Volume: spacing must be positive and finite");
    }
    data_.setZero(static_cast<std::int64_t>(dims_[0]) * dims_[1] * dims_[2]);
  }

  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  const Dims3& dims() const { return dims_; }
  const Spacing3& spacing_mm() const { return spacing_; }
  std::int64_t size() const { return data_.size(); }

  std::int64_t linear_index(int x, int y, int z) const {
    return x + static_cast<std::int64_t>(dims_[0]) *
                   (y + static_cast<std::int64_t>(dims_[1]) * z);
  }
  std::int64_t linear_index(const VoxelIndex& v) const {
    return linear_index(v.x, v.y, v.z);
  }

  VoxelIndex delinearize(std::int64_t i) const {
    const int x = static_cast<int>(i % dims_[0]);
    const std::int64_t r = i / dims_[0];
    return {x, static_cast<int>(r % dims_[1]), static_cast<int>(r / dims_[1])};
  }

  bool contains(const VoxelIndex& v) const {
    return v.x >= 0 && v.x < dims_[0] && v.y >= 0 && v.y < dims_[1] &&
           v.z >= 0 && v.z < dims_[2];
  }

  Scalar operator()(int x, int y, int z) const { return data_[linear_index(x, y, z)]; }
  Scalar& operator()(int x, int y, int z) { return data_[linear_index(x, y, z)]; }
  Scalar operator()(const VoxelIndex& v) const { return data_[linear_index(v)]; }
  Scalar& operator()(const VoxelIndex& v) { return data_[linear_index(v)]; }
  Scalar operator[](std::int64_t i) const { return data_[i]; }
  Scalar& operator[](std::int64_t i) { return data_[i]; }

  Eigen::ArrayX<Scalar>& array() { return data_; }
  const Eigen::ArrayX<Scalar>& array() const { return data_; }
  const Scalar* data() const { return data_.data(); }
  Scalar* data() { return data_.data(); }

  template <typename OtherScalar>
  bool same_grid(const Volume<OtherScalar>& other) const {
    return dims_ == other.dims() && spacing_ == other.spacing_mm();
  }

  friend bool operator==(const Volume& a, const Volume& b) {
    return a.dims_ == b.dims_ && a.spacing_ == b.spacing_ &&
           (a.data_ == b.data_).all();
  }

private:
  Dims3 dims_{0, 0, 0};
  Spacing3 spacing_{1.0, 1.0, 1.0};
  Eigen::ArrayX<Scalar> data_;
};

using IntensityVolume = Volume<float>;
using LabelVolume = Volume<std::uint8_t>;

/// Axis-aligned voxel box with inclusive corners.
struct BoundingBox {
  VoxelIndex min_corner;
  VoxelIndex max_corner;

  int ex() const { return max_corner.x - min_corner.x + 1; }
  int ey() const { return max_corner.y - min_corner.y + 1; }
  int ez() const { return max_corner.z - min_corner.z + 1; }
  Dims3 extent() const { return {ex(), ey(), ez()}; }
  std::int64_t count() const {
    return static_cast<std::int64_t>(ex()) * ey() * ez();
  }

  bool well_formed() const {
    return min_corner.x <= max_corner.x && min_corner.y <= max_corner.y &&
           min_corner.z <= max_corner.z && min_corner.x >= 0 &&
           min_corner.y >= 0 && min_corner.z >= 0;
  }

  bool inside(const Dims3& dims) const {
    return well_formed() && max_corner.x < dims[0] && max_corner.y < dims[1] &&
           max_corner.z < dims[2];
  }

  bool contains(const VoxelIndex& v) const {
    return v.x >= min_corner.x && v.x <= max_corner.x && v.y >= min_corner.y &&
           v.y <= max_corner.y && v.z >= min_corner.z && v.z <= max_corner.z;
  }

  /// Box-local linear index in x-fastest scan order over the box.
  std::int64_t local_index(const VoxelIndex& v) const {
    return (v.x - min_corner.x) +
           static_cast<std::int64_t>(ex()) *
               ((v.y - min_corner.y) +
                static_cast<std::int64_t>(ey()) * (v.z - min_corner.z));
  }

  VoxelIndex delocalize(std::int64_t i) const {
    const int x = static_cast<int>(i % ex());
    const std::int64_t r = i / ex();
    return {min_corner.x + x, min_corner.y + static_cast<int>(r % ey()),
            min_corner.z + static_cast<int>(r / ey())};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// One registered atlas: intensity image plus its binary segmentation,
/// both on the target's grid. `name` is the file stem used for the
/// canonical ordering of an atlas directory.
struct Atlas {
  IntensityVolume image;
  LabelVolume labels;
  std::string name;
};

using AtlasSet = std::vector<Atlas>;

template <typename Scalar>
Volume<Scalar> crop(const Volume<Scalar>& v, const BoundingBox& box) {
  if (!box.inside(v.dims()))
    throw ValidationError("crop: box exceeds volume dims");
  Volume<Scalar> out(box.extent(), v.spacing_mm());
  std::int64_t o = 0;
  for (int z = box.min_corner.z; z <= box.max_corner.z; ++z)
    for (int y = box.min_corner.y; y <= box.max_corner.y; ++y) {
      const Scalar* row = v.data() + v.linear_index(box.min_corner.x, y, z);
      for (int x = 0; x < box.ex(); ++x) out[o++] = row[x];
    }
  return out;
}

/// Smallest box containing every nonzero voxel of every input, dilated by
/// `margin` voxels and clamped to the volume dims. Throws when no input
/// has any foreground.
inline BoundingBox bounding_box_from_labels(
    const std::vector<const LabelVolume*>& labels, int margin) {
  if (labels.empty())
    throw ValidationError("bounding_box_from_labels: no label volumes");
  if (margin < 0)
    throw ValidationError("bounding_box_from_labels: negative margin");
  const Dims3 dims = labels.front()->dims();
  VoxelIndex lo{dims[0], dims[1], dims[2]};
  VoxelIndex hi{-1, -1, -1};
  for (const LabelVolume* lv : labels) {
    if (lv->dims() != dims)
      throw ValidationError("bounding_box_from_labels: mismatched dims");
    std::int64_t i = 0;
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x, ++i) {
          if ((*lv)[i] != 0) {
            lo.x = std::min(lo.x, x); lo.y = std::min(lo.y, y); lo.z = std::min(lo.z, z);
            hi.x = std::max(hi.x, x); hi.y = std::max(hi.y, y); hi.z = std::max(hi.z, z);
          }
        }
  }
  if (hi.x < 0)
    throw ValidationError("bounding_box_from_labels: all labels are empty");
  BoundingBox box;
  box.min_corner = {std::max(0, lo.x - margin), std::max(0, lo.y - margin),
                    std::max(0, lo.z - margin)};
  box.max_corner = {std::min(dims[0] - 1, hi.x + margin),
                    std::min(dims[1] - 1, hi.y + margin),
                    std::min(dims[2] - 1, hi.z + margin)};
  return box;
}

inline BoundingBox bounding_box_from_labels(const std::vector<LabelVolume>& labels,
                                            int margin) {
  std::vector<const LabelVolume*> ptrs;
  ptrs.reserve(labels.size());
  for (const LabelVolume& lv : labels) ptrs.push_back(&lv);
  return bounding_box_from_labels(ptrs, margin);
}

/// Every stored label must be 0 or 1.
inline void validate_binary(const LabelVolume& v, const std::string& what) {
  for (std::int64_t i = 0; i < v.size(); ++i)
    if (v[i] > 1)
      throw ValidationError(what + ": label volume contains values outside {0,1}");
}

}  // namespace maseg
