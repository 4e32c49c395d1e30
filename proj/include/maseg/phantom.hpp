#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "maseg/volume.hpp"

namespace maseg {

/// Parameters of a synthetic segmentation scene: an ellipsoid foreground in
/// a two-level image, plus n_atlases pre-aligned copies perturbed by smooth
/// random warps and independent noise.
struct PhantomSpec {
  Dims3 dims{40, 40, 40};
  Spacing3 spacing{1.0, 1.0, 1.0};
  std::array<double, 3> center{20.0, 20.0, 20.0};
  std::array<double, 3> semi_axes{9.0, 7.0, 6.0};
  double fg_intensity = 100.0;
  double bg_intensity = 40.0;
  double noise_sigma = 8.0;
  int n_atlases = 20;
  double warp_amp = 2.0;      // max displacement-vector norm, in voxels
  int warp_smooth = 20;       // box-smoothing radius for the warp field
  std::uint64_t seed = 0;

  /// Rejects non-positive geometry and ellipsoids closer than warp_amp + 2
  /// voxels to any volume face.
  void validate() const;
};

PhantomSpec phantom_spec_from_json(const std::string& text);
std::string phantom_spec_to_json(const PhantomSpec& spec);

struct Phantom {
  IntensityVolume target;
  LabelVolume truth;
  AtlasSet atlases;
};

/// Deterministic in spec.seed; target noise and each atlas's warp field and
/// noise come from independent substreams, so n_atlases can grow without
/// changing earlier atlases.
Phantom generate_phantom(const PhantomSpec& spec);

/// Writes target, truth, atlasNN_img / atlasNN_lbl volume pairs and
/// spec.json into dir (created if needed).
void write_phantom_dir(const Phantom& phantom, const PhantomSpec& spec,
                       const std::string& dir);

struct PhantomDir {
  IntensityVolume target;
  LabelVolume truth;
  AtlasSet atlases;
};

/// Reads back a directory produced by write_phantom_dir (spec.json ignored).
PhantomDir read_phantom_dir(const std::string& dir);

}  // namespace maseg
