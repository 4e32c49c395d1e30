#pragma once

#include <bit>
#include <filesystem>
#include <string>

#include "maseg/volume.hpp"

// MVOL on-disk format: a `<name>.json` header next to a `<name>.raw` data
// file. The header is a UTF-8 JSON object with fields
//   dims        [nx, ny, nz]
//   spacing_mm  [sx, sy, sz]
//   dtype       "f32" | "u8"
//   order       "x-fastest"
// and the raw file holds exactly nx*ny*nz little-endian values of the
// declared dtype. Round trips are bit-exact.

static_assert(std::endian::native == std::endian::little,
              "MVOL I/O assumes a little-endian host");

namespace maseg {

template <typename Scalar>
struct MvolDtype;
template <>
struct MvolDtype<float> {
  static constexpr const char* tag = "f32";
};
template <>
struct MvolDtype<std::uint8_t> {
  static constexpr const char* tag = "u8";
};

/// Accepts the stem, the .json path or the .raw path; returns the stem.
std::filesystem::path mvol_stem(const std::filesystem::path& path);

/// Reads the dtype tag from a header without loading data.
std::string read_volume_dtype(const std::filesystem::path& path);

template <typename Scalar>
Volume<Scalar> read_volume(const std::filesystem::path& path);

template <typename Scalar>
void write_volume(const Volume<Scalar>& v, const std::filesystem::path& path);

/// Loads `<stem>_img.{json,raw}` / `<stem>_lbl.{json,raw}` pairs from a
/// directory, ordered by file name. Atlas names are the pair stems.
AtlasSet load_atlas_dir(const std::filesystem::path& dir);

}  // namespace maseg
