#include "maseg/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "maseg/errors.hpp"

namespace maseg {

using nlohmann::json;

std::filesystem::path mvol_stem(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".json" || ext == ".raw") {
    auto p = path;
    p.replace_extension();
    return p;
  }
  return path;
}

namespace {

json read_header(const std::filesystem::path& stem) {
  const auto hpath = std::filesystem::path(stem).concat(".json");
  std::ifstream in(hpath);
  if (!in) throw IoError("cannot open volume header " + hpath.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed volume header " + hpath.string() + ": " + e.what());
  }
  for (const char* key : {"dims", "spacing_mm", "dtype", "order"})
    if (!j.contains(key))
      throw IoError("volume header " + hpath.string() + " missing field '" +
                    key + "'");
  if (j["order"].get<std::string>() != "x-fastest")
    throw IoError("volume header " + hpath.string() + ": unsupported order '" +
                  j["order"].get<std::string>() + "'");
  return j;
}

}  // namespace

std::string read_volume_dtype(const std::filesystem::path& path) {
  return read_header(mvol_stem(path))["dtype"].get<std::string>();
}

template <typename Scalar>
Volume<Scalar> read_volume(const std::filesystem::path& path) {
  const auto stem = mvol_stem(path);
  const json j = read_header(stem);

  const std::string dtype = j["dtype"].get<std::string>();
  if (dtype != "f32" && dtype != "u8")
    throw IoError("volume " + stem.string() + ": unknown dtype '" + dtype + "'");
  if (dtype != MvolDtype<Scalar>::tag)
    throw IoError("volume " + stem.string() + ": dtype is '" + dtype +
                  "', expected '" + MvolDtype<Scalar>::tag + "'");

  const auto dims_v = j["dims"].get<std::vector<std::int64_t>>();
  const auto spacing_v = j["spacing_mm"].get<std::vector<double>>();
  if (dims_v.size() != 3 || spacing_v.size() != 3)
    throw IoError("volume " + stem.string() + ": dims/spacing_mm must have 3 entries");
  for (auto d : dims_v)
    if (d <= 0 || d > (1 << 24))
      throw IoError("volume " + stem.string() + ": bad dims");

  Volume<Scalar> v;
  try {
    v = Volume<Scalar>({static_cast<int>(dims_v[0]), static_cast<int>(dims_v[1]),
                        static_cast<int>(dims_v[2])},
                       {spacing_v[0], spacing_v[1], spacing_v[2]});
  } catch (const ValidationError& e) {
    throw IoError("volume " + stem.string() + ": " + e.what());
  }

  const auto rpath = std::filesystem::path(stem).concat(".raw");
  std::ifstream in(rpath, std::ios::binary);
  if (!in) throw IoError("cannot open volume data " + rpath.string());
  const std::int64_t expected =
      v.size() * static_cast<std::int64_t>(sizeof(Scalar));
  in.seekg(0, std::ios::end);
  const std::int64_t actual = static_cast<std::int64_t>(in.tellg());
  if (actual != expected)
    throw IoError("volume " + rpath.string() + ": data length " +
                  std::to_string(actual) + " does not match header (" +
                  std::to_string(expected) + " bytes)");
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), expected);
  if (!in) throw IoError("short read on " + rpath.string());

  if constexpr (std::is_same_v<Scalar, std::uint8_t>) {
    try {
      validate_binary(v, stem.string());
    } catch (const ValidationError& e) {
      throw IoError(e.what());
    }
  }
  return v;
}

template <typename Scalar>
void write_volume(const Volume<Scalar>& v, const std::filesystem::path& path) {
  if (v.size() == 0) throw ValidationError("write_volume: empty volume");
  const auto stem = mvol_stem(path);

  json j;
  j["dims"] = {v.nx(), v.ny(), v.nz()};
  j["spacing_mm"] = {v.spacing_mm()[0], v.spacing_mm()[1], v.spacing_mm()[2]};
  j["dtype"] = MvolDtype<Scalar>::tag;
  j["order"] = "x-fastest";

  const auto hpath = std::filesystem::path(stem).concat(".json");
  std::ofstream hout(hpath);
  if (!hout) throw IoError("cannot write volume header " + hpath.string());
  hout << j.dump(2) << '\n';
  if (!hout.flush()) throw IoError("write failed on " + hpath.string());

  const auto rpath = std::filesystem::path(stem).concat(".raw");
  std::ofstream rout(rpath, std::ios::binary);
  if (!rout) throw IoError("cannot write volume data " + rpath.string());
  rout.write(reinterpret_cast<const char*>(v.data()),
             v.size() * static_cast<std::int64_t>(sizeof(Scalar)));
  if (!rout.flush()) throw IoError("write failed on " + rpath.string());
}

template Volume<float> read_volume<float>(const std::filesystem::path&);
template Volume<std::uint8_t> read_volume<std::uint8_t>(const std::filesystem::path&);
template void write_volume<float>(const Volume<float>&, const std::filesystem::path&);
template void write_volume<std::uint8_t>(const Volume<std::uint8_t>&,
                                         const std::filesystem::path&);

AtlasSet load_atlas_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("atlas directory " + dir.string() + " does not exist");
  std::vector<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto p = entry.path();
    if (p.extension() != ".json") continue;
    const std::string base = p.stem().string();
    constexpr const char* img_suffix = "_img";
    if (base.size() > 4 && base.ends_with(img_suffix))
      stems.push_back(base.substr(0, base.size() - 4));
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty())
    throw IoError("atlas directory " + dir.string() +
                  " has no '*_img.json' volumes");

  AtlasSet atlases;
  atlases.reserve(stems.size());
  for (const auto& stem : stems) {
    Atlas a;
    a.name = stem;
    a.image = read_volume<float>(dir / (stem + "_img"));
    a.labels = read_volume<std::uint8_t>(dir / (stem + "_lbl"));
    if (!a.image.same_grid(a.labels))
      throw ValidationError("atlas " + stem + ": image/label grids differ");
    atlases.push_back(std::move(a));
  }
  return atlases;
}

}  // namespace maseg
