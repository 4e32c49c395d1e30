#include "maseg/phantom.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "maseg/errors.hpp"
#include "maseg/io.hpp"
#include "maseg/json_util.hpp"
#include "maseg/rng.hpp"

namespace maseg {

void PhantomSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ValidationError("phantom: dims must be positive");
    if (!(spacing[a] > 0.0))
      throw ValidationError("phantom: spacing must be positive");
    if (!(semi_axes[a] > 0.0))
      throw ValidationError("phantom: semi-axes must be positive");
  }
  if (n_atlases < 1) throw ValidationError("phantom: n_atlases must be >= 1");
  if (!(noise_sigma >= 0.0))
    throw ValidationError("phantom: noise_sigma must be >= 0");
  if (!(warp_amp >= 0.0)) throw ValidationError("phantom: warp_amp must be >= 0");
  if (warp_smooth < 0) throw ValidationError("phantom: warp_smooth must be >= 0");
  const double margin = warp_amp + 2.0;
  for (int a = 0; a < 3; ++a) {
    if (center[a] - semi_axes[a] < margin ||
        center[a] + semi_axes[a] > dims[a] - 1 - margin)
      throw ValidationError(
          "phantom: ellipsoid must keep a margin of warp_amp + 2 voxels "
          "from every volume face");
  }
}

PhantomSpec phantom_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("phantom spec: ") + e.what());
  }
  require_known_keys(j, "phantom spec",
                     {"dims", "spacing", "center", "semi_axes", "fg_intensity",
                      "bg_intensity", "noise_sigma", "n_atlases", "warp_amp",
                      "warp_smooth", "seed"});
  PhantomSpec s;
  read_field(j, "phantom spec", "dims", s.dims);
  read_field(j, "phantom spec", "spacing", s.spacing);
  read_field(j, "phantom spec", "center", s.center);
  read_field(j, "phantom spec", "semi_axes", s.semi_axes);
  read_field(j, "phantom spec", "fg_intensity", s.fg_intensity);
  read_field(j, "phantom spec", "bg_intensity", s.bg_intensity);
  read_field(j, "phantom spec", "noise_sigma", s.noise_sigma);
  read_field(j, "phantom spec", "n_atlases", s.n_atlases);
  read_field(j, "phantom spec", "warp_amp", s.warp_amp);
  read_field(j, "phantom spec", "warp_smooth", s.warp_smooth);
  read_field(j, "phantom spec", "seed", s.seed);
  s.validate();
  return s;
}

std::string phantom_spec_to_json(const PhantomSpec& s) {
  nlohmann::json j;
  j["dims"] = s.dims;
  j["spacing"] = s.spacing;
  j["center"] = s.center;
  j["semi_axes"] = s.semi_axes;
  j["fg_intensity"] = s.fg_intensity;
  j["bg_intensity"] = s.bg_intensity;
  j["noise_sigma"] = s.noise_sigma;
  j["n_atlases"] = s.n_atlases;
  j["warp_amp"] = s.warp_amp;
  j["warp_smooth"] = s.warp_smooth;
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

namespace {

/// One displacement component per voxel, x-fastest scan order.
struct Field {
  Eigen::ArrayXd x, y, z;
};

/// Truncated-window box mean of radius r along one axis; n0/n1/n2 are the
/// extents with stride0 the fastest.
void box_pass(Eigen::ArrayXd& a, const Dims3& d, int axis, int r) {
  if (r < 1) return;
  Eigen::ArrayXd out(a.size());
  const std::int64_t sx = 1, sy = d[0],
                     sz = static_cast<std::int64_t>(d[0]) * d[1];
  const std::int64_t strides[3] = {sx, sy, sz};
  const int n = d[axis];
  const std::int64_t stride = strides[axis];
  // iterate every line parallel to `axis`
  const int u_axis = axis == 0 ? 1 : 0;
  const int v_axis = axis == 2 ? 1 : 2;
  for (int v = 0; v < d[v_axis]; ++v)
    for (int u = 0; u < d[u_axis]; ++u) {
      const std::int64_t base = strides[u_axis] * u + strides[v_axis] * v;
      for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - r), hi = std::min(n - 1, i + r);
        double sum = 0.0;
        for (int k = lo; k <= hi; ++k) sum += a[base + stride * k];
        out[base + stride * i] = sum / (hi - lo + 1);
      }
    }
  a.swap(out);
}

Field make_warp_field(const PhantomSpec& spec, std::mt19937_64& rng) {
  const std::int64_t n =
      static_cast<std::int64_t>(spec.dims[0]) * spec.dims[1] * spec.dims[2];
  Field f{Eigen::ArrayXd(n), Eigen::ArrayXd(n), Eigen::ArrayXd(n)};
  if (spec.warp_amp == 0.0) {
    f.x.setZero();
    f.y.setZero();
    f.z.setZero();
    return f;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    f.x[i] = normal_double(rng);
    f.y[i] = normal_double(rng);
    f.z[i] = normal_double(rng);
  }
  // two box passes per axis approximate Gaussian smoothing
  for (int pass = 0; pass < 2; ++pass)
    for (int axis = 0; axis < 3; ++axis) {
      box_pass(f.x, spec.dims, axis, spec.warp_smooth);
      box_pass(f.y, spec.dims, axis, spec.warp_smooth);
      box_pass(f.z, spec.dims, axis, spec.warp_smooth);
    }
  const double max_norm =
      (f.x.square() + f.y.square() + f.z.square()).maxCoeff();
  if (max_norm > 0.0) {
    const double scale = spec.warp_amp / std::sqrt(max_norm);
    f.x *= scale;
    f.y *= scale;
    f.z *= scale;
  }
  const double check =
      std::sqrt((f.x.square() + f.y.square() + f.z.square()).maxCoeff());
  if (check > spec.warp_amp * (1.0 + 1e-9))
    throw ValidationError("phantom: warp field exceeds warp_amp");
  return f;
}

double sample_trilinear(const IntensityVolume& v, double sx, double sy,
                        double sz) {
  const Dims3 d = v.dims();
  sx = std::clamp(sx, 0.0, static_cast<double>(d[0] - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(d[1] - 1));
  sz = std::clamp(sz, 0.0, static_cast<double>(d[2] - 1));
  const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy),
            z0 = static_cast<int>(sz);
  const int x1 = std::min(x0 + 1, d[0] - 1), y1 = std::min(y0 + 1, d[1] - 1),
            z1 = std::min(z0 + 1, d[2] - 1);
  const double fx = sx - x0, fy = sy - y0, fz = sz - z0;
  auto at = [&](int x, int y, int z) {
    return static_cast<double>(v(VoxelIndex{x, y, z}));
  };
  const double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
  const double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
  const double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
  const double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

std::uint8_t sample_nearest(const LabelVolume& v, double sx, double sy,
                            double sz) {
  const Dims3 d = v.dims();
  const int x = std::clamp(static_cast<int>(std::llround(sx)), 0, d[0] - 1);
  const int y = std::clamp(static_cast<int>(std::llround(sy)), 0, d[1] - 1);
  const int z = std::clamp(static_cast<int>(std::llround(sz)), 0, d[2] - 1);
  return v(VoxelIndex{x, y, z});
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  Phantom ph{IntensityVolume(spec.dims, spec.spacing),
             LabelVolume(spec.dims, spec.spacing), {}};
  IntensityVolume clean(spec.dims, spec.spacing);

  const std::int64_t n = clean.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const VoxelIndex p = clean.delinearize(i);
    const double ex = (p.x - spec.center[0]) / spec.semi_axes[0];
    const double ey = (p.y - spec.center[1]) / spec.semi_axes[1];
    const double ez = (p.z - spec.center[2]) / spec.semi_axes[2];
    const bool inside = ex * ex + ey * ey + ez * ez <= 1.0;
    ph.truth[i] = inside ? 1 : 0;
    clean[i] = static_cast<float>(inside ? spec.fg_intensity : spec.bg_intensity);
  }

  auto rng_target = make_rng(mix_seed(spec.seed, 0));
  for (std::int64_t i = 0; i < n; ++i)
    ph.target[i] = static_cast<float>(
        clean[i] + spec.noise_sigma * normal_double(rng_target));

  ph.atlases.reserve(spec.n_atlases);
  for (int a = 0; a < spec.n_atlases; ++a) {
    auto rng_field = make_rng(mix_seed(spec.seed, 1 + 2 * static_cast<std::uint64_t>(a)));
    auto rng_noise = make_rng(mix_seed(spec.seed, 2 + 2 * static_cast<std::uint64_t>(a)));
    const Field f = make_warp_field(spec, rng_field);

    Atlas atlas{IntensityVolume(spec.dims, spec.spacing),
                LabelVolume(spec.dims, spec.spacing), ""};
    char name[16];
    std::snprintf(name, sizeof name, "atlas%02d", a);
    atlas.name = name;
    for (std::int64_t i = 0; i < n; ++i) {
      const VoxelIndex p = clean.delinearize(i);
      const double sx = p.x + f.x[i], sy = p.y + f.y[i], sz = p.z + f.z[i];
      atlas.image[i] = static_cast<float>(
          sample_trilinear(clean, sx, sy, sz) +
          spec.noise_sigma * normal_double(rng_noise));
      atlas.labels[i] = sample_nearest(ph.truth, sx, sy, sz);
    }
    ph.atlases.push_back(std::move(atlas));
  }
  return ph;
}

void write_phantom_dir(const Phantom& phantom, const PhantomSpec& spec,
                       const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

  write_volume(phantom.target, fs::path(dir) / "target");
  write_volume(phantom.truth, fs::path(dir) / "truth");
  for (std::size_t a = 0; a < phantom.atlases.size(); ++a) {
    char stem[16];
    std::snprintf(stem, sizeof stem, "atlas%02zu", a);
    write_volume(phantom.atlases[a].image,
                 fs::path(dir) / (std::string(stem) + "_img"));
    write_volume(phantom.atlases[a].labels,
                 fs::path(dir) / (std::string(stem) + "_lbl"));
  }
  std::ofstream out(fs::path(dir) / "spec.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + dir + "/spec.json");
  out << phantom_spec_to_json(spec);
}

PhantomDir read_phantom_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  PhantomDir pd{read_volume<float>(fs::path(dir) / "target"),
                read_volume<std::uint8_t>(fs::path(dir) / "truth"),
                load_atlas_dir(dir)};
  if (pd.atlases.empty()) throw IoError("phantom dir has no atlases: " + dir);
  for (const Atlas& a : pd.atlases)
    if (!a.image.same_grid(pd.target))
      throw IoError("phantom dir grids disagree: " + dir);
  return pd;
}

}  // namespace maseg
