#include "maseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "maseg/errors.hpp"

namespace maseg {

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["dice"] = dice;
  j["mean_distance_mm"] = mean_distance_mm;
  j["n_pred"] = n_pred;
  j["n_truth"] = n_truth;
  return j.dump(2) + "\n";
}

double dice(const LabelVolume& pred, const LabelVolume& truth) {
  if (pred.dims() != truth.dims())
    throw ValidationError("dice: dims mismatch");
  std::int64_t a = 0, b = 0, both = 0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const bool pa = pred[i] != 0, pb = truth[i] != 0;
    a += pa;
    b += pb;
    both += pa && pb;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

std::vector<VoxelIndex> boundary_voxels(const LabelVolume& mask) {
  const Dims3 d = mask.dims();
  std::vector<VoxelIndex> out;
  auto bg = [&](int x, int y, int z) {
    // outside the volume counts as background
    if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2])
      return true;
    return mask(VoxelIndex{x, y, z}) == 0;
  };
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        if (mask(VoxelIndex{x, y, z}) == 0) continue;
        if (bg(x - 1, y, z) || bg(x + 1, y, z) || bg(x, y - 1, z) ||
            bg(x, y + 1, z) || bg(x, y, z - 1) || bg(x, y, z + 1))
          out.push_back({x, y, z});
      }
  return out;
}

namespace {

double directed_mean(const std::vector<VoxelIndex>& from,
                     const std::vector<VoxelIndex>& to, const Spacing3& sp) {
  double total = 0.0;
  for (const VoxelIndex& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const VoxelIndex& b : to) {
      const double dx = (a.x - b.x) * sp[0];
      const double dy = (a.y - b.y) * sp[1];
      const double dz = (a.z - b.z) * sp[2];
      const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (dist < best) best = dist;
    }
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double mean_distance(const LabelVolume& pred, const LabelVolume& truth) {
  if (pred.dims() != truth.dims())
    throw ValidationError("mean_distance: dims mismatch");
  if (pred.spacing_mm() != truth.spacing_mm())
    throw ValidationError("mean_distance: spacing mismatch");
  const auto bp = boundary_voxels(pred);
  const auto bt = boundary_voxels(truth);
  if (bp.empty() || bt.empty())
    throw ValidationError("mean_distance: empty mask");
  const Spacing3 sp = pred.spacing_mm();
  return 0.5 * (directed_mean(bp, bt, sp) + directed_mean(bt, bp, sp));
}

namespace {

/// Bin index in [0, bins) for value v in [lo, hi]; everything collapses to
/// bin 0 when the range is degenerate.
int bin_of(float v, float lo, float hi, int bins) {
  if (!(hi > lo)) return 0;
  const double t = (static_cast<double>(v) - lo) / (static_cast<double>(hi) - lo);
  const int idx = static_cast<int>(t * bins);
  return std::clamp(idx, 0, bins - 1);
}

double entropy_nats(const std::vector<double>& p) {
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

}  // namespace

double nmi(const IntensityVolume& a, const IntensityVolume& b, int bins) {
  if (a.dims() != b.dims()) throw ValidationError("nmi: dims mismatch");
  if (bins < 2) throw ValidationError("nmi: bins must be >= 2");
  const std::int64_t n = a.size();
  if (n == 0) throw ValidationError("nmi: empty volume");

  const float alo = a.array().minCoeff(), ahi = a.array().maxCoeff();
  const float blo = b.array().minCoeff(), bhi = b.array().maxCoeff();
  if (!(ahi > alo) && !(bhi > blo)) return 2.0;  // both constant: sentinel

  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  const double w = 1.0 / static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const int ia = bin_of(a[i], alo, ahi, bins);
    const int ib = bin_of(b[i], blo, bhi, bins);
    joint[static_cast<std::size_t>(ia) * bins + ib] += w;
  }

  std::vector<double> ma(bins, 0.0), mb(bins, 0.0);
  for (int ia = 0; ia < bins; ++ia)
    for (int ib = 0; ib < bins; ++ib) {
      const double q = joint[static_cast<std::size_t>(ia) * bins + ib];
      ma[ia] += q;
      mb[ib] += q;
    }

  const double hj = entropy_nats(joint);
  if (hj == 0.0) return 2.0;  // degenerate single joint cell
  return (entropy_nats(ma) + entropy_nats(mb)) / hj;
}

std::vector<std::size_t> rank_atlases(const IntensityVolume& target,
                                      const AtlasSet& atlases,
                                      const BoundingBox& box, std::size_t n) {
  if (n > atlases.size())
    throw ValidationError("rank_atlases: n exceeds atlas count");
  const IntensityVolume t = crop(target, box);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(atlases.size());
  for (std::size_t i = 0; i < atlases.size(); ++i) {
    if (!atlases[i].image.same_grid(target))
      throw ValidationError("rank_atlases: atlas grid mismatch");
    scored.emplace_back(nmi(t, crop(atlases[i].image, box)), i);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scored[i].second;
  return out;
}

}  // namespace maseg
