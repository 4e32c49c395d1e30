#include "maseg/propagation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "maseg/errors.hpp"

namespace maseg {

void PropagationConfig::validate() const {
  if (!(sigma > 0.0)) throw ValidationError("propagation: sigma must be > 0");
  if (!(beta > 0.0 && beta < 1.0))
    throw ValidationError("propagation: beta must lie in (0,1)");
  if (!(reliable_threshold > 0.0 && reliable_threshold < 1.0))
    throw ValidationError("propagation: T must lie in (0,1)");
  if (stencil != 6 && stencil != 18 && stencil != 26)
    throw ValidationError("propagation: stencil must be 6, 18 or 26");
  if (max_iters < 1) throw ValidationError("propagation: max_iters must be >= 1");
  if (!(tol >= 0.0)) throw ValidationError("propagation: tol must be >= 0");
}

double gaussian_similarity(double ix, double iy, double sigma, bool same_voxel) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_similarity: sigma must be > 0");
  if (same_voxel) return 0.0;
  const double d = ix - iy;
  return std::exp(-(d * d) / (sigma * sigma));
}

namespace {

/// Half-stencil offsets (lexicographically positive), one per undirected
/// edge direction.
std::vector<VoxelIndex> half_stencil(int stencil) {
  std::vector<VoxelIndex> offsets;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (stencil == 6 && manhattan > 1) continue;
        if (stencil == 18 && manhattan > 2) continue;
        // keep one representative of each +/- pair
        if (dz > 0 || (dz == 0 && (dy > 0 || (dy == 0 && dx > 0))))
          offsets.push_back({dx, dy, dz});
      }
  return offsets;
}

}  // namespace

SimilarityGraph build_graph(const IntensityVolume& target, const BoundingBox& box,
                            const PropagationConfig& cfg) {
  cfg.validate();
  if (!box.inside(target.dims()))
    throw ValidationError("build_graph: box exceeds volume dims");
  const std::int64_t n = box.count();
  if (n <= 0) throw ValidationError("build_graph: empty box");

  SimilarityGraph g;
  g.box = box;
  g.stencil = cfg.stencil;

  const auto offsets = half_stencil(cfg.stencil);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * offsets.size() * 2);

  for (std::int64_t a = 0; a < n; ++a) {
    const VoxelIndex va = box.delocalize(a);
    for (const VoxelIndex& o : offsets) {
      const VoxelIndex vb{va.x + o.x, va.y + o.y, va.z + o.z};
      if (!box.contains(vb)) continue;
      const std::int64_t b = box.local_index(vb);
      const double w = gaussian_similarity(target(va), target(vb), cfg.sigma, false);
      triplets.emplace_back(a, b, w);
      triplets.emplace_back(b, a, w);
    }
  }

  g.W.resize(n, n);
  g.W.setFromTriplets(triplets.begin(), triplets.end());
  g.W.makeCompressed();

  g.degree = g.W * Eigen::VectorXd::Ones(n);

  // S = D^-1/2 W D^-1/2; rows of isolated nodes stay zero.
  Eigen::VectorXd inv_sqrt(n);
  for (std::int64_t i = 0; i < n; ++i)
    inv_sqrt[i] = g.degree[i] > 0.0 ? 1.0 / std::sqrt(g.degree[i]) : 0.0;
  g.S = g.W;
  for (int outer = 0; outer < g.S.outerSize(); ++outer)
    for (Eigen::SparseMatrix<double>::InnerIterator it(g.S, outer); it; ++it)
      it.valueRef() *= inv_sqrt[it.row()] * inv_sqrt[it.col()];
  g.S.makeCompressed();
  return g;
}

ProbMap balance_background(const ProbMap& p, double T, BalanceInfo* info) {
  if (!(T > 0.0 && T < 1.0))
    throw ValidationError("balance_background: T must lie in (0,1)");
  std::int64_t n_f = 0, n_b = 0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    if (p.values[i] > T) ++n_f;
    if (p.values[i] < -T) ++n_b;
  }

  BalanceInfo local;
  local.n_fg_reliable = n_f;
  local.n_bg_reliable = n_b;

  ProbMap out = p;
  if (n_b == 0) {
    local.balance_skipped = n_f > 0;
  } else {
    const double ratio = static_cast<double>(n_f) / static_cast<double>(n_b);
    for (std::int64_t i = 0; i < p.size(); ++i)
      if (p.values[i] < -T)
        out.values[i] = -std::max(ratio * std::abs(p.values[i]), T);
  }
  if (info) *info = local;
  return out;
}

ProbMap normalize_by_class_mean(const ProbMap& p) {
  double pos_sum = 0.0, neg_sum = 0.0;
  std::int64_t pos_n = 0, neg_n = 0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    if (p.values[i] > 0.0) { pos_sum += p.values[i]; ++pos_n; }
    else if (p.values[i] < 0.0) { neg_sum += p.values[i]; ++neg_n; }
  }
  ProbMap out = p;
  if (pos_n > 0) {
    const double scale = std::abs(pos_sum / pos_n);
    for (std::int64_t i = 0; i < p.size(); ++i)
      if (p.values[i] > 0.0) out.values[i] = p.values[i] / scale;
  }
  if (neg_n > 0) {
    const double scale = std::abs(neg_sum / neg_n);
    for (std::int64_t i = 0; i < p.size(); ++i)
      if (p.values[i] < 0.0) out.values[i] = p.values[i] / scale;
  }
  return out;
}

ProbMap balance_weights(const ProbMap& p, double T, BalanceInfo* info) {
  return normalize_by_class_mean(balance_background(p, T, info));
}

ProbMap propagate(const ProbMap& l0, const SimilarityGraph& graph,
                  const PropagationConfig& cfg, int* iterations) {
  cfg.validate();
  if (l0.size() != graph.node_count())
    throw ValidationError("propagate: map size does not match graph");

  const double beta = cfg.beta;
  const Eigen::VectorXd base = beta * l0.values.matrix();
  Eigen::VectorXd cur = l0.values.matrix();
  Eigen::VectorXd next(cur.size());

  int it = 0;
  // Synchronous update: the full L^n is read before L^{n+1} is written.
  for (; it < cfg.max_iters; ++it) {
    next.noalias() = (1.0 - beta) * (graph.S * cur);
    next += base;
    const double delta = (next - cur).lpNorm<Eigen::Infinity>();
    cur.swap(next);
    if (delta < cfg.tol) { ++it; break; }
  }
  if (iterations) *iterations = it;

  ProbMap out = l0;
  out.values = cur.array();
  return out;
}

ProbMap solve_direct(const ProbMap& l0, const SimilarityGraph& graph, double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw ValidationError("solve_direct: beta must lie in (0,1)");
  if (l0.size() != graph.node_count())
    throw ValidationError("solve_direct: map size does not match graph");
  const std::int64_t n = graph.node_count();
  if (n > 4000)
    throw ValidationError("solve_direct: dense solve guarded to <= 4000 nodes");

  // I - (1-beta) S is symmetric positive definite (spectrum of S in [-1,1]).
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) -
                      (1.0 - beta) * Eigen::MatrixXd(graph.S);
  const Eigen::VectorXd rhs = beta * l0.values.matrix();
  const Eigen::VectorXd sol = A.llt().solve(rhs);

  ProbMap out = l0;
  out.values = sol.array();
  return out;
}

ProbMap refine(const ProbMap& l0, const IntensityVolume& target,
               const PropagationConfig& cfg, RefineStats* stats) {
  cfg.validate();
  RefineStats local;
  const ProbMap weighted =
      balance_weights(l0, cfg.reliable_threshold, &local.balance);
  const SimilarityGraph graph = build_graph(target, l0.box, cfg);
  ProbMap out = propagate(weighted, graph, cfg, &local.iterations);
  if (stats) *stats = local;
  return out;
}

}  // namespace maseg
