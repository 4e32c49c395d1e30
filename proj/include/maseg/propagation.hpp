#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>

#include "maseg/prob_map.hpp"
#include "maseg/volume.hpp"

namespace maseg {

struct PropagationConfig {
  double sigma = 10.0;             // intensity similarity scale
  double beta = 0.6;               // trade-off in (0,1)
  double reliable_threshold = 0.5; // T: |value| > T marks a reliable label
  int stencil = 26;                // 6 | 18 | 26 neighborhood
  int max_iters = 500;
  double tol = 1e-6;               // max-abs update convergence test

  void validate() const;
};

/// Voxel-affinity graph over a region of interest. Nodes are the box voxels
/// in scan order; edges follow the stencil. W holds the Gaussian intensity
/// affinities (symmetric, zero diagonal, entries in [0,1]), degree the row
/// sums, and S the symmetric normalization D^-1/2 W D^-1/2 whose spectrum
/// lies in [-1, 1]. Zero-degree nodes get zero S rows.
struct SimilarityGraph {
  BoundingBox box;
  int stencil = 26;
  Eigen::SparseMatrix<double> W;
  Eigen::SparseMatrix<double> S;
  Eigen::VectorXd degree;

  std::int64_t node_count() const { return degree.size(); }
};

/// exp(-(ix-iy)^2 / sigma^2) for distinct voxels, 0 on the diagonal.
double gaussian_similarity(double ix, double iy, double sigma, bool same_voxel);

SimilarityGraph build_graph(const IntensityVolume& target, const BoundingBox& box,
                            const PropagationConfig& cfg);

struct BalanceInfo {
  std::int64_t n_fg_reliable = 0;
  std::int64_t n_bg_reliable = 0;
  bool balance_skipped = false;  // no reliable background to rescale against
};

/// Information-balance step alone: every reliable background value P_b
/// (value < -T) becomes -max((N_f/N_b)|P_b|, T), which keeps its magnitude
/// at or above T. Skipped (and flagged) when N_b = 0 while N_f > 0.
ProbMap balance_background(const ProbMap& p, double T, BalanceInfo* info = nullptr);

/// Class-wise normalization: positive values divided by |mean of positives|,
/// negative values by |mean of negatives|; an empty class is left alone.
/// Post-condition: each nonempty class has mean exactly +1 / -1.
ProbMap normalize_by_class_mean(const ProbMap& p);

/// balance_background followed by normalize_by_class_mean.
ProbMap balance_weights(const ProbMap& p, double T, BalanceInfo* info = nullptr);

/// Fixed-point iteration L <- (1-beta) S L + beta L0 from L0, stopped when
/// the max-abs update drops below tol or at max_iters. The map is a
/// contraction with factor (1-beta), so convergence is geometric.
ProbMap propagate(const ProbMap& l0, const SimilarityGraph& graph,
                  const PropagationConfig& cfg, int* iterations = nullptr);

/// Exact minimizer (I - (1-beta) S) L = beta L0 by dense Cholesky;
/// test-scale oracle, guarded to small graphs.
ProbMap solve_direct(const ProbMap& l0, const SimilarityGraph& graph, double beta);

struct RefineStats {
  BalanceInfo balance;
  int iterations = 0;
};

/// Full refinement: balance_weights, then propagation over the intensity
/// graph built on the map's box. The decided mask is carried through; the
/// decided voxels take part in the graph as anchors.
ProbMap refine(const ProbMap& l0, const IntensityVolume& target,
               const PropagationConfig& cfg, RefineStats* stats = nullptr);

}  // namespace maseg
