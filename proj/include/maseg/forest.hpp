#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

namespace maseg {

struct ForestConfig {
  int n_tree = 200;
  int n_split = 20;   // predictors sampled (without replacement) per node
  int min_leaf = 5;
  int max_depth = 0;  // 0 = unlimited
  std::uint64_t seed = 0;
  bool bootstrap = true;  // test hook; bagging is on in production
};

/// Internal node when feature >= 0 (value is the split threshold, samples
/// with x[feature] < value go left); leaf when feature < 0 (value is the
/// mean training label of the leaf).
struct TreeNode {
  std::int32_t feature = -1;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::int32_t n_features = 0;

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

/// Reusable buffers for repeated training (one per worker thread).
/// `mono` / `order` hold the per-feature sort keys and presorted row order
/// computed once per training call; the rest is per-tree state.
struct ForestScratch {
  std::vector<std::uint32_t> mono;     // rows x features, column-major
  std::vector<std::int32_t> order;     // rows x features, column-major
  std::vector<std::int32_t> count;     // bootstrap multiplicity per row
  std::vector<double> wy, wyy;         // count*y, (count*y)*y per row
  std::vector<std::int32_t> stamp;     // node id currently owning each row
  std::vector<std::int32_t> rows;      // distinct-row worklist
  std::vector<std::int32_t> sorted;    // per-feature node rows, value order
  std::vector<std::uint64_t> keys;     // small-node sort buffer
  std::vector<std::int32_t> feature_pool;
};

// Samples are rows of X with labels y. Trees are grown greedily: each node
// draws n_split feature indices, scans every midpoint between consecutive
// distinct sorted values of each drawn feature, and keeps the (feature,
// threshold) pair minimizing the summed child label variance. A node stops
// splitting when it has fewer than 2*min_leaf samples, sits at max_depth,
// has constant labels, or no split reduces the variance.

RegressionTree train_tree(const Eigen::MatrixXf& X, const Eigen::ArrayXd& y,
                          const ForestConfig& cfg, std::mt19937_64& rng);

/// n_tree trees on bootstrap resamples (uniform with replacement, same size
/// as the input). Tree i draws from an independent substream of cfg.seed, so
/// growing n_tree never changes earlier trees.
ForestModel train_forest(const Eigen::MatrixXf& X, const Eigen::ArrayXd& y,
                         const ForestConfig& cfg, ForestScratch* scratch = nullptr);

double predict_tree(const RegressionTree& tree, const float* features,
                    std::int64_t n_features);

/// Mean of the per-tree outputs; stays within the training label range.
double predict(const ForestModel& model, const Eigen::Ref<const Eigen::ArrayXf>& features);

}  // namespace maseg
