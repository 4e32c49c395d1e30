#include "maseg/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "maseg/errors.hpp"
#include "maseg/rng.hpp"

namespace maseg {

namespace {

// Order-preserving float -> u32 map. -0.0 is canonicalized to +0.0 first so
// equal values get equal keys and never produce a degenerate threshold.
inline std::uint32_t mono_bits(float v) {
  const std::uint32_t s = std::bit_cast<std::uint32_t>(v + 0.0f);
  const std::uint32_t mask =
      static_cast<std::uint32_t>(static_cast<std::int32_t>(s) >> 31) |
      0x80000000u;
  return s ^ mask;
}

/// Per-feature sort keys and row orders over the full sample matrix;
/// computed once per training call and shared by every tree.
void prepare_presort(const Eigen::MatrixXf& X, ForestScratch& ws) {
  const std::int32_t R = static_cast<std::int32_t>(X.rows());
  const std::int32_t F = static_cast<std::int32_t>(X.cols());
  ws.mono.resize(static_cast<std::size_t>(R) * F);
  ws.order.resize(static_cast<std::size_t>(R) * F);
  ws.keys.resize(R);
  for (std::int32_t f = 0; f < F; ++f) {
    const float* col = X.data() + static_cast<std::int64_t>(f) * R;
    std::uint32_t* mcol = ws.mono.data() + static_cast<std::int64_t>(f) * R;
    std::int32_t* ocol = ws.order.data() + static_cast<std::int64_t>(f) * R;
    for (std::int32_t r = 0; r < R; ++r) {
      mcol[r] = mono_bits(col[r]);
      ws.keys[r] = (static_cast<std::uint64_t>(mcol[r]) << 32) |
                   static_cast<std::uint32_t>(r);
    }
    std::sort(ws.keys.begin(), ws.keys.end());
    for (std::int32_t r = 0; r < R; ++r)
      ocol[r] = static_cast<std::int32_t>(ws.keys[r] & 0xffffffffu);
  }
}

struct NodeTask {
  std::int32_t begin;
  std::int32_t end;
  std::int32_t depth;
  std::int32_t parent;  // -1 for root
  bool is_left;
};

// Nodes smaller than this sort their rows directly; larger ones filter the
// presorted full-column order through the node stamps.
constexpr std::int32_t kSortedWalkCutoff = 16;

/// Grows one tree over ws.rows[0, n_rows). ws.count / wy / wyy must hold the
/// bootstrap weights; ws.mono / ws.order the presorted columns.
RegressionTree train_tree_impl(const Eigen::MatrixXf& X, const ForestConfig& cfg,
                               std::mt19937_64& rng, ForestScratch& ws,
                               std::int32_t n_rows) {
  const std::int32_t R = static_cast<std::int32_t>(X.rows());
  const std::int32_t F = static_cast<std::int32_t>(X.cols());
  const std::int32_t n_split = std::min<std::int32_t>(cfg.n_split, F);

  ws.feature_pool.resize(F);
  for (std::int32_t f = 0; f < F; ++f) ws.feature_pool[f] = f;
  ws.stamp.assign(R, -1);
  ws.sorted.resize(R);

  RegressionTree tree;
  tree.nodes.reserve(64);

  std::vector<NodeTask> stack;
  stack.push_back({0, n_rows, 0, -1, false});

  while (!stack.empty()) {
    const NodeTask task = stack.back();
    stack.pop_back();
    const std::int32_t node_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (task.parent >= 0) {
      (task.is_left ? tree.nodes[task.parent].left
                    : tree.nodes[task.parent].right) = node_id;
    }

    double sum = 0.0, sumsq = 0.0;
    std::int64_t m = 0;
    for (std::int32_t i = task.begin; i < task.end; ++i) {
      const std::int32_t r = ws.rows[i];
      sum += ws.wy[r];
      sumsq += ws.wyy[r];
      m += ws.count[r];
    }
    const double parent_sse = sumsq - sum * sum / static_cast<double>(m);

    const bool depth_stop = cfg.max_depth > 0 && task.depth >= cfg.max_depth;
    if (m < 2 * cfg.min_leaf || depth_stop || parent_sse <= 1e-12) {
      tree.nodes[node_id].value = sum / static_cast<double>(m);
      continue;
    }

    for (std::int32_t i = task.begin; i < task.end; ++i)
      ws.stamp[ws.rows[i]] = node_id;

    // Draw n_split features without replacement (partial Fisher-Yates on a
    // pool that persists across nodes; any start permutation yields uniform
    // draws).
    for (std::int32_t d = 0; d < n_split; ++d) {
      const auto j =
          d + static_cast<std::int32_t>(uniform_index(rng, F - d));
      std::swap(ws.feature_pool[d], ws.feature_pool[j]);
    }

    const double min_improvement = 1e-12 * std::max(1.0, parent_sse);
    double best_improvement = min_improvement;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    const std::int32_t node_rows = task.end - task.begin;

    for (std::int32_t d = 0; d < n_split; ++d) {
      const std::int32_t f = ws.feature_pool[d];
      const std::uint32_t* mcol =
          ws.mono.data() + static_cast<std::int64_t>(f) * R;

      // Node rows in ascending (value, row) order: small nodes sort their
      // rows, large ones filter the presorted column.
      std::int32_t ln = 0;
      if (node_rows <= kSortedWalkCutoff) {
        for (std::int32_t i = task.begin; i < task.end; ++i) {
          const std::int32_t r = ws.rows[i];
          ws.keys[ln++] = (static_cast<std::uint64_t>(mcol[r]) << 32) |
                          static_cast<std::uint32_t>(r);
        }
        std::sort(ws.keys.begin(), ws.keys.begin() + ln);
        for (std::int32_t t = 0; t < ln; ++t)
          ws.sorted[t] = static_cast<std::int32_t>(ws.keys[t] & 0xffffffffu);
      } else {
        const std::int32_t* ocol =
            ws.order.data() + static_cast<std::int64_t>(f) * R;
        for (std::int32_t r = 0; r < R; ++r) {
          const std::int32_t row = ocol[r];
          ws.sorted[ln] = row;  // branchless filter
          ln += ws.stamp[row] == node_id;
        }
      }
      if (mcol[ws.sorted[0]] == mcol[ws.sorted[ln - 1]]) continue;  // constant

      double lsum = 0.0, lsq = 0.0;
      std::int64_t lcount = 0;
      for (std::int32_t t = 0; t + 1 < ln; ++t) {
        const std::int32_t r = ws.sorted[t];
        lsum += ws.wy[r];
        lsq += ws.wyy[r];
        lcount += ws.count[r];
        const std::uint32_t va = mcol[r];
        const std::uint32_t vb = mcol[ws.sorted[t + 1]];
        if (va == vb) continue;
        const std::int64_t rcount = m - lcount;
        const double rsum = sum - lsum;
        const double rsq = sumsq - lsq;
        const double sse_l = lsq - lsum * lsum / static_cast<double>(lcount);
        const double sse_r = rsq - rsum * rsum / static_cast<double>(rcount);
        const double improvement = parent_sse - sse_l - sse_r;
        if (improvement > best_improvement) {
          const float* col = X.data() + static_cast<std::int64_t>(f) * R;
          best_improvement = improvement;
          best_feature = f;
          best_threshold = 0.5 * (static_cast<double>(col[r]) +
                                  static_cast<double>(col[ws.sorted[t + 1]]));
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes[node_id].value = sum / static_cast<double>(m);
      continue;
    }

    const float* col =
        X.data() + static_cast<std::int64_t>(best_feature) * R;
    auto* mid = std::partition(
        ws.rows.data() + task.begin, ws.rows.data() + task.end,
        [col, thr = best_threshold](std::int32_t r) {
          return static_cast<double>(col[r]) < thr;
        });
    const std::int32_t split = static_cast<std::int32_t>(mid - ws.rows.data());

    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].value = best_threshold;
    stack.push_back({split, task.end, task.depth + 1, node_id, false});
    stack.push_back({task.begin, split, task.depth + 1, node_id, true});
  }
  return tree;
}

/// Fills count / wy / wyy and the distinct-row worklist; returns its length.
std::int32_t apply_weights(const Eigen::ArrayXd& y, ForestScratch& ws) {
  const std::int32_t R = static_cast<std::int32_t>(y.size());
  ws.wy.resize(R);
  ws.wyy.resize(R);
  ws.rows.resize(R);
  std::int32_t n_rows = 0;
  for (std::int32_t r = 0; r < R; ++r) {
    const double c = ws.count[r];
    ws.wy[r] = c * y[r];
    ws.wyy[r] = ws.wy[r] * y[r];
    if (ws.count[r] > 0) ws.rows[n_rows++] = r;
  }
  return n_rows;
}

void validate_training_input(const Eigen::MatrixXf& X, const Eigen::ArrayXd& y,
                             const ForestConfig& cfg) {
  if (X.rows() == 0) throw ValidationError("forest: no training samples");
  if (X.cols() == 0) throw ValidationError("forest: zero-length features");
  if (X.rows() != y.size())
    throw ValidationError("forest: sample/label count mismatch");
  if (cfg.n_tree < 1) throw ValidationError("forest: n_tree must be >= 1");
  if (cfg.n_split < 1) throw ValidationError("forest: n_split must be >= 1");
  if (cfg.min_leaf < 1) throw ValidationError("forest: min_leaf must be >= 1");
}

}  // namespace

RegressionTree train_tree(const Eigen::MatrixXf& X, const Eigen::ArrayXd& y,
                          const ForestConfig& cfg, std::mt19937_64& rng) {
  validate_training_input(X, y, cfg);
  ForestScratch ws;
  prepare_presort(X, ws);
  ws.count.assign(X.rows(), 1);
  const std::int32_t n_rows = apply_weights(y, ws);
  return train_tree_impl(X, cfg, rng, ws, n_rows);
}

ForestModel train_forest(const Eigen::MatrixXf& X, const Eigen::ArrayXd& y,
                         const ForestConfig& cfg, ForestScratch* scratch) {
  validate_training_input(X, y, cfg);
  ForestScratch local;
  ForestScratch& ws = scratch ? *scratch : local;
  prepare_presort(X, ws);
  const std::int32_t n = static_cast<std::int32_t>(X.rows());

  ForestModel model;
  model.n_features = static_cast<std::int32_t>(X.cols());
  model.trees.reserve(cfg.n_tree);
  for (int i = 0; i < cfg.n_tree; ++i) {
    auto rng = make_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    ws.count.assign(n, 0);
    if (cfg.bootstrap) {
      for (std::int32_t t = 0; t < n; ++t)
        ++ws.count[uniform_index(rng, n)];
    } else {
      ws.count.assign(n, 1);
    }
    const std::int32_t n_rows = apply_weights(y, ws);
    model.trees.push_back(train_tree_impl(X, cfg, rng, ws, n_rows));
  }
  return model;
}

double predict_tree(const RegressionTree& tree, const float* features,
                    std::int64_t) {
  const TreeNode* node = tree.nodes.data();
  while (node->feature >= 0) {
    node = tree.nodes.data() +
           (static_cast<double>(features[node->feature]) < node->value
                ? node->left
                : node->right);
  }
  return node->value;
}

double predict(const ForestModel& model,
               const Eigen::Ref<const Eigen::ArrayXf>& features) {
  if (features.size() != model.n_features)
    throw ValidationError("predict: feature length does not match training");
  double sum = 0.0;
  for (const RegressionTree& t : model.trees)
    sum += predict_tree(t, features.data(), model.n_features);
  return sum / static_cast<double>(model.trees.size());
}

}  // namespace maseg
