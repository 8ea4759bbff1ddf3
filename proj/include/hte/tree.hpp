#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hte/rng.hpp"
#include "hte/types.hpp"

namespace hte::forest {

/// Which objective drives split selection.
///  Causal:     maximize nL*nR/(nL+nR) * (tauL - tauR)^2, tau = sum(a)/sum(b)
///              with a = W~ * Y~ and b = W~^2 on the split subsample.
///  Regression: maximize sum(a)_L^2/sum(b)_L + sum(a)_R^2/sum(b)_R with a = w*y,
///              b = w (weighted CART variance reduction).
enum class SplitRule { Causal, Regression };

struct Node {
  int feature = -1;  ///< -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  ///< leaf estimate from the estimation subsample
  int n_treated = 0;   ///< estimation units reaching this node (all units for regression)
  int n_control = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<std::size_t> split_subsample;
  std::vector<std::size_t> estimation_subsample;
  int group = 0;

  /// Index of the leaf reached by `row` (x <= threshold goes left).
  template <typename Row>
  int leaf_of(const Row& row) const {
    int k = 0;
    while (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
      const auto& nd = nodes[static_cast<std::size_t>(k)];
      k = row(nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return k;
  }

  template <typename Row>
  double predict(const Row& row) const {
    return nodes[static_cast<std::size_t>(leaf_of(row))].value;
  }

  /// Depth of the deepest leaf; a bare root has depth 0.
  int depth() const;
  std::size_t num_leaves() const;
};

/// Per-unit sufficient statistics a tree is grown on.
struct GrowInputs {
  const Matrix* features = nullptr;
  std::span<const double> numer;  ///< a_i
  std::span<const double> denom;  ///< b_i
  std::span<const int> arm;       ///< treatment indicator; required for Causal only
};

struct TreeConfig {
  SplitRule rule = SplitRule::Causal;
  int mtry = 1;
  int min_leaf_treated = 5;  ///< Causal
  int min_leaf_control = 5;  ///< Causal
  int min_leaf = 5;          ///< Regression
};

/// Greedy recursive partitioning. Splits are chosen on `split_units`; leaf values
/// are computed on `estimation_units`. A split is admissible only when both children
/// meet the leaf minima on both subsamples; growth stops when none is admissible.
/// Ties in the criterion go to the lower feature index, then the lower threshold.
Tree grow_tree(const GrowInputs& in, const TreeConfig& cfg, std::vector<std::size_t> split_units,
               std::vector<std::size_t> estimation_units, Rng& rng);

/// Criterion value of partitioning `units` at `threshold` on `feature`; for tests and
/// brute-force checks. Returns -inf when either side has zero denominator.
double split_criterion(const GrowInputs& in, SplitRule rule, std::span<const std::size_t> units,
                       int feature, double threshold);

}  // namespace hte::forest
