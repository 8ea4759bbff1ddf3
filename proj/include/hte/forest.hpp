#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hte/tree.hpp"
#include "hte/types.hpp"

namespace hte::forest {

/// Content hash of each row (covariate bits plus `extra` per-unit values). Sampling
/// ranks units by these keys so that row order never affects which units a tree sees.
std::vector<std::uint64_t> unit_keys(const Matrix& X, std::initializer_list<std::span<const double>> extra);

/// Units ordered by a seeded hash of their keys (position breaks exact ties).
std::vector<std::size_t> seeded_order(std::span<const std::uint64_t> keys, std::uint64_t seed,
                                      std::span<const std::size_t> pool);

/// How each tree draws its units.
struct SamplingPlan {
  std::size_t num_trees = 0;
  double subsample_fraction = 0.5;
  double honesty_fraction = 0.5;
  /// Trees are grown in this many groups on half-samples; groups 2k and 2k+1 use
  /// complementary halves. 1 disables half-sampling (no standard errors).
  std::size_t ci_groups = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Grows trees per `plan` in parallel; results equal sequential growth.
std::vector<Tree> grow_trees(const GrowInputs& in, const TreeConfig& cfg, const SamplingPlan& plan,
                             std::span<const std::uint64_t> keys);

// ---------------------------------------------------------------------------
// Regression forest (nuisance models and meta-learner oracle).

struct RegressionForestParams {
  std::size_t num_trees = 500;
  double subsample_fraction = 0.5;
  double honesty_fraction = 0.5;
  int min_leaf = 5;
  int mtry = 0;  ///< 0 means all features
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate(std::size_t num_features) const;
};

void to_json(nlohmann::json& j, const RegressionForestParams& p);
void from_json(const nlohmann::json& j, RegressionForestParams& p);

class RegressionForest {
 public:
  /// Honest weighted CART forest; `weights` may be empty (all ones).
  static RegressionForest fit(const Matrix& X, std::span<const double> y, std::span<const double> weights,
                              const RegressionForestParams& params);

  std::vector<double> predict(const Matrix& X) const;
  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<Tree> trees_;
  std::size_t num_features_ = 0;
};

// ---------------------------------------------------------------------------
// Causal forest.

struct ForestParams {
  std::size_t num_trees = 2000;
  double subsample_fraction = 0.5;
  double honesty_fraction = 0.5;
  int min_leaf_treated = 5;
  int min_leaf_control = 5;
  int mtry = 0;  ///< 0 means ceil(sqrt(p))
  int num_folds_nuisance = 5;
  std::size_t ci_groups = 50;
  std::size_t nuisance_trees = 0;  ///< 0 means max(50, num_trees / 4)
  int nuisance_min_leaf = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate(std::size_t num_features) const;
  int effective_mtry(std::size_t num_features) const;
  std::size_t effective_nuisance_trees() const;
};

void to_json(nlohmann::json& j, const ForestParams& p);
void from_json(const nlohmann::json& j, ForestParams& p);

/// Cross-fitted E[Y|X] and clipped E[W|X].
struct Nuisance {
  std::vector<double> m_hat;
  std::vector<double> e_hat;
  std::vector<int> fold;  ///< held-out fold of each unit
};

inline constexpr double kPropensityClip = 0.05;

/// K-fold assignment by seeded key order (rank mod K).
std::vector<int> assign_folds(std::span<const std::uint64_t> keys, int k, std::uint64_t seed);

/// Cross-fitted regression forests for m and e. Throws when a fold lacks a
/// treatment arm.
Nuisance fit_nuisance(const Dataset& data, const ForestParams& params);

struct CausalForest {
  std::vector<Tree> trees;
  std::vector<double> m_hat;
  std::vector<double> e_hat;
  ForestParams params;
  std::vector<std::string> feature_names;

  bool fitted() const { return !trees.empty(); }
};

/// Fits nuisances then grows the forest on residualized data.
CausalForest grow(const Dataset& data, const ForestParams& params);
/// Grows on caller-supplied nuisance estimates.
CausalForest grow(const Dataset& data, const ForestParams& params, Nuisance nuisance);

/// Mean of leaf effects across trees, with grouped half-sample standard errors
/// when the forest was grown with ci_groups >= 2.
CateEstimates predict(const CausalForest& model, const Matrix& rows);

inline constexpr double kImportanceDecay = 0.79;

/// Depth-weighted split frequency (weight decay^depth, root depth 0), normalized
/// to sum 1. Uniform when the forest has no splits.
std::vector<std::pair<std::string, double>> variable_importance(const CausalForest& model,
                                                                double decay = kImportanceDecay);

/// Versioned JSON persistence (trees, nuisance vectors, params).
nlohmann::json to_json(const CausalForest& model);
CausalForest causal_forest_from_json(const nlohmann::json& j);
void save(const CausalForest& model, const std::filesystem::path& path);
CausalForest load(const std::filesystem::path& path);

/// Posterior-mean debiasing of a between-group variance estimate against its
/// Monte Carlo noise; nonnegative.
double debiased_variance(double between, double noise, std::size_t groups);

}  // namespace hte::forest
