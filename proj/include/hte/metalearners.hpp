#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hte/forest.hpp"
#include "hte/types.hpp"

namespace hte::meta {

/// A fitted regression function.
class FittedRegression {
 public:
  virtual ~FittedRegression() = default;
  virtual std::vector<double> predict(const Matrix& X) const = 0;
};

/// Pluggable regression learner. `weights` may be empty (unit weights).
class RegressionOracle {
 public:
  virtual ~RegressionOracle() = default;
  virtual std::unique_ptr<FittedRegression> fit(const Matrix& X, std::span<const double> y,
                                                std::span<const double> weights,
                                                std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

/// Weighted least squares with an unpenalized intercept and ridge penalty
/// `lambda` on the slopes. Minimum-norm solution when the design is singular.
class LinearOracle final : public RegressionOracle {
 public:
  explicit LinearOracle(double lambda = 0.0);
  std::unique_ptr<FittedRegression> fit(const Matrix& X, std::span<const double> y,
                                        std::span<const double> weights, std::uint64_t seed) const override;
  std::string name() const override { return "linear"; }
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

/// Honest regression forest; the call's seed overrides params.seed.
class ForestOracle final : public RegressionOracle {
 public:
  explicit ForestOracle(forest::RegressionForestParams params = {});
  std::unique_ptr<FittedRegression> fit(const Matrix& X, std::span<const double> y,
                                        std::span<const double> weights, std::uint64_t seed) const override;
  std::string name() const override { return "forest"; }

 private:
  forest::RegressionForestParams params_;
};

/// K-fold assignment shared by every nuisance fit in a run.
struct CrossFitPlan {
  int k = 5;
  std::vector<int> fold;
  std::uint64_t seed = 0;

  /// Seeded, row-order independent assignment. Throws when a fold lacks an arm.
  static CrossFitPlan make(const Dataset& data, int k, std::uint64_t seed);
  void validate(const Dataset& data) const;
  std::vector<std::size_t> train_indices(int f) const;
  std::vector<std::size_t> held_out_indices(int f) const;
};

/// Out-of-fold nuisance predictions.
struct NuisanceEstimates {
  std::vector<double> m_hat;    ///< E[Y|X]
  std::vector<double> e_hat;    ///< E[W|X], clipped to [0.05, 0.95]
  std::vector<double> mu0_hat;  ///< E[Y|X, W=0]
  std::vector<double> mu1_hat;  ///< E[Y|X, W=1]
  /// trained_on_fold[f][g]: whether the model predicting fold f saw fold g.
  std::vector<std::vector<bool>> trained_on_fold;
};

NuisanceEstimates cross_fit(const Dataset& data, const CrossFitPlan& plan, const RegressionOracle& outcome_oracle,
                            const RegressionOracle& propensity_oracle, std::uint64_t seed);

/// mu(W, X) on pooled data; tau = mu(1,x) - mu(0,x). With `interact_treatment`
/// the feature set is [X, W, W*X].
CateEstimates s_learner(const Dataset& data, const RegressionOracle& oracle, std::uint64_t seed,
                        bool interact_treatment = false);

/// mu1 on treated, mu0 on controls; tau = mu1 - mu0.
CateEstimates t_learner(const Dataset& data, const RegressionOracle& oracle, std::uint64_t seed);

/// Imputed-effect two-stage learner combined as e*tau0 + (1-e)*tau1.
CateEstimates x_learner(const Dataset& data, const RegressionOracle& oracle, std::span<const double> e_hat,
                        std::uint64_t seed);

inline constexpr double kResidualTreatmentFloor = 0.01;

/// Weighted regression of (Y-m)/(W-e) on X with weights (W-e)^2; units with
/// |W-e| < 0.01 are dropped.
CateEstimates r_learner(const Dataset& data, std::span<const double> m_hat, std::span<const double> e_hat,
                        const RegressionOracle& tau_oracle, std::uint64_t seed);

/// Doubly robust pseudo-outcomes, one per unit.
std::vector<double> dr_scores(const Dataset& data, std::span<const double> mu0_hat, std::span<const double> mu1_hat,
                              std::span<const double> e_hat);

/// Regresses the doubly robust scores on X; `ate` holds their mean.
CateEstimates dr_learner(const Dataset& data, std::span<const double> mu0_hat, std::span<const double> mu1_hat,
                         std::span<const double> e_hat, const RegressionOracle& tau_oracle, std::uint64_t seed);

/// Learner configuration as read from JSON.
struct LearnerConfig {
  std::string method = "t";    ///< s, t, x, r, dr
  std::string oracle = "forest";  ///< forest or linear
  int folds = 5;
  double ridge = 0.0;
  forest::RegressionForestParams forest;
};

void to_json(nlohmann::json& j, const LearnerConfig& c);
void from_json(const nlohmann::json& j, LearnerConfig& c);

std::unique_ptr<RegressionOracle> make_oracle(const LearnerConfig& config);

/// Runs each configured learner over one shared cross-fitting plan.
std::vector<CateEstimates> run_learners(const Dataset& data, const std::vector<LearnerConfig>& configs,
                                        std::uint64_t seed);

}  // namespace hte::meta
