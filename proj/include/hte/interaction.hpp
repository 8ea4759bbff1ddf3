#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hte/types.hpp"

namespace hte::interaction {

/// Terms of a treatment-interaction regression.
struct DesignSpec {
  std::vector<std::string> main_effects;
  std::vector<std::string> treatment_interactions;
  bool include_intercept = true;

  /// Interactions must be a subset of main effects; no duplicates.
  void validate() const;
  /// Column names in design order: [(Intercept)], mains..., W, W:x...
  std::vector<std::string> term_names() const;

  /// All covariates as mains, each also interacted with W.
  static DesignSpec saturated(const std::vector<std::string>& covariates);
};

void to_json(nlohmann::json& j, const DesignSpec& s);
void from_json(const nlohmann::json& j, DesignSpec& s);

struct LinearModel {
  DesignSpec design;
  std::vector<std::string> terms;
  Vector coefficients;
  double residual_variance = 0.0;

  double coefficient(std::string_view term) const;
};

/// Design matrix with column order [intercept?, mains..., W, W*interactions...].
Matrix build_design(const Dataset& data, const DesignSpec& spec);

/// Least squares via column-pivoted Householder QR. Throws Error naming the
/// dependent columns when the design is rank deficient (tolerance 1e-10 of the
/// largest column norm).
LinearModel fit_ols(const Matrix& design, const Vector& y, const std::vector<std::string>& terms = {});

/// Convenience: build the design and fit it.
LinearModel fit(const Dataset& data, const DesignSpec& spec);

/// fitted(W=1, row) - fitted(W=0, row).
double predict_cate(const LinearModel& model, const CovariateRecord& row);

/// predict_cate for every row of `data`.
std::vector<double> predict_cate(const LinearModel& model, const Dataset& data);

/// Two-column (term, value) CSV.
std::string coefficients_to_csv(const LinearModel& model);

}  // namespace hte::interaction
