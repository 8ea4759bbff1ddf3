#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hte {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised for violated preconditions and invalid inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user-supplied input (files, columns, configuration).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Named covariate values for a single unit.
using CovariateRecord = std::map<std::string, double, std::less<>>;

/// Looks up `name`, throwing a descriptive Error when absent.
double require(const CovariateRecord& row, std::string_view name);

/// Observed data: covariates X (n x p, named columns), binary treatment W, outcome Y.
struct Dataset {
  std::vector<std::string> covariate_names;
  Matrix covariates;
  std::vector<int> treatment;
  std::vector<double> outcome;

  std::size_t size() const { return outcome.size(); }
  std::size_t num_covariates() const { return covariate_names.size(); }

  /// Column index of a covariate; throws Error on unknown name.
  std::size_t column(std::string_view name) const;
  CovariateRecord row(std::size_t i) const;

  std::size_t num_treated() const;
  std::size_t num_control() const { return size() - num_treated(); }

  /// Checks shared lengths, binary treatment, and finiteness.
  void validate() const;

  /// Subset of rows, in the given order.
  Dataset select(const std::vector<std::size_t>& rows) const;
};

/// Simulation-only ground truth aligned with a Dataset.
struct GroundTruth {
  std::vector<double> tau_true;
  std::vector<double> ite_true;
  std::vector<double> y0;
  std::vector<double> y1;
  std::vector<double> u;
  std::vector<double> propensity;

  std::size_t size() const { return tau_true.size(); }
};

/// Per-unit CATE point estimates, with standard errors when the method provides them.
struct CateEstimates {
  std::string method;
  std::vector<double> tau_hat;
  std::optional<std::vector<double>> se;
  std::optional<double> ate;

  std::size_t size() const { return tau_hat.size(); }
};

}  // namespace hte
