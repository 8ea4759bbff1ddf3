#include "hte/types.hpp"

#include <cmath>

namespace hte {

double require(const CovariateRecord& row, std::string_view name) {
  auto it = row.find(name);
  if (it == row.end()) {
    throw Error("covariate record is missing '" + std::string(name) + "'");
  }
  return it->second;
}

std::size_t Dataset::column(std::string_view name) const {
  for (std::size_t j = 0; j < covariate_names.size(); ++j) {
    if (covariate_names[j] == name) return j;
  }
  throw Error("unknown covariate '" + std::string(name) + "'");
}

CovariateRecord Dataset::row(std::size_t i) const {
  CovariateRecord r;
  for (std::size_t j = 0; j < covariate_names.size(); ++j) {
    r.emplace(covariate_names[j], covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }
  return r;
}

std::size_t Dataset::num_treated() const {
  std::size_t k = 0;
  for (int w : treatment) k += (w == 1);
  return k;
}

void Dataset::validate() const {
  const auto n = outcome.size();
  if (treatment.size() != n || static_cast<std::size_t>(covariates.rows()) != n) {
    throw Error("dataset containers disagree on length: covariates " +
                std::to_string(covariates.rows()) + ", treatment " +
                std::to_string(treatment.size()) + ", outcome " + std::to_string(n));
  }
  if (static_cast<std::size_t>(covariates.cols()) != covariate_names.size()) {
    throw Error("covariate matrix has " + std::to_string(covariates.cols()) +
                " columns but " + std::to_string(covariate_names.size()) + " names");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment[i] != 0 && treatment[i] != 1) {
      throw Error("treatment at row " + std::to_string(i) + " is not 0/1");
    }
    if (!std::isfinite(outcome[i])) {
      throw Error("non-finite outcome at row " + std::to_string(i));
    }
  }
  if (!covariates.allFinite()) throw Error("non-finite covariate value");
}

Dataset Dataset::select(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.covariate_names = covariate_names;
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), covariates.cols());
  out.treatment.reserve(rows.size());
  out.outcome.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.covariates.row(static_cast<Eigen::Index>(k)) = covariates.row(static_cast<Eigen::Index>(rows[k]));
    out.treatment.push_back(treatment[rows[k]]);
    out.outcome.push_back(outcome[rows[k]]);
  }
  return out;
}

}  // namespace hte
