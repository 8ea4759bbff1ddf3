#include "hte/interaction.hpp"

#include <algorithm>
#include <set>

#include "hte/io.hpp"

namespace hte::interaction {

void DesignSpec::validate() const {
  std::set<std::string> mains;
  for (const auto& m : main_effects) {
    if (!mains.insert(m).second) throw Error("duplicate main effect '" + m + "'");
  }
  std::set<std::string> inter;
  for (const auto& t : treatment_interactions) {
    if (!inter.insert(t).second) throw Error("duplicate interaction '" + t + "'");
    if (!mains.count(t)) throw Error("interaction '" + t + "' is not a main effect");
  }
}

std::vector<std::string> DesignSpec::term_names() const {
  std::vector<std::string> names;
  if (include_intercept) names.emplace_back("(Intercept)");
  names.insert(names.end(), main_effects.begin(), main_effects.end());
  names.emplace_back("W");
  for (const auto& t : treatment_interactions) names.push_back("W:" + t);
  return names;
}

DesignSpec DesignSpec::saturated(const std::vector<std::string>& covariates) {
  return DesignSpec{covariates, covariates, true};
}

void to_json(nlohmann::json& j, const DesignSpec& s) {
  j = nlohmann::json{{"main_effects", s.main_effects},
                     {"treatment_interactions", s.treatment_interactions},
                     {"include_intercept", s.include_intercept}};
}

void from_json(const nlohmann::json& j, DesignSpec& s) {
  s.main_effects = j.at("main_effects").get<std::vector<std::string>>();
  s.treatment_interactions = j.value("treatment_interactions", std::vector<std::string>{});
  s.include_intercept = j.value("include_intercept", true);
  s.validate();
}

double LinearModel::coefficient(std::string_view term) const {
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k] == term) return coefficients[static_cast<Eigen::Index>(k)];
  }
  throw Error("model has no term '" + std::string(term) + "'");
}

Matrix build_design(const Dataset& data, const DesignSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  std::vector<std::size_t> main_cols, inter_cols;
  for (const auto& m : spec.main_effects) main_cols.push_back(data.column(m));
  for (const auto& t : spec.treatment_interactions) inter_cols.push_back(data.column(t));

  const auto ncol = static_cast<Eigen::Index>((spec.include_intercept ? 1 : 0) + main_cols.size() + 1 +
                                              inter_cols.size());
  Matrix X(n, ncol);
  Eigen::Index c = 0;
  if (spec.include_intercept) X.col(c++).setOnes();
  for (auto j : main_cols) X.col(c++) = data.covariates.col(static_cast<Eigen::Index>(j));
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = data.treatment[static_cast<std::size_t>(i)];
  X.col(c++) = w;
  for (auto j : inter_cols) X.col(c++) = w.cwiseProduct(data.covariates.col(static_cast<Eigen::Index>(j)));
  return X;
}

LinearModel fit_ols(const Matrix& design, const Vector& y, const std::vector<std::string>& terms) {
  const auto n = design.rows();
  const auto k = design.cols();
  if (n != y.size()) {
    throw Error("design has " + std::to_string(n) + " rows but y has " + std::to_string(y.size()));
  }
  if (n < k) {
    throw Error("design has fewer rows (" + std::to_string(n) + ") than columns (" + std::to_string(k) + ")");
  }
  if (!design.allFinite() || !y.allFinite()) throw Error("non-finite value in regression inputs");

  auto term_name = [&](Eigen::Index c) {
    return static_cast<std::size_t>(c) < terms.size() ? terms[static_cast<std::size_t>(c)]
                                                        : "column " + std::to_string(c);
  };

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  const double max_norm = design.colwise().norm().maxCoeff();
  // Eigen compares |R_ii| against threshold * max|R_ii|; the largest pivot equals the
  // largest column norm, so this is the 1e-10 relative column-norm tolerance.
  qr.setThreshold(1e-10);
  if (max_norm == 0.0 || qr.rank() < k) {
    std::vector<Eigen::Index> dependent;
    const auto rank = max_norm == 0.0 ? 0 : qr.rank();
    for (Eigen::Index p = rank; p < k; ++p) dependent.push_back(qr.colsPermutation().indices()[p]);
    std::sort(dependent.begin(), dependent.end());
    std::string msg = "rank-deficient design (rank " + std::to_string(rank) + " of " +
                      std::to_string(k) + "); dependent column(s):";
    for (auto c : dependent) msg += " " + term_name(c);
    throw Error(msg);
  }

  LinearModel model;
  model.coefficients = qr.solve(y);
  if (!model.coefficients.allFinite()) throw Error("least squares produced non-finite coefficients");
  if (terms.empty()) {
    for (Eigen::Index c = 0; c < k; ++c) model.terms.push_back(term_name(c));
  } else {
    model.terms = terms;
  }
  const Vector resid = y - design * model.coefficients;
  model.residual_variance = n > k ? resid.squaredNorm() / static_cast<double>(n - k) : 0.0;
  return model;
}

LinearModel fit(const Dataset& data, const DesignSpec& spec) {
  const Matrix X = build_design(data, spec);
  const Vector y = Eigen::Map<const Vector>(data.outcome.data(), static_cast<Eigen::Index>(data.size()));
  auto model = fit_ols(X, y, spec.term_names());
  model.design = spec;
  return model;
}

double predict_cate(const LinearModel& model, const CovariateRecord& row) {
  double tau = model.coefficient("W");
  for (const auto& t : model.design.treatment_interactions) {
    tau += model.coefficient("W:" + t) * require(row, t);
  }
  return tau;
}

std::vector<double> predict_cate(const LinearModel& model, const Dataset& data) {
  const double base = model.coefficient("W");
  std::vector<std::pair<double, std::size_t>> slopes;
  for (const auto& t : model.design.treatment_interactions) {
    slopes.emplace_back(model.coefficient("W:" + t), data.column(t));
  }
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double tau = base;
    for (const auto& [b, j] : slopes) {
      tau += b * data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    out[i] = tau;
  }
  return out;
}

std::string coefficients_to_csv(const LinearModel& model) {
  io::CsvTable t;
  t.header = {"term", "value"};
  for (std::size_t k = 0; k < model.terms.size(); ++k) {
    t.rows.push_back({model.terms[k], io::format_double(model.coefficients[static_cast<Eigen::Index>(k)])});
  }
  return io::to_csv(t);
}

}  // namespace hte::interaction
