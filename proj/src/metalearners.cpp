#include "hte/metalearners.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hte/rng.hpp"

namespace hte::meta {

namespace {

constexpr std::uint64_t kStageStream = 0x5374'6167ULL << 32;

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) { return derive_seed(seed, kStageStream + stage); }

class LinearFit final : public FittedRegression {
 public:
  LinearFit(double intercept, Vector slopes) : intercept_(intercept), slopes_(std::move(slopes)) {}
  std::vector<double> predict(const Matrix& X) const override {
    if (X.cols() != slopes_.size()) throw Error("linear fit expects " + std::to_string(slopes_.size()) + " features");
    const Vector f = (X * slopes_).array() + intercept_;
    return {f.data(), f.data() + f.size()};
  }

 private:
  double intercept_;
  Vector slopes_;
};

class ForestFit final : public FittedRegression {
 public:
  explicit ForestFit(forest::RegressionForest f) : forest_(std::move(f)) {}
  std::vector<double> predict(const Matrix& X) const override { return forest_.predict(X); }

 private:
  forest::RegressionForest forest_;
};

std::vector<double> as_double(const std::vector<int>& w) { return {w.begin(), w.end()}; }

void require_length(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw Error(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string(what) + " contains non-finite values");
  }
}

std::vector<std::size_t> arm_indices(const Dataset& data, int arm) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.treatment[i] == arm) idx.push_back(i);
  }
  return idx;
}

Matrix rows_of(const Matrix& X, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

std::vector<double> values_of(std::span<const double> v, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

template <typename Fn>
auto with_context(const char* learner, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string(learner) + ": " + e.what());
  }
}

void check_finite(const CateEstimates& est) {
  for (double v : est.tau_hat) {
    if (!std::isfinite(v)) throw Error(est.method + " produced a non-finite estimate");
  }
}

}  // namespace

LinearOracle::LinearOracle(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("ridge penalty must be finite and >= 0");
}

std::unique_ptr<FittedRegression> LinearOracle::fit(const Matrix& X, std::span<const double> y,
                                                    std::span<const double> weights, std::uint64_t) const {
  const auto n = X.rows();
  const auto p = X.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw Error("linear oracle: X/y length mismatch");
  if (!weights.empty() && weights.size() != y.size()) throw Error("linear oracle: weight length mismatch");
  if (n == 0) throw Error("linear oracle: no rows to fit");

  const Eigen::Index extra = lambda_ > 0.0 ? p : 0;
  Matrix A = Matrix::Zero(n + extra, p + 1);
  Vector b = Vector::Zero(n + extra);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("linear oracle: weights must be finite and >= 0");
    const double s = std::sqrt(w);
    A(i, 0) = s;
    A.row(i).tail(p) = s * X.row(i);
    b[i] = s * y[static_cast<std::size_t>(i)];
  }
  for (Eigen::Index j = 0; j < extra; ++j) A(n + j, j + 1) = std::sqrt(lambda_);

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
  cod.setThreshold(1e-12);
  const Vector beta = cod.solve(b);
  if (!beta.allFinite()) throw Error("linear oracle produced non-finite coefficients");
  return std::make_unique<LinearFit>(beta[0], beta.tail(p));
}

ForestOracle::ForestOracle(forest::RegressionForestParams params) : params_(params) {}

std::unique_ptr<FittedRegression> ForestOracle::fit(const Matrix& X, std::span<const double> y,
                                                    std::span<const double> weights, std::uint64_t seed) const {
  auto p = params_;
  p.seed = seed;
  return std::make_unique<ForestFit>(forest::RegressionForest::fit(X, y, weights, p));
}

// ---------------------------------------------------------------------------

CrossFitPlan CrossFitPlan::make(const Dataset& data, int k, std::uint64_t seed) {
  if (k < 2) throw Error("cross-fitting needs k >= 2");
  const auto w = as_double(data.treatment);
  const auto keys = forest::unit_keys(data.covariates, {std::span<const double>(w), data.outcome});
  CrossFitPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold = forest::assign_folds(keys, k, seed);
  plan.validate(data);
  return plan;
}

void CrossFitPlan::validate(const Dataset& data) const {
  if (fold.size() != data.size()) throw Error("fold assignment length does not match the dataset");
  std::vector<int> treated(static_cast<std::size_t>(k), 0), total(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] < 0 || fold[i] >= k) throw Error("fold index out of range");
    ++total[static_cast<std::size_t>(fold[i])];
    treated[static_cast<std::size_t>(fold[i])] += data.treatment[i];
  }
  for (int f = 0; f < k; ++f) {
    const auto t = treated[static_cast<std::size_t>(f)], n = total[static_cast<std::size_t>(f)];
    if (n == 0 || t == 0 || t == n) {
      throw Error("fold " + std::to_string(f) + " lacks a treatment arm; use fewer folds");
    }
  }
}

std::vector<std::size_t> CrossFitPlan::train_indices(int f) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != f) idx.push_back(i);
  }
  return idx;
}

std::vector<std::size_t> CrossFitPlan::held_out_indices(int f) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == f) idx.push_back(i);
  }
  return idx;
}

NuisanceEstimates cross_fit(const Dataset& data, const CrossFitPlan& plan, const RegressionOracle& outcome_oracle,
                            const RegressionOracle& propensity_oracle, std::uint64_t seed) {
  data.validate();
  plan.validate(data);
  const std::size_t n = data.size();
  const auto w = as_double(data.treatment);

  NuisanceEstimates out;
  out.m_hat.resize(n);
  out.e_hat.resize(n);
  out.mu0_hat.resize(n);
  out.mu1_hat.resize(n);
  out.trained_on_fold.assign(static_cast<std::size_t>(plan.k), std::vector<bool>(static_cast<std::size_t>(plan.k), false));

  for (int f = 0; f < plan.k; ++f) {
    const auto train = plan.train_indices(f);
    const auto test = plan.held_out_indices(f);
    for (auto i : train) out.trained_on_fold[static_cast<std::size_t>(f)][static_cast<std::size_t>(plan.fold[i])] = true;

    const Matrix Xtr = rows_of(data.covariates, train);
    const Matrix Xte = rows_of(data.covariates, test);
    const auto ytr = values_of(data.outcome, train);
    const auto wtr = values_of(w, train);
    const std::uint64_t base = static_cast<std::uint64_t>(f) * 4;

    const auto m = outcome_oracle.fit(Xtr, ytr, {}, stage_seed(seed, base))->predict(Xte);
    const auto e = propensity_oracle.fit(Xtr, wtr, {}, stage_seed(seed, base + 1))->predict(Xte);

    std::vector<std::size_t> tr0, tr1;
    for (std::size_t r = 0; r < train.size(); ++r) (wtr[r] == 1.0 ? tr1 : tr0).push_back(train[r]);
    const auto mu0 = outcome_oracle.fit(rows_of(data.covariates, tr0), values_of(data.outcome, tr0), {}, stage_seed(seed, base + 2))->predict(Xte);
    const auto mu1 = outcome_oracle.fit(rows_of(data.covariates, tr1), values_of(data.outcome, tr1), {}, stage_seed(seed, base + 3))->predict(Xte);

    for (std::size_t r = 0; r < test.size(); ++r) {
      out.m_hat[test[r]] = m[r];
      out.e_hat[test[r]] = std::clamp(e[r], forest::kPropensityClip, 1.0 - forest::kPropensityClip);
      out.mu0_hat[test[r]] = mu0[r];
      out.mu1_hat[test[r]] = mu1[r];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CateEstimates s_learner(const Dataset& data, const RegressionOracle& oracle, std::uint64_t seed,
                        bool interact_treatment) {
  return with_context("S-learner", [&] {
    data.validate();
    if (data.num_treated() == 0 || data.num_control() == 0) throw Error("both treatment arms must be nonempty");
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto p = data.covariates.cols();
    const Eigen::Index cols = p + 1 + (interact_treatment ? p : 0);

    auto features = [&](auto treatment_of) {
      Matrix F(n, cols);
      F.leftCols(p) = data.covariates;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = treatment_of(i);
        F(i, p) = w;
        if (interact_treatment) F.row(i).tail(p) = w * data.covariates.row(i);
      }
      return F;
    };
    const Matrix F = features([&](Eigen::Index i) { return static_cast<double>(data.treatment[static_cast<std::size_t>(i)]); });
    const auto model = oracle.fit(F, data.outcome, {}, stage_seed(seed, 100));
    const auto mu1 = model->predict(features([](Eigen::Index) { return 1.0; }));
    const auto mu0 = model->predict(features([](Eigen::Index) { return 0.0; }));

    CateEstimates est;
    est.method = "s";
    est.tau_hat.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) est.tau_hat[i] = mu1[i] - mu0[i];
    check_finite(est);
    return est;
  });
}

namespace {

struct ArmModels {
  std::unique_ptr<FittedRegression> mu0, mu1;
  std::vector<std::size_t> control, treated;
};

ArmModels fit_arms(const Dataset& data, const RegressionOracle& oracle, std::uint64_t seed, std::size_t min_arm) {
  ArmModels m;
  m.control = arm_indices(data, 0);
  m.treated = arm_indices(data, 1);
  if (m.control.empty() || m.treated.empty()) throw Error("a treatment arm is empty");
  if (m.control.size() < min_arm || m.treated.size() < min_arm) {
    throw Error("each arm needs at least " + std::to_string(min_arm) + " units (treated " +
                std::to_string(m.treated.size()) + ", control " + std::to_string(m.control.size()) + ")");
  }
  m.mu0 = oracle.fit(rows_of(data.covariates, m.control), values_of(data.outcome, m.control), {}, stage_seed(seed, 200));
  m.mu1 = oracle.fit(rows_of(data.covariates, m.treated), values_of(data.outcome, m.treated), {}, stage_seed(seed, 201));
  return m;
}

}  // namespace

CateEstimates t_learner(const Dataset& data, const RegressionOracle& oracle, std::uint64_t seed) {
  return with_context("T-learner", [&] {
    data.validate();
    const auto arms = fit_arms(data, oracle, seed, 10);
    const auto mu1 = arms.mu1->predict(data.covariates);
    const auto mu0 = arms.mu0->predict(data.covariates);
    CateEstimates est;
    est.method = "t";
    est.tau_hat.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) est.tau_hat[i] = mu1[i] - mu0[i];
    check_finite(est);
    return est;
  });
}

CateEstimates x_learner(const Dataset& data, const RegressionOracle& oracle, std::span<const double> e_hat,
                        std::uint64_t seed) {
  return with_context("X-learner", [&] {
    data.validate();
    require_length(e_hat, data.size(), "e_hat");
    for (double e : e_hat) {
      if (!(e > 0.0 && e < 1.0)) throw Error("e_hat must lie strictly inside (0,1)");
    }
    const auto arms = fit_arms(data, oracle, seed, 1);

    const Matrix X1 = rows_of(data.covariates, arms.treated);
    const Matrix X0 = rows_of(data.covariates, arms.control);
    const auto mu0_on_treated = arms.mu0->predict(X1);
    const auto mu1_on_control = arms.mu1->predict(X0);

    std::vector<double> d1(arms.treated.size()), d0(arms.control.size());
    for (std::size_t k = 0; k < d1.size(); ++k) d1[k] = data.outcome[arms.treated[k]] - mu0_on_treated[k];
    for (std::size_t k = 0; k < d0.size(); ++k) d0[k] = mu1_on_control[k] - data.outcome[arms.control[k]];

    const auto tau1 = oracle.fit(X1, d1, {}, stage_seed(seed, 300))->predict(data.covariates);
    const auto tau0 = oracle.fit(X0, d0, {}, stage_seed(seed, 301))->predict(data.covariates);

    CateEstimates est;
    est.method = "x";
    est.tau_hat.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) est.tau_hat[i] = e_hat[i] * tau0[i] + (1.0 - e_hat[i]) * tau1[i];
    check_finite(est);
    return est;
  });
}

CateEstimates r_learner(const Dataset& data, std::span<const double> m_hat, std::span<const double> e_hat,
                        const RegressionOracle& tau_oracle, std::uint64_t seed) {
  return with_context("R-learner", [&] {
    data.validate();
    require_length(m_hat, data.size(), "m_hat");
    require_length(e_hat, data.size(), "e_hat");

    std::vector<std::size_t> kept;
    std::vector<double> pseudo, weight;
    double denom = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double wt = data.treatment[i] - e_hat[i];
      denom += wt * wt;
      if (std::abs(wt) < kResidualTreatmentFloor) continue;
      kept.push_back(i);
      pseudo.push_back((data.outcome[i] - m_hat[i]) / wt);
      weight.push_back(wt * wt);
    }
    if (!(denom > 0.0)) throw Error("treatment residuals are all zero");
    if (kept.empty()) throw Error("every unit has |W - e_hat| < 0.01; nothing left to fit");

    const auto fit = tau_oracle.fit(rows_of(data.covariates, kept), pseudo, weight, stage_seed(seed, 400));
    CateEstimates est;
    est.method = "r";
    est.tau_hat = fit->predict(data.covariates);
    check_finite(est);
    return est;
  });
}

std::vector<double> dr_scores(const Dataset& data, std::span<const double> mu0_hat, std::span<const double> mu1_hat,
                              std::span<const double> e_hat) {
  require_length(mu0_hat, data.size(), "mu0_hat");
  require_length(mu1_hat, data.size(), "mu1_hat");
  require_length(e_hat, data.size(), "e_hat");
  std::vector<double> gamma(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = e_hat[i];
    if (!(e > 0.0 && e < 1.0)) {
      throw Error("e_hat[" + std::to_string(i) + "] = " + std::to_string(e) + " lies outside (0,1); clip it first");
    }
    const double w = data.treatment[i];
    const double y = data.outcome[i];
    gamma[i] = mu1_hat[i] - mu0_hat[i] + w * (y - mu1_hat[i]) / e - (1.0 - w) * (y - mu0_hat[i]) / (1.0 - e);
  }
  return gamma;
}

CateEstimates dr_learner(const Dataset& data, std::span<const double> mu0_hat, std::span<const double> mu1_hat,
                         std::span<const double> e_hat, const RegressionOracle& tau_oracle, std::uint64_t seed) {
  return with_context("DR-learner", [&] {
    data.validate();
    const auto gamma = dr_scores(data, mu0_hat, mu1_hat, e_hat);
    CateEstimates est;
    est.method = "dr";
    est.tau_hat = tau_oracle.fit(data.covariates, gamma, {}, stage_seed(seed, 500))->predict(data.covariates);
    est.ate = std::accumulate(gamma.begin(), gamma.end(), 0.0) / static_cast<double>(gamma.size());
    check_finite(est);
    return est;
  });
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const LearnerConfig& c) {
  j = nlohmann::json{{"method", c.method}, {"oracle", c.oracle}, {"folds", c.folds}, {"ridge", c.ridge}, {"forest", c.forest}};
}

void from_json(const nlohmann::json& j, LearnerConfig& c) {
  LearnerConfig d;
  c.method = j.value("method", d.method);
  c.oracle = j.value("oracle", d.oracle);
  c.folds = j.value("folds", d.folds);
  c.ridge = j.value("ridge", d.ridge);
  c.forest = j.contains("forest") ? j.at("forest").get<forest::RegressionForestParams>() : d.forest;
  static const std::vector<std::string> methods = {"s", "t", "x", "r", "dr"};
  if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
    throw InputError("unknown meta-learner '" + c.method + "'");
  }
  if (c.oracle != "forest" && c.oracle != "linear") throw InputError("unknown oracle '" + c.oracle + "'");
}

std::unique_ptr<RegressionOracle> make_oracle(const LearnerConfig& config) {
  if (config.oracle == "linear") return std::make_unique<LinearOracle>(config.ridge);
  if (config.oracle == "forest") return std::make_unique<ForestOracle>(config.forest);
  throw InputError("unknown oracle '" + config.oracle + "'");
}

std::vector<CateEstimates> run_learners(const Dataset& data, const std::vector<LearnerConfig>& configs,
                                        std::uint64_t seed) {
  std::vector<CateEstimates> out;
  if (configs.empty()) return out;
  const int folds = configs.front().folds;
  const CrossFitPlan plan = CrossFitPlan::make(data, folds, derive_seed(seed, 1));

  // Nuisances are shared by every learner using the same oracle.
  std::map<std::string, NuisanceEstimates> nuisances;
  auto nuisance_for = [&](const LearnerConfig& c, const RegressionOracle& oracle) -> const NuisanceEstimates& {
    const std::string key = c.oracle + "/" + std::to_string(c.ridge);
    auto it = nuisances.find(key);
    if (it == nuisances.end()) {
      it = nuisances.emplace(key, cross_fit(data, plan, oracle, oracle, derive_seed(seed, 2))).first;
    }
    return it->second;
  };

  for (const auto& c : configs) {
    if (c.folds != folds) throw InputError("all learners in a run must share the same fold count");
    const auto oracle = make_oracle(c);
    const std::uint64_t s = derive_seed(seed, 3);
    if (c.method == "s") {
      out.push_back(s_learner(data, *oracle, s));
    } else if (c.method == "t") {
      out.push_back(t_learner(data, *oracle, s));
    } else if (c.method == "x") {
      out.push_back(x_learner(data, *oracle, nuisance_for(c, *oracle).e_hat, s));
    } else if (c.method == "r") {
      const auto& nz = nuisance_for(c, *oracle);
      out.push_back(r_learner(data, nz.m_hat, nz.e_hat, *oracle, s));
    } else if (c.method == "dr") {
      const auto& nz = nuisance_for(c, *oracle);
      out.push_back(dr_learner(data, nz.mu0_hat, nz.mu1_hat, nz.e_hat, *oracle, s));
    } else {
      throw InputError("unknown meta-learner '" + c.method + "'");
    }
  }
  return out;
}

}  // namespace hte::meta
