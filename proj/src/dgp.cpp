#include "hte/dgp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "hte/rng.hpp"

namespace hte::dgp {

namespace {

enum Stream : std::uint64_t {
  kIncome = 0,
  kTestScore,
  kNeighborhood,
  kMinority,
  kFemale,
  kTreatment,
  kNoise,
};

std::vector<double> normal_column(std::uint64_t seed, Stream stream, std::size_t n, double sd) {
  Rng rng(derive_seed(seed, stream));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = quantize(sd * dist(rng));
  return out;
}

std::vector<double> bernoulli_column(std::uint64_t seed, Stream stream, std::size_t n, double p) {
  Rng rng(derive_seed(seed, stream));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = unif(rng) < p ? 1.0 : 0.0;
  return out;
}

double cate_formula(ScenarioKind kind, double income, double test_score, double minority,
                    double female) {
  switch (kind) {
    case ScenarioKind::Linear:
      return 2.0 + 1.5 * minority;
    case ScenarioKind::ComplexNonlinear:
      return 2.0 + 5.0 * minority * female * (income > 0.0 ? 1.0 : 0.0) +
             2.0 * std::max(test_score, 0.0) * minority;
    case ScenarioKind::Constant:
      return 2.0;
  }
  throw Error("unknown scenario kind");
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Linear:
      return "linear";
    case ScenarioKind::ComplexNonlinear:
      return "complex_nonlinear";
    case ScenarioKind::Constant:
      return "constant";
  }
  return "unknown";
}

ScenarioKind parse_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "linear") return ScenarioKind::Linear;
  if (s == "complex_nonlinear" || s == "complex" || s == "complexnonlinear") {
    return ScenarioKind::ComplexNonlinear;
  }
  if (s == "constant") return ScenarioKind::Constant;
  throw InputError("unknown scenario '" + std::string(name) +
                   "' (expected linear, complex_nonlinear, or constant)");
}

void ScenarioSpec::validate() const {
  if (n < 2) throw Error("scenario needs n >= 2, got " + std::to_string(n));
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw Error("noise_sd must be finite and >= 0");
}

void to_json(nlohmann::json& j, const ScenarioSpec& spec) {
  j = nlohmann::json{{"kind", to_string(spec.kind)}, {"n", spec.n}, {"seed", spec.seed}, {"noise_sd", spec.noise_sd}};
}

void from_json(const nlohmann::json& j, ScenarioSpec& spec) {
  ScenarioSpec d;
  spec.kind = j.contains("kind") ? parse_kind(j.at("kind").get<std::string>()) : d.kind;
  spec.n = j.value("n", d.n);
  spec.seed = j.value("seed", d.seed);
  spec.noise_sd = j.value("noise_sd", d.noise_sd);
}

double true_cate(ScenarioKind kind, const CovariateRecord& row) {
  const double minority = require(row, "minority");
  const double female = require(row, "female");
  const double income = require(row, "income");
  const double test_score = require(row, "test_score");
  require(row, "neighborhood");
  return cate_formula(kind, income, test_score, minority, female);
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty vector");
  const auto n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

std::pair<Dataset, GroundTruth> generate(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;

  const auto income = normal_column(spec.seed, kIncome, n, 1.0);
  const auto test_score = normal_column(spec.seed, kTestScore, n, 1.0);
  const auto neighborhood = normal_column(spec.seed, kNeighborhood, n, 1.0);
  const auto minority = bernoulli_column(spec.seed, kMinority, n, 0.4);
  const auto female = bernoulli_column(spec.seed, kFemale, n, 0.5);
  const auto noise = normal_column(spec.seed, kNoise, n, spec.noise_sd);

  const double income_median = median(income);

  Dataset data;
  data.covariate_names.assign(kCovariateNames.begin(), kCovariateNames.end());
  data.covariates.resize(static_cast<Eigen::Index>(n), 5);
  data.treatment.resize(n);
  data.outcome.resize(n);

  GroundTruth truth;
  truth.tau_true.resize(n);
  truth.ite_true.resize(n);
  truth.y0.resize(n);
  truth.y1.resize(n);
  truth.u = noise;
  truth.propensity.resize(n);

  Rng treat_rng(derive_seed(spec.seed, kTreatment));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    data.covariates(r, 0) = income[i];
    data.covariates(r, 1) = test_score[i];
    data.covariates(r, 2) = neighborhood[i];
    data.covariates(r, 3) = minority[i];
    data.covariates(r, 4) = female[i];

    const double e = propensity(income[i], income_median);
    truth.propensity[i] = e;
    const int w = unif(treat_rng) < e ? 1 : 0;
    data.treatment[i] = w;

    const double tau = cate_formula(spec.kind, income[i], test_score[i], minority[i], female[i]);
    truth.tau_true[i] = tau;
    truth.y0[i] = income[i] + neighborhood[i] + noise[i];
    truth.y1[i] = truth.y0[i] + tau;
    truth.ite_true[i] = truth.y1[i] - truth.y0[i];
    data.outcome[i] = w == 1 ? truth.y1[i] : truth.y0[i];
  }
  return {std::move(data), std::move(truth)};
}

}  // namespace hte::dgp
