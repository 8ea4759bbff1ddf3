#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

#include "hte/types.hpp"

namespace hte::dgp {

enum class ScenarioKind { Linear, ComplexNonlinear, Constant };

std::string_view to_string(ScenarioKind kind);
/// Accepts "linear", "complex_nonlinear"/"complex", "constant" (case-insensitive).
ScenarioKind parse_kind(std::string_view name);

inline constexpr std::array<ScenarioKind, 3> kAllScenarios = {
    ScenarioKind::Linear, ScenarioKind::ComplexNonlinear, ScenarioKind::Constant};

inline constexpr std::array<std::string_view, 5> kCovariateNames = {
    "income", "test_score", "neighborhood", "minority", "female"};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::ComplexNonlinear;
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  /// Standard deviation of the outcome noise U. Zero yields noiseless outcomes.
  double noise_sd = 1.0;

  void validate() const;
};

/// True CATE at a covariate record.
/// {"kind": "...", "n": ..., "seed": ..., "noise_sd": ...}; missing keys take defaults.
void to_json(nlohmann::json& j, const ScenarioSpec& spec);
void from_json(const nlohmann::json& j, ScenarioSpec& spec);

double true_cate(ScenarioKind kind, const CovariateRecord& row);

/// Treatment probability from the income median split; ties go to the upper arm.
constexpr double propensity(double income, double income_median) {
  return income < income_median ? 0.4 : 0.6;
}

/// Sample median (mean of the two middle order statistics for even n).
double median(std::vector<double> values);

/// Draws a dataset with full ground truth. Sub-streams in fixed order:
/// income, test_score, neighborhood, minority, female, treatment, noise.
std::pair<Dataset, GroundTruth> generate(const ScenarioSpec& spec);

}  // namespace hte::dgp
