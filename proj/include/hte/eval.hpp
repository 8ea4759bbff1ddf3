#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hte/types.hpp"

namespace hte::eval {

/// Error decomposition of one method against the truth.
struct MethodReport {
  std::string method;
  double bias = 0.0;      ///< |mean(error)|
  double variance = 0.0;  ///< population variance of error
  double mse = 0.0;       ///< mean(error^2)

  /// |mse - (bias^2 + variance)| <= 1e-8 + 1e-6 * mse
  bool identity_holds() const;
};

MethodReport bias_variance_mse(const CateEstimates& estimates, std::span<const double> truth);

/// One cell of minority x female x (income above the sample median).
struct SubgroupRow {
  int minority = 0;
  int female = 0;
  int high_income = 0;
  std::size_t n = 0;
  double true_mean = 0.0;
  std::map<std::string, double> estimate_mean;
  std::map<std::string, double> bias;  ///< estimate mean - true mean (signed)

  std::string label() const;
};

struct SubgroupReport {
  std::vector<SubgroupRow> rows;  ///< 8 rows, high-impact cells first
  std::vector<std::string> methods;
  std::map<std::string, double> mean_absolute_bias;

  const SubgroupRow& row(int minority, int female, int high_income) const;
};

/// Throws Error naming any empty subgroup.
SubgroupReport subgroup_report(const Dataset& data, std::span<const double> truth,
                               const std::vector<CateEstimates>& estimates);

inline constexpr double kZ95 = 1.959964;

/// Share of units with truth inside estimate +/- z*se.
double coverage(const CateEstimates& estimates, std::span<const double> truth, double level = 0.95);

/// Two-sided normal quantile for `level` (0.95 gives 1.959964).
double normal_critical_value(double level);

struct OverlapDiagnostic {
  double min = 0.0;
  double max = 0.0;
  std::size_t violations = 0;
  std::size_t n = 0;
  double epsilon = 0.05;

  double violation_fraction() const { return n ? static_cast<double>(violations) / static_cast<double>(n) : 0.0; }
};

OverlapDiagnostic overlap_check(std::span<const double> propensity, double epsilon = 0.05);

/// A table rendered to either CSV or aligned markdown.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const;
  std::string markdown() const;
};

/// Table 2 analogue: scenario, method, bias, variance, mse.
Table method_table(const std::vector<std::pair<std::string, MethodReport>>& reports);
/// Table 3 analogue with a mean-absolute-bias footer row.
Table subgroup_table(const SubgroupReport& report);

/// Inputs for figure data emission from one completed scenario run.
struct RunResults {
  std::string scenario;
  std::vector<double> tau_true;
  std::vector<CateEstimates> estimates;
  std::vector<std::pair<std::string, double>> importance;
  std::optional<SubgroupReport> subgroups;
};

/// Writes scatter_<method>.csv (with an se column when every run has one), importance.csv, and subgroups.csv (when present)
/// into `dir`. Returns the written paths.
std::vector<std::filesystem::path> emit_figure_data(const std::vector<RunResults>& runs,
                                                    const std::filesystem::path& dir);

}  // namespace hte::eval
