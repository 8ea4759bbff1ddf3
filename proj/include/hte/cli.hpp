#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hte/dgp.hpp"
#include "hte/forest.hpp"

namespace hte::cli {

enum class Command { Replicate, Simulate, Fit };

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Everything one invocation needs. Built from defaults, then a JSON config
/// file, then command-line flags.
struct RunConfig {
  Command command = Command::Replicate;
  dgp::ScenarioKind scenario = dgp::ScenarioKind::ComplexNonlinear;
  std::size_t n = 2000;
  double noise_sd = 1.0;
  std::uint64_t seed = 42;
  std::vector<std::string> methods = {"ols", "causal_forest"};
  forest::ForestParams forest;
  /// Features tried per split; unset means all features.
  std::optional<int> mtry;
  int folds = 5;  ///< meta-learner cross-fitting; also the forest's nuisance folds
  std::string learner_oracle = "forest";
  double learner_ridge = 0.0;
  forest::RegressionForestParams learner_forest;
  std::filesystem::path out = "hte_out";
  bool dump_data = false;
  unsigned threads = 1;
  // fit only
  std::filesystem::path data;
  std::string treatment = "W";
  std::string outcome = "Y";
  std::vector<std::string> covariates;
  std::optional<std::filesystem::path> save_forest;

  /// Throws InputError on an invalid combination.
  void validate() const;
  /// Forest parameters as used for `num_features` covariates.
  forest::ForestParams effective_forest(std::size_t num_features) const;
  /// Effective configuration. Thread count is omitted since it never changes results.
  nlohmann::json to_json(std::size_t num_features) const;
};

inline const std::vector<std::string> kKnownMethods = {"ols", "causal_forest", "s", "t", "x", "r", "dr"};

/// Seed of the simulated dataset for `kind`; estimator seeds do not depend on it.
std::uint64_t scenario_seed(std::uint64_t seed, dgp::ScenarioKind kind);

/// Parses argv-style arguments (without the program name). Throws InputError.
/// Returns nullopt when help was printed to `out`.
std::optional<RunConfig> parse_args(const std::vector<std::string>& args, std::ostream& out);

/// Runs a parsed configuration; returns the files written.
std::vector<std::filesystem::path> execute(const RunConfig& config, std::ostream& log);

/// Full entry point: parse, execute, map failures to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hte::cli
