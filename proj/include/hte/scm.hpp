#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hte/dgp.hpp"
#include "hte/types.hpp"

namespace hte::scm {

/// Values keyed by variable name.
using Assignment = std::map<std::string, double, std::less<>>;
/// Observed values of every endogenous variable for one unit.
using Evidence = Assignment;
/// Exogenous noise per variable.
using NoiseAssignment = Assignment;

enum class FactorKind {
  Value,         ///< x
  Indicator,     ///< 1(x > threshold), or 1(x >= threshold) when inclusive
  PositivePart,  ///< max(x - threshold, 0)
};

struct Factor {
  std::string variable;
  FactorKind kind = FactorKind::Value;
  double threshold = 0.0;
  bool inclusive = false;

  double apply(double x) const;
  bool operator==(const Factor&) const = default;
};

/// coefficient * product of factors.
struct Term {
  double coefficient = 1.0;
  std::vector<Factor> factors;

  bool operator==(const Term&) const = default;
};

enum class MechanismKind {
  Additive,            ///< f(parents) + U
  Deterministic,       ///< f(parents), no noise
  Constant,            ///< fixed value (result of an intervention)
  BernoulliThreshold,  ///< 1(U < f(parents)); not invertible
};

struct Mechanism {
  MechanismKind kind = MechanismKind::Additive;
  double intercept = 0.0;  ///< constant value for Constant mechanisms
  std::vector<Term> terms;

  /// Deterministic part f(parents) = intercept + sum of terms.
  double deterministic(const Assignment& values) const;
  std::vector<std::string> parents() const;
  bool invertible() const { return kind != MechanismKind::BernoulliThreshold; }

  static Mechanism constant(double value) { return {MechanismKind::Constant, value, {}}; }
  bool operator==(const Mechanism&) const = default;
};

/// Ordered structural equations over a DAG; each variable's parents precede it.
class StructuralModel {
 public:
  /// Appends an equation. Throws when the variable exists or a parent is undeclared.
  StructuralModel& add(std::string variable, Mechanism mechanism);

  const std::vector<std::string>& variables() const { return order_; }
  const Mechanism& mechanism(std::string_view variable) const;
  bool contains(std::string_view variable) const;

  /// Forward simulation in topological order. Missing noise entries count as zero.
  Assignment simulate(const NoiseAssignment& noise) const;

 private:
  friend StructuralModel intervene(const StructuralModel&, std::string_view, double);
  std::vector<std::string> order_;
  std::map<std::string, Mechanism, std::less<>> mechanisms_;
};

/// Recovers each variable's noise as observed - f(observed parents). Throws when a
/// mechanism is not invertible, the evidence is incomplete, or a noiseless
/// mechanism disagrees with the evidence. Verifies that forward simulation
/// reproduces the evidence exactly.
NoiseAssignment abduct(const StructuralModel& model, const Evidence& evidence);

/// Copy of `model` with `variable`'s mechanism replaced by the constant `value`.
StructuralModel intervene(const StructuralModel& model, std::string_view variable, double value);

struct Intervention {
  std::string variable;
  double value = 0.0;
};

/// Abduction, action, prediction; returns every variable's counterfactual value.
Assignment counterfactual_world(const StructuralModel& model, const Evidence& evidence,
                                const std::vector<Intervention>& interventions);

/// Counterfactual value of `query` under `intervention`.
double counterfactual(const StructuralModel& model, const Evidence& evidence, const Intervention& intervention,
                      std::string_view query = "Y");

/// Y(W=1) - Y(W=0) for the unit described by `evidence`.
double ite(const StructuralModel& model, const Evidence& evidence, std::string_view treatment = "W",
           std::string_view outcome = "Y");

/// The simulation DAG: five exogenous covariates, W depending on the income
/// median split, Y = income + neighborhood + W * tau(x) + U.
StructuralModel simulation_model(dgp::ScenarioKind kind, double income_median);

/// Evidence for row `i`: covariates plus W and Y.
Evidence evidence_for(const Dataset& data, std::size_t i);

void to_json(nlohmann::json& j, const StructuralModel& model);
StructuralModel model_from_json(const nlohmann::json& j);

/// Per-unit counterfactual table: unit_id, y_factual, y_cf_w0, y_cf_w1, ite.
std::string counterfactuals_to_csv(const StructuralModel& model, const Dataset& data);

}  // namespace hte::scm
