#include "hte/scm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hte/io.hpp"

namespace hte::scm {

namespace {

constexpr int kFormatVersion = 1;

double lookup(const Assignment& values, std::string_view name) {
  auto it = values.find(name);
  if (it == values.end()) throw Error("no value for '" + std::string(name) + "'");
  return it->second;
}

std::string_view kind_name(MechanismKind k) {
  switch (k) {
    case MechanismKind::Additive:
      return "additive";
    case MechanismKind::Deterministic:
      return "deterministic";
    case MechanismKind::Constant:
      return "constant";
    case MechanismKind::BernoulliThreshold:
      return "bernoulli_threshold";
  }
  return "?";
}

MechanismKind parse_mechanism_kind(const std::string& s) {
  if (s == "additive") return MechanismKind::Additive;
  if (s == "deterministic") return MechanismKind::Deterministic;
  if (s == "constant") return MechanismKind::Constant;
  if (s == "bernoulli_threshold") return MechanismKind::BernoulliThreshold;
  throw InputError("unknown mechanism kind '" + s + "'");
}

std::string_view factor_name(FactorKind k) {
  switch (k) {
    case FactorKind::Value:
      return "value";
    case FactorKind::Indicator:
      return "indicator";
    case FactorKind::PositivePart:
      return "positive_part";
  }
  return "?";
}

FactorKind parse_factor_kind(const std::string& s) {
  if (s == "value") return FactorKind::Value;
  if (s == "indicator") return FactorKind::Indicator;
  if (s == "positive_part") return FactorKind::PositivePart;
  throw InputError("unknown factor kind '" + s + "'");
}

Factor value(std::string v) { return {std::move(v), FactorKind::Value, 0.0, false}; }

}  // namespace

double Factor::apply(double x) const {
  switch (kind) {
    case FactorKind::Value:
      return x;
    case FactorKind::Indicator:
      return (inclusive ? x >= threshold : x > threshold) ? 1.0 : 0.0;
    case FactorKind::PositivePart:
      return std::max(x - threshold, 0.0);
  }
  return 0.0;
}

double Mechanism::deterministic(const Assignment& values) const {
  double f = intercept;
  if (kind == MechanismKind::Constant) return f;
  for (const auto& t : terms) {
    double prod = t.coefficient;
    for (const auto& fac : t.factors) prod *= fac.apply(lookup(values, fac.variable));
    f += prod;
  }
  return f;
}

std::vector<std::string> Mechanism::parents() const {
  std::vector<std::string> out;
  if (kind == MechanismKind::Constant) return out;
  for (const auto& t : terms) {
    for (const auto& f : t.factors) {
      if (std::find(out.begin(), out.end(), f.variable) == out.end()) out.push_back(f.variable);
    }
  }
  return out;
}

StructuralModel& StructuralModel::add(std::string variable, Mechanism mechanism) {
  if (variable.empty()) throw Error("variable name must be nonempty");
  if (contains(variable)) throw Error("variable '" + variable + "' already has an equation");
  for (const auto& p : mechanism.parents()) {
    if (p == variable) throw Error("variable '" + variable + "' cannot be its own parent");
    if (!contains(p)) {
      throw Error("parent '" + p + "' of '" + variable + "' must be declared earlier (acyclic order)");
    }
  }
  order_.push_back(variable);
  mechanisms_.emplace(std::move(variable), std::move(mechanism));
  return *this;
}

const Mechanism& StructuralModel::mechanism(std::string_view variable) const {
  auto it = mechanisms_.find(variable);
  if (it == mechanisms_.end()) throw Error("unknown variable '" + std::string(variable) + "'");
  return it->second;
}

bool StructuralModel::contains(std::string_view variable) const { return mechanisms_.find(variable) != mechanisms_.end(); }

Assignment StructuralModel::simulate(const NoiseAssignment& noise) const {
  Assignment values;
  for (const auto& v : order_) {
    const auto& m = mechanisms_.find(v)->second;
    auto it = noise.find(v);
    const double u = it == noise.end() ? 0.0 : it->second;
    double x = 0.0;
    switch (m.kind) {
      case MechanismKind::Additive:
        x = m.deterministic(values) + u;
        break;
      case MechanismKind::Deterministic:
      case MechanismKind::Constant:
        x = m.deterministic(values);
        break;
      case MechanismKind::BernoulliThreshold:
        x = u < m.deterministic(values) ? 1.0 : 0.0;
        break;
    }
    values.emplace(v, x);
  }
  return values;
}

NoiseAssignment abduct(const StructuralModel& model, const Evidence& evidence) {
  for (const auto& v : model.variables()) {
    if (!model.mechanism(v).invertible()) {
      throw Error("abduction requires invertible mechanisms; '" + v + "' is " +
                  std::string(kind_name(model.mechanism(v).kind)));
    }
  }
  NoiseAssignment noise;
  for (const auto& v : model.variables()) {
    auto it = evidence.find(v);
    if (it == evidence.end()) throw Error("evidence is missing variable '" + v + "'");
    if (!std::isfinite(it->second)) throw Error("evidence for '" + v + "' is not finite");
    const auto& m = model.mechanism(v);
    const double f = m.deterministic(evidence);
    if (m.kind == MechanismKind::Additive) {
      noise.emplace(v, it->second - f);
    } else if (it->second != f) {
      throw Error("evidence for '" + v + "' (" + io::format_double(it->second) +
                  ") is inconsistent with its noiseless mechanism (" + io::format_double(f) + ")");
    }
  }
  const auto replay = model.simulate(noise);
  for (const auto& v : model.variables()) {
    if (replay.at(v) != evidence.find(v)->second) {
      throw Error("abduction did not reproduce '" + v + "' exactly (" + io::format_double(replay.at(v)) +
                  " vs " + io::format_double(evidence.find(v)->second) + ")");
    }
  }
  return noise;
}

StructuralModel intervene(const StructuralModel& model, std::string_view variable, double value) {
  if (!model.contains(variable)) throw Error("cannot intervene on unknown variable '" + std::string(variable) + "'");
  StructuralModel out = model;
  out.mechanisms_.find(variable)->second = Mechanism::constant(value);
  return out;
}

Assignment counterfactual_world(const StructuralModel& model, const Evidence& evidence,
                                const std::vector<Intervention>& interventions) {
  const auto noise = abduct(model, evidence);
  StructuralModel acted = model;
  for (const auto& iv : interventions) acted = intervene(acted, iv.variable, iv.value);
  return acted.simulate(noise);
}

double counterfactual(const StructuralModel& model, const Evidence& evidence, const Intervention& intervention,
                      std::string_view query) {
  if (!model.contains(query)) throw Error("unknown query variable '" + std::string(query) + "'");
  const auto world = counterfactual_world(model, evidence, {intervention});
  return world.find(query)->second;
}

double ite(const StructuralModel& model, const Evidence& evidence, std::string_view treatment,
           std::string_view outcome) {
  const std::string w(treatment);
  return counterfactual(model, evidence, {w, 1.0}, outcome) - counterfactual(model, evidence, {w, 0.0}, outcome);
}

StructuralModel simulation_model(dgp::ScenarioKind kind, double income_median) {
  StructuralModel m;
  for (auto name : dgp::kCovariateNames) m.add(std::string(name), Mechanism{});

  Mechanism w;
  w.intercept = 0.4;
  w.terms.push_back({0.2, {{"income", FactorKind::Indicator, income_median, true}}});
  m.add("W", w);

  Mechanism y;
  y.terms.push_back({1.0, {value("income")}});
  y.terms.push_back({1.0, {value("neighborhood")}});
  y.terms.push_back({2.0, {value("W")}});
  switch (kind) {
    case dgp::ScenarioKind::Linear:
      y.terms.push_back({1.5, {value("W"), value("minority")}});
      break;
    case dgp::ScenarioKind::ComplexNonlinear:
      y.terms.push_back({5.0, {value("W"), value("minority"), value("female"),
                               {"income", FactorKind::Indicator, 0.0, false}}});
      y.terms.push_back({2.0, {value("W"), value("minority"), {"test_score", FactorKind::PositivePart, 0.0, false}}});
      break;
    case dgp::ScenarioKind::Constant:
      break;
  }
  m.add("Y", y);
  return m;
}

Evidence evidence_for(const Dataset& data, std::size_t i) {
  Evidence e;
  for (std::size_t j = 0; j < data.num_covariates(); ++j) {
    e.emplace(data.covariate_names[j], data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }
  e.emplace("W", data.treatment[i]);
  e.emplace("Y", data.outcome[i]);
  return e;
}

void to_json(nlohmann::json& j, const StructuralModel& model) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : model.variables()) {
    const auto& m = model.mechanism(v);
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : m.terms) {
      nlohmann::json factors = nlohmann::json::array();
      for (const auto& f : t.factors) {
        nlohmann::json jf{{"variable", f.variable}, {"kind", factor_name(f.kind)}};
        if (f.kind != FactorKind::Value) jf["threshold"] = f.threshold;
        if (f.kind == FactorKind::Indicator) jf["inclusive"] = f.inclusive;
        factors.push_back(std::move(jf));
      }
      terms.push_back({{"coefficient", t.coefficient}, {"factors", std::move(factors)}});
    }
    vars.push_back({{"name", v},
                    {"mechanism", {{"kind", kind_name(m.kind)}, {"intercept", m.intercept}, {"terms", std::move(terms)}}}});
  }
  j = nlohmann::json{{"format", "hte-scm"}, {"version", kFormatVersion}, {"variables", std::move(vars)}};
}

StructuralModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "hte-scm") throw InputError("not a structural model document");
    if (j.at("version").get<int>() != kFormatVersion) throw InputError("unsupported structural model version");
    StructuralModel model;
    for (const auto& jv : j.at("variables")) {
      const auto& jm = jv.at("mechanism");
      Mechanism m;
      m.kind = parse_mechanism_kind(jm.at("kind").get<std::string>());
      m.intercept = jm.value("intercept", 0.0);
      for (const auto& jt : jm.value("terms", nlohmann::json::array())) {
        Term t;
        t.coefficient = jt.value("coefficient", 1.0);
        for (const auto& jf : jt.at("factors")) {
          Factor f;
          f.variable = jf.at("variable").get<std::string>();
          f.kind = parse_factor_kind(jf.value("kind", std::string("value")));
          f.threshold = jf.value("threshold", 0.0);
          f.inclusive = jf.value("inclusive", false);
          t.factors.push_back(std::move(f));
        }
        m.terms.push_back(std::move(t));
      }
      model.add(jv.at("name").get<std::string>(), std::move(m));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed structural model: ") + e.what());
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(std::string("invalid structural model: ") + e.what());
  }
}

std::string counterfactuals_to_csv(const StructuralModel& model, const Dataset& data) {
  io::CsvTable t;
  t.header = {"unit_id", "y_factual", "y_cf_w0", "y_cf_w1", "ite"};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ev = evidence_for(data, i);
    const double y0 = counterfactual(model, ev, {"W", 0.0});
    const double y1 = counterfactual(model, ev, {"W", 1.0});
    t.rows.push_back({std::to_string(i), io::format_double(data.outcome[i]), io::format_double(y0),
                      io::format_double(y1), io::format_double(y1 - y0)});
  }
  return io::to_csv(t);
}

}  // namespace hte::scm
