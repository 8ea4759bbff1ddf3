#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hte/dgp.hpp"
#include "hte/io.hpp"
#include "hte/scm.hpp"
#include "support.hpp"

using namespace hte;
using namespace hte::scm;

namespace {

// y = x + w * tau + u, with tau a deterministic node.
StructuralModel chain() {
  StructuralModel m;
  m.add("x", Mechanism{});
  m.add("w", Mechanism{});
  m.add("tau", Mechanism{MechanismKind::Deterministic, 2.0, {}});
  Mechanism y;
  y.terms = {{1.0, {{"x"}}}, {1.0, {{"w"}, {"tau"}}}};
  m.add("y", y);
  return m;
}

double income_median(const Dataset& d) {
  std::vector<double> v(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) v[i] = d.row(i).at("income");
  return dgp::median(v);
}

Evidence unit(double income, double test_score, double minority, double female, double w, double y) {
  return {{"income", income}, {"test_score", test_score}, {"neighborhood", 0.3}, {"minority", minority},
          {"female", female}, {"W", w}, {"Y", y}};
}

}  // namespace

TEST_CASE("factor semantics") {
  CHECK(Factor{"x", FactorKind::Value}.apply(-2.5) == -2.5);
  CHECK(Factor{"x", FactorKind::Indicator, 1.0}.apply(1.0) == 0.0);
  CHECK(Factor{"x", FactorKind::Indicator, 1.0, true}.apply(1.0) == 1.0);
  CHECK(Factor{"x", FactorKind::PositivePart, 1.0}.apply(3.0) == 2.0);
  CHECK(Factor{"x", FactorKind::PositivePart, 1.0}.apply(0.0) == 0.0);
}

TEST_CASE("chain abduction") {
  const auto m = chain();
  const auto u = abduct(m, {{"x", 1.0}, {"w", 1.0}, {"tau", 2.0}, {"y", 4.0}});
  CHECK(u.at("y") == 1.0);
  CHECK(u.at("x") == 1.0);
  CHECK(u.count("tau") == 0);
  CHECK(counterfactual(m, {{"x", 1.0}, {"w", 1.0}, {"tau", 2.0}, {"y", 4.0}}, {"w", 0.0}, "y") == 2.0);
}

TEST_CASE("abduction errors") {
  const auto m = chain();
  CHECK_THROWS_WITH_AS(abduct(m, {{"x", 1.0}, {"w", 1.0}, {"tau", 3.0}, {"y", 4.0}}),
                       doctest::Contains("noiseless"), Error);
  CHECK_THROWS_WITH_AS(abduct(m, {{"x", 1.0}, {"w", 1.0}, {"y", 4.0}}), doctest::Contains("tau"), Error);

  StructuralModel b;
  b.add("z", Mechanism{MechanismKind::BernoulliThreshold, 0.5, {}});
  CHECK_THROWS_WITH_AS(abduct(b, {{"z", 1.0}}), doctest::Contains("invertible"), Error);
}

TEST_CASE("model construction rejects bad graphs") {
  StructuralModel m;
  m.add("a", Mechanism{});
  CHECK_THROWS_AS(m.add("a", Mechanism{}), Error);
  Mechanism later;
  later.terms = {{1.0, {{"b"}}}};
  CHECK_THROWS_AS(m.add("c", later), Error);
  CHECK_THROWS_AS(m.add("b", later), Error);
  CHECK_THROWS_AS(m.mechanism("zz"), Error);
}

TEST_CASE("intervention") {
  const auto m = chain();
  const auto iv = intervene(m, "w", 1.0);
  CHECK(iv.mechanism("w") == Mechanism::constant(1.0));
  CHECK(m.mechanism("w") == Mechanism{});
  for (const auto& v : m.variables()) {
    if (v != "w") CHECK(iv.mechanism(v) == m.mechanism(v));
  }
  // A leaf intervention leaves every other mechanism alone.
  const auto leaf = intervene(m, "y", 0.0);
  for (const auto& v : {"x", "w", "tau"}) CHECK(leaf.mechanism(v) == m.mechanism(v));
  CHECK(intervene(intervene(m, "w", 1.0), "w", 0.0).mechanism("w") == Mechanism::constant(0.0));
  CHECK_THROWS_AS(intervene(m, "q", 1.0), Error);

  const Evidence ev{{"x", 1.0}, {"w", 0.0}, {"tau", 2.0}, {"y", 1.5}};
  const auto world = counterfactual_world(m, ev, {{"w", 1.0}, {"w", 0.0}});
  CHECK(world.at("y") == 1.5);
}

TEST_CASE("simulation model reproduces the generator") {
  for (auto kind : dgp::kAllScenarios) {
    auto [d, g] = dgp::generate({kind, 2000, 23});
    const auto model = simulation_model(kind, income_median(d));
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto ev = evidence_for(d, i);
      const auto u = abduct(model, ev);
      CHECK(u.at("Y") == g.u[i]);
      CHECK(u.at("W") == doctest::Approx(d.treatment[i] - g.propensity[i]).epsilon(1e-15));

      // Round trip: forward simulation from recovered noise is the identity.
      const auto replay = model.simulate(u);
      for (const auto& [name, value] : ev) CHECK(replay.at(name) == value);

      // Null counterfactual.
      const double w = d.treatment[i];
      const auto same = counterfactual_world(model, ev, {{"W", w}});
      for (const auto& [name, value] : ev) CHECK(same.at(name) == value);

      // Flipped treatment reproduces the stored potential outcome.
      const double flipped = counterfactual(model, ev, {"W", 1.0 - w});
      CHECK(flipped == (w == 1.0 ? g.y0[i] : g.y1[i]));

      CHECK(ite(model, ev) == dgp::true_cate(kind, d.row(i)));
    }
  }
}

TEST_CASE("individual effects") {
  const auto cx = simulation_model(dgp::ScenarioKind::ComplexNonlinear, 0.0);
  CHECK(ite(cx, unit(1.2, 0.0, 1, 1, 1, 9.0)) == 7.0);
  CHECK(ite(cx, unit(1.2, 0.0, 1, 1, 0, -1.0)) == 7.0);
  const auto cst = simulation_model(dgp::ScenarioKind::Constant, 0.0);
  CHECK(ite(cst, unit(-0.7, 2.0, 0, 1, 1, 3.0)) == 2.0);
  CHECK_THROWS_AS(ite(cx, unit(1.2, 0.0, 1, 1, 1, 9.0), "T"), Error);
}

TEST_CASE("unit effects depart from their subgroup mean") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 2000, 42});
  const double med = income_median(d);
  const auto model = simulation_model(dgp::ScenarioKind::ComplexNonlinear, med);
  auto cell = [&](std::size_t i) {
    const auto r = d.row(i);
    return static_cast<int>(r.at("minority")) * 4 + static_cast<int>(r.at("female")) * 2 + (r.at("income") > med ? 1 : 0);
  };
  std::vector<double> sum(8, 0.0), count(8, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    sum[static_cast<std::size_t>(cell(i))] += g.tau_true[i];
    count[static_cast<std::size_t>(cell(i))] += 1.0;
  }
  double widest = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = static_cast<std::size_t>(cell(i));
    widest = std::max(widest, std::abs(ite(model, evidence_for(d, i)) - sum[c] / count[c]));
  }
  CHECK(widest > 0.5);
}

TEST_CASE("model json round trip") {
  for (auto kind : dgp::kAllScenarios) {
    const auto m = simulation_model(kind, 0.125);
    const nlohmann::json j = m;
    const auto back = model_from_json(j);
    CHECK(back.variables() == m.variables());
    for (const auto& v : m.variables()) CHECK(back.mechanism(v) == m.mechanism(v));
  }
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"format": "other"})")), InputError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(
                      R"({"format": "hte-scm", "version": 1, "variables": [{"name": "a", "mechanism": {"kind": "wavy"}}]})")),
                  InputError);
}

TEST_CASE("shipped example model matches the built-in one") {
  const auto path = std::filesystem::path(HTE_SOURCE_DIR) / "models" / "complex_nonlinear.json";
  const auto shipped = model_from_json(nlohmann::json::parse(testing::slurp(path)));
  const auto built = simulation_model(dgp::ScenarioKind::ComplexNonlinear, 0.0);
  CHECK(shipped.variables() == built.variables());
  for (const auto& v : built.variables()) CHECK(shipped.mechanism(v) == built.mechanism(v));
}

TEST_CASE("counterfactual csv") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::Linear, 50, 3});
  const auto t = io::parse_csv(counterfactuals_to_csv(simulation_model(dgp::ScenarioKind::Linear, income_median(d)), d));
  CHECK(t.header == std::vector<std::string>{"unit_id", "y_factual", "y_cf_w0", "y_cf_w1", "ite"});
  REQUIRE(t.rows.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(t.rows[i][0] == std::to_string(i));
    CHECK(io::parse_double(t.rows[i][1], "y") == d.outcome[i]);
    CHECK(io::parse_double(t.rows[i][2], "y0") == g.y0[i]);
    CHECK(io::parse_double(t.rows[i][3], "y1") == g.y1[i]);
    CHECK(io::parse_double(t.rows[i][4], "ite") == g.tau_true[i]);
  }
}
