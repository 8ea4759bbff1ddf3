#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hte/dgp.hpp"
#include "hte/forest.hpp"
#include "hte/rng.hpp"
#include "support.hpp"

using namespace hte;
using namespace hte::forest;

namespace {

ForestParams small_params(std::size_t trees = 100, std::uint64_t seed = 1) {
  ForestParams p;
  p.num_trees = trees;
  p.nuisance_trees = 50;
  p.seed = seed;
  return p;
}

// Effect 4 on units with x0 = 1, zero otherwise; x1, x2 are noise.
Dataset binary_moderator(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Dataset d;
  d.covariate_names = {"x0", "x1", "x2"};
  d.covariates.resize(static_cast<Eigen::Index>(n), 3);
  d.treatment.resize(n);
  d.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d.covariates(r, 0) = coin(rng) ? 1.0 : 0.0;
    d.covariates(r, 1) = z(rng);
    d.covariates(r, 2) = z(rng);
    d.treatment[i] = coin(rng);
    d.outcome[i] = d.treatment[i] * 4.0 * d.covariates(r, 0) + z(rng);
  }
  return d;
}

struct Best {
  double score = -std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
};

// Exhaustive root split search with the same admissibility rules, written independently.
Best brute_force_root(const Matrix& X, const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<int>& arm, const std::vector<std::size_t>& split,
                      const std::vector<std::size_t>& est, int min_t, int min_c) {
  Best best;
  for (int f = 0; f < X.cols(); ++f) {
    std::vector<double> xs;
    for (auto i : split) xs.push_back(X(static_cast<Eigen::Index>(i), f));
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
      const double t = (xs[k] + xs[k + 1]) / 2.0;
      auto side_ok = [&](const std::vector<std::size_t>& units) {
        int lt = 0, lc = 0, rt = 0, rc = 0;
        for (auto i : units) {
          const bool left = X(static_cast<Eigen::Index>(i), f) <= t;
          (left ? (arm[i] ? lt : lc) : (arm[i] ? rt : rc))++;
        }
        return lt >= min_t && lc >= min_c && rt >= min_t && rc >= min_c;
      };
      if (!side_ok(split) || !side_ok(est)) continue;
      double al = 0, bl = 0, ar = 0, br = 0, nl = 0, nr = 0;
      for (auto i : split) {
        if (X(static_cast<Eigen::Index>(i), f) <= t) {
          al += a[i];
          bl += b[i];
          nl += 1;
        } else {
          ar += a[i];
          br += b[i];
          nr += 1;
        }
      }
      const double diff = al / bl - ar / br;
      const double score = nl * nr / (nl + nr) * diff * diff;
      if (score > best.score) best = {score, f, t};
    }
  }
  return best;
}

template <typename Fn>
void for_each_leaf_population(const Tree& t, const Matrix& X, const std::vector<std::size_t>& units,
                              const std::vector<int>& arm, Fn&& fn) {
  std::vector<int> treated(t.nodes.size()), control(t.nodes.size());
  for (auto i : units) {
    const int leaf = t.leaf_of([&](int j) { return X(static_cast<Eigen::Index>(i), j); });
    (arm[i] ? treated : control)[static_cast<std::size_t>(leaf)]++;
  }
  for (std::size_t k = 0; k < t.nodes.size(); ++k) {
    if (t.nodes[k].is_leaf()) fn(k, treated[k], control[k]);
  }
}

}  // namespace

TEST_CASE("split criterion matches a hand computation") {
  Matrix X(4, 1);
  X << 0.0, 1.0, 2.0, 3.0;
  const std::vector<double> a = {1.0, 3.0, -2.0, 0.0};
  const std::vector<double> b = {1.0, 1.0, 2.0, 2.0};
  const std::vector<int> arm = {1, 0, 1, 0};
  const GrowInputs in{&X, a, b, arm};
  const std::vector<std::size_t> units = {0, 1, 2, 3};
  // Left {0,1}: tau = 4/2 = 2; right {2,3}: tau = -2/4 = -0.5; 2*2/4 * 2.5^2 = 6.25
  CHECK(split_criterion(in, SplitRule::Causal, units, 0, 1.5) == doctest::Approx(6.25).epsilon(1e-14));
  // Regression rule: 4^2/2 + (-2)^2/4 = 9
  CHECK(split_criterion(in, SplitRule::Regression, units, 0, 1.5) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(split_criterion(in, SplitRule::Causal, units, 0, 10.0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("root split equals the brute-force optimum on tiny nodes") {
  for (unsigned seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    const std::size_t n = 40;
    Matrix X(static_cast<Eigen::Index>(n), 3);
    std::vector<double> a(n), b(n);
    std::vector<int> arm(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < 3; ++j) X(static_cast<Eigen::Index>(i), j) = std::round(z(rng) * 4.0) / 4.0;
      a[i] = z(rng);
      b[i] = u(rng);
      arm[i] = static_cast<int>(i % 2);
    }
    std::vector<std::size_t> split, est;
    for (std::size_t i = 0; i < n; ++i) (i % 3 == 0 ? est : split).push_back(i);

    const GrowInputs in{&X, a, b, arm};
    TreeConfig cfg;
    cfg.mtry = 3;
    cfg.min_leaf_treated = 2;
    cfg.min_leaf_control = 2;
    Rng r(seed);
    const auto tree = grow_tree(in, cfg, split, est, r);
    const auto want = brute_force_root(X, a, b, arm, split, est, 2, 2);
    if (want.feature < 0) {
      CHECK(tree.nodes.size() == 1);
      continue;
    }
    CHECK(tree.nodes[0].feature == want.feature);
    CHECK(tree.nodes[0].threshold == doctest::Approx(want.threshold).epsilon(1e-12));
    CHECK(split_criterion(in, SplitRule::Causal, split, tree.nodes[0].feature, tree.nodes[0].threshold) ==
          doctest::Approx(want.score).epsilon(1e-12));
  }
}

TEST_CASE("leaves carry estimation-sample effects and respect minima") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 600, 3});
  auto params = small_params(40);
  params.min_leaf_treated = 4;
  params.min_leaf_control = 6;
  const auto model = grow(d, params);
  for (const auto& t : model.trees) {
    std::vector<std::size_t> both;
    std::set_intersection(t.split_subsample.begin(), t.split_subsample.end(), t.estimation_subsample.begin(),
                          t.estimation_subsample.end(), std::back_inserter(both));
    CHECK(both.empty());
    if (t.nodes.size() == 1) continue;
    for_each_leaf_population(t, d.covariates, t.estimation_subsample, d.treatment,
                             [&](std::size_t k, int treated, int control) {
                               CHECK(treated >= 4);
                               CHECK(control >= 6);
                               CHECK(t.nodes[k].n_treated == treated);
                               CHECK(t.nodes[k].n_control == control);
                               CHECK(std::isfinite(t.nodes[k].value));
                             });
    for_each_leaf_population(t, d.covariates, t.split_subsample, d.treatment,
                             [&](std::size_t, int treated, int control) {
                               CHECK(treated >= 4);
                               CHECK(control >= 6);
                             });
  }
}

TEST_CASE("leaf value is the residual ratio over estimation units") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::Linear, 300, 8});
  const auto model = grow(d, small_params(5));
  const auto& t = model.trees[0];
  std::vector<double> a(t.nodes.size()), b(t.nodes.size());
  for (auto i : t.estimation_subsample) {
    const int leaf = t.leaf_of([&](int j) { return d.covariates(static_cast<Eigen::Index>(i), j); });
    const double wt = d.treatment[i] - model.e_hat[i];
    a[static_cast<std::size_t>(leaf)] += wt * (d.outcome[i] - model.m_hat[i]);
    b[static_cast<std::size_t>(leaf)] += wt * wt;
  }
  for (std::size_t k = 0; k < t.nodes.size(); ++k) {
    if (t.nodes[k].is_leaf()) CHECK(t.nodes[k].value == doctest::Approx(a[k] / b[k]).epsilon(1e-12));
  }
}

TEST_CASE("subsample sizes follow the fractions") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::Constant, 400, 2});
  auto params = small_params(20);
  params.subsample_fraction = 0.4;
  params.honesty_fraction = 0.25;
  params.ci_groups = 1;
  const auto model = grow(d, params);
  for (const auto& t : model.trees) {
    CHECK(t.split_subsample.size() == 40);
    CHECK(t.estimation_subsample.size() == 120);
  }
}

TEST_CASE("binary moderator is chosen at the root") {
  const auto d = binary_moderator(1000, 4);
  auto params = small_params(100);
  params.mtry = 3;
  const auto model = grow(d, params);
  int hits = 0;
  for (const auto& t : model.trees) hits += t.nodes[0].feature == 0;
  CHECK(hits >= 95);
}

TEST_CASE("single continuous moderator dominates importance") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t n = 1000;
  Dataset d;
  d.covariate_names = {"x1", "x2", "x3"};
  d.covariates.resize(n, 3);
  d.treatment.resize(n);
  d.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) d.covariates(static_cast<Eigen::Index>(i), j) = z(rng);
    d.treatment[i] = static_cast<int>(rng() % 2);
    d.outcome[i] = d.treatment[i] * 4.0 * d.covariates(static_cast<Eigen::Index>(i), 0) + z(rng);
  }
  auto params = small_params(100);
  params.mtry = 3;
  const auto imp = variable_importance(grow(d, params));
  CHECK(imp[0].first == "x1");
  CHECK(imp[0].second > 0.6);
  double s = 0.0;
  for (const auto& [name, w] : imp) s += w;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forest without splits has uniform importance") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::Constant, 200, 5});
  auto params = small_params(10);
  params.min_leaf_treated = 1000;
  const auto model = grow(d, params);
  for (const auto& t : model.trees) CHECK(t.nodes.size() == 1);
  for (const auto& [name, w] : variable_importance(model)) CHECK(w == 0.2);
}

TEST_CASE("importance weights splits by depth") {
  CausalForest m;
  m.feature_names = {"a", "b"};
  Tree t;
  // root on a, right child on b
  t.nodes = {Node{0, 0.0, 1, 2}, Node{}, Node{1, 0.0, 3, 4}, Node{}, Node{}};
  m.trees = {t};
  const auto imp = variable_importance(m);
  CHECK(imp[0].second == doctest::Approx(1.0 / 1.79));
  CHECK(imp[1].second == doctest::Approx(0.79 / 1.79));
}

TEST_CASE("identical single-leaf trees predict their value with zero se") {
  CausalForest m;
  m.feature_names = {"a"};
  for (int k = 0; k < 40; ++k) {
    Tree t;
    Node leaf;
    leaf.value = 1.25;
    t.nodes = {leaf};
    t.group = k % 4;
    m.trees.push_back(t);
  }
  Matrix rows(3, 1);
  rows << -1.0, 0.0, 7.0;
  const auto est = predict(m, rows);
  REQUIRE(est.se);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(est.tau_hat[i] == 1.25);
    CHECK((*est.se)[i] == 0.0);
  }
  CHECK_THROWS_AS(predict(CausalForest{}, rows), Error);
  CHECK_THROWS_AS(predict(m, Matrix::Zero(2, 2)), Error);
}

TEST_CASE("debiased variance is nonnegative and shrinks toward the raw difference") {
  CHECK(debiased_variance(0.0, 0.0, 50) == 0.0);
  CHECK(debiased_variance(1.0, 2.0, 50) >= 0.0);
  CHECK(debiased_variance(1.0, 1e-9, 50) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(debiased_variance(1e-3, 1.0, 50) > 0.0);
  CHECK(debiased_variance(2.0, 1.0, 50) >= 1.0);
}

TEST_CASE("same result for any thread count") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 400, 6});
  auto p1 = small_params(60);
  auto p4 = p1;
  p4.threads = 4;
  const auto a = grow(d, p1);
  const auto b = grow(d, p4);
  CHECK(a.m_hat == b.m_hat);
  CHECK(a.e_hat == b.e_hat);
  const auto ea = predict(a, d.covariates);
  const auto eb = predict(b, d.covariates);
  CHECK(ea.tau_hat == eb.tau_hat);
  CHECK(*ea.se == *eb.se);
  CHECK(to_json(a) == to_json(b));
}

TEST_CASE("row order does not change predictions") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 400, 7});
  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  const auto params = small_params(60);
  const auto a = predict(grow(d, params), d.covariates);
  const auto b = predict(grow(d.select(perm), params), d.covariates);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(std::abs(a.tau_hat[i] - b.tau_hat[i]) <= 1e-10);
    CHECK(std::abs((*a.se)[i] - (*b.se)[i]) <= 1e-10);
  }
}

TEST_CASE("different seeds give different forests") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 300, 7});
  const auto a = predict(grow(d, small_params(30, 1)), d.covariates);
  const auto b = predict(grow(d, small_params(30, 2)), d.covariates);
  CHECK(a.tau_hat != b.tau_hat);
}

TEST_CASE("more trees do not raise the median standard error") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 600, 10});
  auto median_se = [&](std::size_t trees) {
    auto p = small_params(trees);
    p.nuisance_trees = 100;
    auto se = *predict(grow(d, p), d.covariates).se;
    for (double s : se) CHECK(s >= 0.0);
    return dgp::median(se);
  };
  const double few = median_se(200);
  const double many = median_se(800);
  CHECK(many <= few);
}

TEST_CASE("nuisance estimates") {
  SUBCASE("constant outcome") {
    auto [d, g] = dgp::generate({dgp::ScenarioKind::Constant, 300, 1});
    std::fill(d.outcome.begin(), d.outcome.end(), 3.5);
    const auto nz = fit_nuisance(d, small_params());
    for (double m : nz.m_hat) CHECK(std::abs(m - 3.5) <= 1e-6);
  }
  SUBCASE("propensity recovery at n=2000") {
    auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 2000, 12});
    auto params = small_params();
    params.nuisance_trees = 200;
    const auto nz = fit_nuisance(d, params);
    double mae = 0.0, high = 0.0;
    int n_high = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(nz.e_hat[i] >= kPropensityClip);
      CHECK(nz.e_hat[i] <= 1.0 - kPropensityClip);
      mae += std::abs(nz.e_hat[i] - g.propensity[i]);
      if (g.propensity[i] == 0.6) {
        high += nz.e_hat[i];
        ++n_high;
      }
    }
    CHECK(mae / 2000.0 < 0.08);
    CHECK(high / n_high >= 0.55);
    CHECK(high / n_high <= 0.65);
    for (int k = 0; k < 5; ++k) CHECK(std::count(nz.fold.begin(), nz.fold.end(), k) == 400);
  }
  SUBCASE("errors") {
    auto [d, g] = dgp::generate({dgp::ScenarioKind::Constant, 19, 1});
    CHECK_THROWS_AS(fit_nuisance(d, small_params()), Error);
    auto [e, h] = dgp::generate({dgp::ScenarioKind::Constant, 100, 1});
    std::fill(e.treatment.begin(), e.treatment.end(), 0);
    e.treatment[0] = e.treatment[1] = 1;
    CHECK_THROWS_WITH_AS(fit_nuisance(e, small_params()), doctest::Contains("fewer folds"), Error);
  }
}

TEST_CASE("grow preconditions and parameter bounds") {
  auto [d, g] = dgp::generate({dgp::ScenarioKind::Constant, 49, 1});
  CHECK_THROWS_AS(grow(d, small_params()), Error);
  auto [e, h] = dgp::generate({dgp::ScenarioKind::Constant, 100, 1});
  auto single = e;
  std::fill(single.treatment.begin(), single.treatment.end(), 1);
  CHECK_THROWS_AS(grow(single, small_params()), Error);

  auto bad = [&](auto mutate) {
    auto p = small_params();
    mutate(p);
    CHECK_THROWS_AS(p.validate(5), Error);
  };
  bad([](ForestParams& p) { p.num_trees = 0; });
  bad([](ForestParams& p) { p.subsample_fraction = 0.0; });
  bad([](ForestParams& p) { p.subsample_fraction = 1.5; });
  bad([](ForestParams& p) { p.honesty_fraction = 1.0; });
  bad([](ForestParams& p) { p.min_leaf_treated = 0; });
  bad([](ForestParams& p) { p.min_leaf_control = 0; });
  bad([](ForestParams& p) { p.mtry = 6; });
  bad([](ForestParams& p) { p.num_folds_nuisance = 1; });
  CHECK_NOTHROW(small_params().validate(5));
  CHECK(ForestParams{}.effective_mtry(5) == 3);
  CHECK(ForestParams{}.effective_nuisance_trees() == 500);
}

TEST_CASE("params json round trip") {
  auto p = small_params(123, 99);
  p.mtry = 2;
  p.ci_groups = 10;
  const nlohmann::json j = p;
  const auto back = j.get<ForestParams>();
  CHECK(nlohmann::json(back) == j);
  const auto partial = nlohmann::json::parse(R"({"num_trees": 7})").get<ForestParams>();
  CHECK(partial.num_trees == 7);
  CHECK(partial.min_leaf_treated == 5);
}

TEST_CASE("saved forests reload and predict identically") {
  testing::TempDir dir("forest");
  auto [d, g] = dgp::generate({dgp::ScenarioKind::ComplexNonlinear, 300, 4});
  const auto model = grow(d, small_params(30));
  save(model, dir / "f.json");
  const auto back = load(dir / "f.json");
  const auto a = predict(model, d.covariates);
  const auto b = predict(back, d.covariates);
  CHECK(a.tau_hat == b.tau_hat);
  CHECK(*a.se == *b.se);
  CHECK(back.e_hat == model.e_hat);
  CHECK(back.feature_names == model.feature_names);

  testing::spit(dir / "bad.json", R"({"format": "something-else", "version": 1})");
  CHECK_THROWS_AS(load(dir / "bad.json"), InputError);
  testing::spit(dir / "broken.json", "{not json");
  CHECK_THROWS_AS(load(dir / "broken.json"), InputError);
  CHECK_THROWS_AS(load(dir / "absent.json"), InputError);
}

TEST_CASE("regression forest") {
  SUBCASE("constant target") {
    const auto d = testing::random_dataset(200, 2, 1);
    std::vector<double> y(200, -1.5);
    RegressionForestParams p;
    p.num_trees = 20;
    const auto f = RegressionForest::fit(d.covariates, y, {}, p);
    for (double v : f.predict(d.covariates)) CHECK(v == -1.5);
  }
  SUBCASE("step function") {
    const auto d = testing::random_dataset(1000, 2, 2);
    std::vector<double> y(1000);
    for (std::size_t i = 0; i < 1000; ++i) y[i] = d.covariates(static_cast<Eigen::Index>(i), 0) > 0 ? 1.0 : 0.0;
    RegressionForestParams p;
    p.num_trees = 50;
    const auto f = RegressionForest::fit(d.covariates, y, {}, p);
    Matrix q(2, 2);
    q << 0.5, 0.0, -0.5, 0.0;
    const auto pred = f.predict(q);
    CHECK(pred[0] > 0.9);
    CHECK(pred[1] < 0.1);
  }
  SUBCASE("shifted target shifts predictions") {
    const auto d = testing::random_dataset(300, 3, 3);
    std::vector<double> y(300), y2(300);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t i = 0; i < 300; ++i) {
      y[i] = z(rng);
      y2[i] = y[i] + 10.0;
    }
    RegressionForestParams p;
    p.num_trees = 30;
    const auto a = RegressionForest::fit(d.covariates, y, {}, p).predict(d.covariates);
    const auto b = RegressionForest::fit(d.covariates, y2, {}, p).predict(d.covariates);
    for (std::size_t i = 0; i < 300; ++i) CHECK(std::abs(b[i] - a[i] - 10.0) < 1e-9);
  }
  SUBCASE("bad parameters") {
    RegressionForestParams p;
    p.mtry = 4;
    CHECK_THROWS_AS(p.validate(3), Error);
    p.mtry = 0;
    p.min_leaf = 0;
    CHECK_THROWS_AS(p.validate(3), Error);
  }
}
