#include "hte/forest.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "hte/io.hpp"
#include "hte/rng.hpp"

namespace hte::forest {

namespace {

constexpr int kFormatVersion = 1;

// Stream tags for seed derivation.
constexpr std::uint64_t kHalfSampleStream = 0x4861'6c66ULL << 32;
constexpr std::uint64_t kFoldStream = 0x466f'6c64ULL << 32;
constexpr std::uint64_t kNuisanceStream = 0x4e75'6973ULL << 32;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2))); }

std::uint64_t bits(double x) {
  if (x == 0.0) x = 0.0;  // fold -0.0 onto +0.0
  return std::bit_cast<std::uint64_t>(x);
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

template <typename Row>
double tree_mean(const std::vector<Tree>& trees, const Row& row) {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(row);
  return s / static_cast<double>(trees.size());
}

auto row_accessor(const Matrix& X, Eigen::Index i) {
  return [&X, i](int j) { return X(i, j); };
}

void check_fraction(double v, bool allow_one, const char* name) {
  if (!(v > 0.0) || v > 1.0 || (!allow_one && v >= 1.0)) {
    throw Error(std::string(name) + " must lie in (0," + (allow_one ? "1]" : "1)") + ", got " +
                io::format_double(v));
  }
}

}  // namespace

std::vector<std::uint64_t> unit_keys(const Matrix& X, std::initializer_list<std::span<const double>> extra) {
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (Eigen::Index j = 0; j < X.cols(); ++j) h = mix(h, bits(X(static_cast<Eigen::Index>(i), j)));
    for (auto col : extra) h = mix(h, bits(col[i]));
    keys[i] = h;
  }
  return keys;
}

std::vector<std::size_t> seeded_order(std::span<const std::uint64_t> keys, std::uint64_t seed,
                                      std::span<const std::size_t> pool) {
  struct Ranked {
    std::uint64_t h;
    std::uint64_t key;
    std::size_t unit;
  };
  std::vector<Ranked> r;
  r.reserve(pool.size());
  const std::uint64_t s = splitmix64(seed);
  for (auto i : pool) r.push_back({mix(s, keys[i]), keys[i], i});
  std::sort(r.begin(), r.end(), [](const Ranked& a, const Ranked& b) {
    if (a.h != b.h) return a.h < b.h;
    if (a.key != b.key) return a.key < b.key;
    return a.unit < b.unit;
  });
  std::vector<std::size_t> out;
  out.reserve(r.size());
  for (const auto& x : r) out.push_back(x.unit);
  return out;
}

std::vector<Tree> grow_trees(const GrowInputs& in, const TreeConfig& cfg, const SamplingPlan& plan,
                             std::span<const std::uint64_t> keys) {
  const std::size_t n = keys.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  const std::size_t groups = std::max<std::size_t>(plan.ci_groups, 1);
  std::vector<std::vector<std::size_t>> halves;  // [2*pair] = H, [2*pair+1] = complement
  if (groups >= 2) {
    const std::size_t pairs = (groups + 1) / 2;
    for (std::size_t p = 0; p < pairs; ++p) {
      auto order = seeded_order(keys, derive_seed(plan.seed, kHalfSampleStream + p), all);
      const auto mid = order.begin() + static_cast<std::ptrdiff_t>(n / 2);
      std::vector<std::size_t> h(order.begin(), mid), c(mid, order.end());
      halves.push_back(std::move(h));
      halves.push_back(std::move(c));
    }
  }

  std::vector<Tree> trees(plan.num_trees);
  parallel_for(plan.num_trees, plan.threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(plan.seed, t);
    const std::size_t g = t % groups;
    const std::vector<std::size_t>& pool = groups >= 2 ? halves[g] : all;

    auto s = static_cast<std::size_t>(std::llround(plan.subsample_fraction * static_cast<double>(n)));
    s = std::clamp<std::size_t>(s, std::min<std::size_t>(2, pool.size()), pool.size());
    const auto order = seeded_order(keys, tree_seed, pool);
    auto n_split = static_cast<std::size_t>(std::llround(plan.honesty_fraction * static_cast<double>(s)));
    n_split = std::clamp<std::size_t>(n_split, 1, s - 1);

    std::vector<std::size_t> split(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_split));
    std::vector<std::size_t> est(order.begin() + static_cast<std::ptrdiff_t>(n_split),
                                 order.begin() + static_cast<std::ptrdiff_t>(s));
    std::sort(split.begin(), split.end());
    std::sort(est.begin(), est.end());

    Rng rng(derive_seed(tree_seed, 1));
    trees[t] = grow_tree(in, cfg, std::move(split), std::move(est), rng);
    trees[t].group = static_cast<int>(g);
  });
  return trees;
}

// ---------------------------------------------------------------------------

void RegressionForestParams::validate(std::size_t num_features) const {
  if (num_trees < 1) throw Error("num_trees must be positive");
  check_fraction(subsample_fraction, true, "subsample_fraction");
  check_fraction(honesty_fraction, false, "honesty_fraction");
  if (min_leaf < 1) throw Error("min_leaf must be positive");
  if (mtry < 0 || static_cast<std::size_t>(mtry) > num_features) {
    throw Error("mtry must be in [1, " + std::to_string(num_features) + "] (or 0 for all)");
  }
}

void to_json(nlohmann::json& j, const RegressionForestParams& p) {
  j = nlohmann::json{{"num_trees", p.num_trees},       {"subsample_fraction", p.subsample_fraction},
                     {"honesty_fraction", p.honesty_fraction}, {"min_leaf", p.min_leaf},
                     {"mtry", p.mtry},                 {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, RegressionForestParams& p) {
  RegressionForestParams d;
  p.num_trees = j.value("num_trees", d.num_trees);
  p.subsample_fraction = j.value("subsample_fraction", d.subsample_fraction);
  p.honesty_fraction = j.value("honesty_fraction", d.honesty_fraction);
  p.min_leaf = j.value("min_leaf", d.min_leaf);
  p.mtry = j.value("mtry", d.mtry);
  p.seed = j.value("seed", d.seed);
}

RegressionForest RegressionForest::fit(const Matrix& X, std::span<const double> y,
                                       std::span<const double> weights,
                                       const RegressionForestParams& params) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = static_cast<std::size_t>(X.cols());
  params.validate(p);
  if (y.size() != n) throw Error("regression forest: X has " + std::to_string(n) + " rows, y has " + std::to_string(y.size()));
  if (!weights.empty() && weights.size() != n) throw Error("regression forest: weight length mismatch");
  if (n < 2) throw Error("regression forest needs at least 2 rows");

  std::vector<double> w(n, 1.0);
  if (!weights.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw Error("regression weights must be finite and >= 0");
      w[i] = weights[i];
    }
  }
  std::vector<double> numer(n);
  for (std::size_t i = 0; i < n; ++i) numer[i] = w[i] * y[i];

  // Keys exclude y so a shifted target sees the same subsamples.
  const auto keys = unit_keys(X, {std::span<const double>(w)});
  const GrowInputs in{&X, numer, w, {}};
  TreeConfig cfg;
  cfg.rule = SplitRule::Regression;
  cfg.mtry = params.mtry == 0 ? static_cast<int>(p) : params.mtry;
  cfg.min_leaf = params.min_leaf;

  SamplingPlan plan;
  plan.num_trees = params.num_trees;
  plan.subsample_fraction = params.subsample_fraction;
  plan.honesty_fraction = params.honesty_fraction;
  plan.seed = params.seed;
  plan.threads = params.threads;

  RegressionForest rf;
  rf.trees_ = grow_trees(in, cfg, plan, keys);
  rf.num_features_ = p;
  return rf;
}

std::vector<double> RegressionForest::predict(const Matrix& X) const {
  if (trees_.empty()) throw Error("regression forest is not fitted");
  if (static_cast<std::size_t>(X.cols()) != num_features_) {
    throw Error("regression forest expects " + std::to_string(num_features_) + " features, got " +
                std::to_string(X.cols()));
  }
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = tree_mean(trees_, row_accessor(X, i));
  return out;
}

// ---------------------------------------------------------------------------

void ForestParams::validate(std::size_t num_features) const {
  if (num_trees < 1) throw Error("num_trees must be positive");
  check_fraction(subsample_fraction, true, "subsample_fraction");
  check_fraction(honesty_fraction, false, "honesty_fraction");
  if (min_leaf_treated < 1 || min_leaf_control < 1) throw Error("leaf minima must be positive");
  if (mtry < 0 || static_cast<std::size_t>(mtry) > num_features) {
    throw Error("mtry must be in [1, " + std::to_string(num_features) + "] (or 0 for sqrt(p))");
  }
  if (num_folds_nuisance < 2) throw Error("num_folds_nuisance must be >= 2");
  if (nuisance_min_leaf < 1) throw Error("nuisance_min_leaf must be positive");
}

int ForestParams::effective_mtry(std::size_t num_features) const {
  if (mtry > 0) return mtry;
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_features))));
}

std::size_t ForestParams::effective_nuisance_trees() const {
  return nuisance_trees > 0 ? nuisance_trees : std::max<std::size_t>(50, num_trees / 4);
}

void to_json(nlohmann::json& j, const ForestParams& p) {
  j = nlohmann::json{{"num_trees", p.num_trees},
                     {"subsample_fraction", p.subsample_fraction},
                     {"honesty_fraction", p.honesty_fraction},
                     {"min_leaf_treated", p.min_leaf_treated},
                     {"min_leaf_control", p.min_leaf_control},
                     {"mtry", p.mtry},
                     {"num_folds_nuisance", p.num_folds_nuisance},
                     {"ci_groups", p.ci_groups},
                     {"nuisance_trees", p.nuisance_trees},
                     {"nuisance_min_leaf", p.nuisance_min_leaf},
                     {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, ForestParams& p) {
  ForestParams d;
  p.num_trees = j.value("num_trees", d.num_trees);
  p.subsample_fraction = j.value("subsample_fraction", d.subsample_fraction);
  p.honesty_fraction = j.value("honesty_fraction", d.honesty_fraction);
  p.min_leaf_treated = j.value("min_leaf_treated", d.min_leaf_treated);
  p.min_leaf_control = j.value("min_leaf_control", d.min_leaf_control);
  p.mtry = j.value("mtry", d.mtry);
  p.num_folds_nuisance = j.value("num_folds_nuisance", d.num_folds_nuisance);
  p.ci_groups = j.value("ci_groups", d.ci_groups);
  p.nuisance_trees = j.value("nuisance_trees", d.nuisance_trees);
  p.nuisance_min_leaf = j.value("nuisance_min_leaf", d.nuisance_min_leaf);
  p.seed = j.value("seed", d.seed);
}

std::vector<int> assign_folds(std::span<const std::uint64_t> keys, int k, std::uint64_t seed) {
  if (k < 2) throw Error("need at least 2 folds");
  std::vector<std::size_t> all(keys.size());
  std::iota(all.begin(), all.end(), 0);
  const auto order = seeded_order(keys, seed, all);
  std::vector<int> fold(keys.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold[order[r]] = static_cast<int>(r % static_cast<std::size_t>(k));
  return fold;
}

Nuisance fit_nuisance(const Dataset& data, const ForestParams& params) {
  data.validate();
  params.validate(data.num_covariates());
  const std::size_t n = data.size();
  const int K = params.num_folds_nuisance;
  if (n < static_cast<std::size_t>(4 * K)) {
    throw Error("nuisance cross-fitting needs n >= 4*folds (" + std::to_string(4 * K) + "), got " + std::to_string(n));
  }

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = data.treatment[i];
  const auto keys = unit_keys(data.covariates, {std::span<const double>(w), data.outcome});

  Nuisance out;
  out.fold = assign_folds(keys, K, derive_seed(params.seed, kFoldStream));
  out.m_hat.assign(n, 0.0);
  out.e_hat.assign(n, 0.0);

  for (int k = 0; k < K; ++k) {
    std::vector<std::size_t> train, test;
    int treated_test = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.fold[i] == k) {
        test.push_back(i);
        treated_test += data.treatment[i];
      } else {
        train.push_back(i);
      }
    }
    if (treated_test == 0 || treated_test == static_cast<int>(test.size())) {
      throw Error("cross-fitting fold " + std::to_string(k) +
                  " contains a single treatment arm; use fewer folds");
    }
    const Dataset tr = data.select(train);
    const Dataset te = data.select(test);
    std::vector<double> tr_w(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) tr_w[i] = tr.treatment[i];

    RegressionForestParams rp;
    rp.num_trees = params.effective_nuisance_trees();
    rp.min_leaf = params.nuisance_min_leaf;
    rp.threads = params.threads;
    rp.seed = derive_seed(params.seed, kNuisanceStream + static_cast<std::uint64_t>(2 * k));
    const auto m_fit = RegressionForest::fit(tr.covariates, tr.outcome, {}, rp);
    rp.seed = derive_seed(params.seed, kNuisanceStream + static_cast<std::uint64_t>(2 * k + 1));
    const auto e_fit = RegressionForest::fit(tr.covariates, tr_w, {}, rp);

    const auto m_pred = m_fit.predict(te.covariates);
    const auto e_pred = e_fit.predict(te.covariates);
    for (std::size_t r = 0; r < test.size(); ++r) {
      out.m_hat[test[r]] = m_pred[r];
      out.e_hat[test[r]] = std::clamp(e_pred[r], kPropensityClip, 1.0 - kPropensityClip);
    }
  }
  return out;
}

CausalForest grow(const Dataset& data, const ForestParams& params) {
  data.validate();
  params.validate(data.num_covariates());
  if (data.size() < 50) throw Error("causal forest needs n >= 50, got " + std::to_string(data.size()));
  if (data.num_treated() == 0 || data.num_control() == 0) throw Error("both treatment arms must be nonempty");
  return grow(data, params, fit_nuisance(data, params));
}

CausalForest grow(const Dataset& data, const ForestParams& params, Nuisance nuisance) {
  data.validate();
  params.validate(data.num_covariates());
  const std::size_t n = data.size();
  if (n < 50) throw Error("causal forest needs n >= 50, got " + std::to_string(n));
  if (data.num_treated() == 0 || data.num_control() == 0) throw Error("both treatment arms must be nonempty");
  if (nuisance.m_hat.size() != n || nuisance.e_hat.size() != n) throw Error("nuisance vectors must have length n");

  std::vector<double> numer(n), denom(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    nuisance.e_hat[i] = std::clamp(nuisance.e_hat[i], kPropensityClip, 1.0 - kPropensityClip);
    w[i] = data.treatment[i];
    const double wt = w[i] - nuisance.e_hat[i];
    const double yt = data.outcome[i] - nuisance.m_hat[i];
    numer[i] = wt * yt;
    denom[i] = wt * wt;
  }
  const auto keys = unit_keys(data.covariates, {std::span<const double>(w), data.outcome});
  const GrowInputs in{&data.covariates, numer, denom, data.treatment};

  TreeConfig cfg;
  cfg.rule = SplitRule::Causal;
  cfg.mtry = params.effective_mtry(data.num_covariates());
  cfg.min_leaf_treated = params.min_leaf_treated;
  cfg.min_leaf_control = params.min_leaf_control;

  SamplingPlan plan;
  plan.num_trees = params.num_trees;
  plan.subsample_fraction = params.subsample_fraction;
  plan.honesty_fraction = params.honesty_fraction;
  plan.ci_groups = params.ci_groups;
  plan.seed = params.seed;
  plan.threads = params.threads;

  CausalForest model;
  model.trees = grow_trees(in, cfg, plan, keys);
  model.m_hat = std::move(nuisance.m_hat);
  model.e_hat = std::move(nuisance.e_hat);
  model.params = params;
  model.feature_names = data.covariate_names;
  return model;
}

double debiased_variance(double between, double noise, std::size_t groups) {
  const double estimate = between - noise;
  const double scale = std::max(between, noise) * std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(groups, 1)));
  if (!(scale > 0.0)) return std::max(estimate, 0.0);
  const double ratio = estimate / scale;
  const double tail = 0.5 * std::erfc(-ratio / std::sqrt(2.0));
  const double density = std::exp(-0.5 * ratio * ratio) / std::sqrt(2.0 * M_PI);
  // Mills-ratio asymptote when the normal tail underflows.
  const double correction = tail > 1e-300 ? scale * density / tail : -estimate + scale / -ratio;
  return std::max(estimate + correction, 0.0);
}

CateEstimates predict(const CausalForest& model, const Matrix& rows) {
  if (!model.fitted()) throw Error("causal forest is not fitted");
  const auto p = static_cast<Eigen::Index>(model.feature_names.size());
  if (rows.cols() != p) {
    throw Error("causal forest expects " + std::to_string(p) + " features, got " + std::to_string(rows.cols()));
  }

  std::size_t groups = 1;
  for (const auto& t : model.trees) groups = std::max<std::size_t>(groups, static_cast<std::size_t>(t.group) + 1);
  const bool with_se = groups >= 2;

  CateEstimates est;
  est.method = "causal_forest";
  const auto n = static_cast<std::size_t>(rows.rows());
  est.tau_hat.resize(n);
  std::vector<double> se(with_se ? n : 0);

  std::vector<double> gsum(groups), gsq(groups);
  std::vector<std::size_t> gcount(groups);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(gsum.begin(), gsum.end(), 0.0);
    std::fill(gsq.begin(), gsq.end(), 0.0);
    std::fill(gcount.begin(), gcount.end(), 0);
    double total = 0.0;
    const auto row = row_accessor(rows, static_cast<Eigen::Index>(i));
    for (const auto& t : model.trees) {
      const double v = t.predict(row);
      total += v;
      const auto g = static_cast<std::size_t>(t.group);
      gsum[g] += v;
      gsq[g] += v * v;
      ++gcount[g];
    }
    const double mean = total / static_cast<double>(model.trees.size());
    est.tau_hat[i] = mean;
    if (!with_se) continue;

    double between = 0.0, noise = 0.0;
    std::size_t used = 0;
    for (std::size_t g = 0; g < groups; ++g) {
      if (gcount[g] == 0) continue;
      const double L = static_cast<double>(gcount[g]);
      const double gm = gsum[g] / L;
      between += (gm - mean) * (gm - mean);
      if (gcount[g] >= 2) {
        const double within = std::max(gsq[g] - L * gm * gm, 0.0) / (L - 1.0);
        noise += within / L;
      }
      ++used;
    }
    between /= static_cast<double>(used);
    noise /= static_cast<double>(used);
    se[i] = std::sqrt(debiased_variance(between, noise, used));
  }
  if (with_se) est.se = std::move(se);
  return est;
}

std::vector<std::pair<std::string, double>> variable_importance(const CausalForest& model, double decay) {
  const std::size_t p = model.feature_names.size();
  std::vector<double> weight(p, 0.0);
  for (const auto& t : model.trees) {
    if (t.nodes.empty()) continue;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [k, d] = stack.back();
      stack.pop_back();
      const auto& nd = t.nodes[static_cast<std::size_t>(k)];
      if (nd.is_leaf()) continue;
      weight[static_cast<std::size_t>(nd.feature)] += std::pow(decay, d);
      stack.emplace_back(nd.left, d + 1);
      stack.emplace_back(nd.right, d + 1);
    }
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t j = 0; j < p; ++j) {
    out.emplace_back(model.feature_names[j], total > 0.0 ? weight[j] / total : 1.0 / static_cast<double>(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const CausalForest& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes) {
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value, nd.n_treated, nd.n_control});
    }
    trees.push_back({{"group", t.group},
                     {"nodes", std::move(nodes)},
                     {"split_subsample", t.split_subsample},
                     {"estimation_subsample", t.estimation_subsample}});
  }
  return {{"format", "hte-causal-forest"},
          {"version", kFormatVersion},
          {"params", model.params},
          {"feature_names", model.feature_names},
          {"m_hat", model.m_hat},
          {"e_hat", model.e_hat},
          {"trees", std::move(trees)}};
}

CausalForest causal_forest_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "hte-causal-forest") throw InputError("not a causal forest file");
  const int version = j.at("version").get<int>();
  if (version != kFormatVersion) throw InputError("unsupported causal forest format version " + std::to_string(version));
  CausalForest m;
  m.params = j.at("params").get<ForestParams>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.m_hat = j.at("m_hat").get<std::vector<double>>();
  m.e_hat = j.at("e_hat").get<std::vector<double>>();
  const auto p = static_cast<int>(m.feature_names.size());
  for (const auto& jt : j.at("trees")) {
    Tree t;
    t.group = jt.at("group").get<int>();
    t.split_subsample = jt.at("split_subsample").get<std::vector<std::size_t>>();
    t.estimation_subsample = jt.at("estimation_subsample").get<std::vector<std::size_t>>();
    for (const auto& jn : jt.at("nodes")) {
      Node nd;
      nd.feature = jn.at(0).get<int>();
      nd.threshold = jn.at(1).get<double>();
      nd.left = jn.at(2).get<int>();
      nd.right = jn.at(3).get<int>();
      nd.value = jn.at(4).get<double>();
      nd.n_treated = jn.at(5).get<int>();
      nd.n_control = jn.at(6).get<int>();
      t.nodes.push_back(nd);
    }
    const int count = static_cast<int>(t.nodes.size());
    for (const auto& nd : t.nodes) {
      if (nd.feature >= p || (!nd.is_leaf() && (nd.left <= 0 || nd.left >= count || nd.right <= 0 || nd.right >= count))) {
        throw InputError("corrupt tree in causal forest file");
      }
    }
    if (t.nodes.empty() || t.group < 0) throw InputError("corrupt tree in causal forest file");
    m.trees.push_back(std::move(t));
  }
  return m;
}

void save(const CausalForest& model, const std::filesystem::path& path) {
  io::write_atomic(path, to_json(model).dump());
}

CausalForest load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid forest file '" + path.string() + "': " + e.what());
  }
  return causal_forest_from_json(j);
}

}  // namespace hte::forest
