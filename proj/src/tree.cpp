#include "hte/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hte::forest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Sums {
  double a = 0.0;
  double b = 0.0;
  int n = 0;
  int treated = 0;

  void add(const GrowInputs& in, std::size_t i) {
    a += in.numer[i];
    b += in.denom[i];
    ++n;
    if (!in.arm.empty()) treated += in.arm[i];
  }
  int control() const { return n - treated; }
};

double criterion(SplitRule rule, const Sums& left, const Sums& right) {
  if (left.b <= 0.0 || right.b <= 0.0) return kNegInf;
  if (rule == SplitRule::Causal) {
    const double d = left.a / left.b - right.a / right.b;
    const double nl = left.n, nr = right.n;
    return nl * nr / (nl + nr) * d * d;
  }
  return left.a * left.a / left.b + right.a * right.a / right.b;
}

bool meets_minima(const TreeConfig& cfg, const Sums& s) {
  if (cfg.rule == SplitRule::Causal) {
    return s.treated >= cfg.min_leaf_treated && s.control() >= cfg.min_leaf_control;
  }
  return s.n >= cfg.min_leaf;
}

struct Candidate {
  double score = kNegInf;
  int feature = -1;
  double threshold = 0.0;
};

struct Keyed {
  double x;
  std::size_t unit;
};

std::vector<Keyed> sorted_by(const Matrix& X, int feature, const std::vector<std::size_t>& units) {
  std::vector<Keyed> v;
  v.reserve(units.size());
  for (auto i : units) v.push_back({X(static_cast<Eigen::Index>(i), feature), i});
  std::sort(v.begin(), v.end(), [](const Keyed& l, const Keyed& r) { return l.x < r.x; });
  return v;
}

Candidate best_split_on(const GrowInputs& in, const TreeConfig& cfg, int feature,
                        const std::vector<std::size_t>& split_units,
                        const std::vector<std::size_t>& est_units, const Sums& split_total,
                        const Sums& est_total) {
  Candidate best;
  const auto xs = sorted_by(*in.features, feature, split_units);
  const auto xe = sorted_by(*in.features, feature, est_units);

  Sums sl, el;
  std::size_t ep = 0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    sl.add(in, xs[k].unit);
    const double lo = xs[k].x, hi = xs[k + 1].x;
    if (!(lo < hi)) continue;
    double t = lo + 0.5 * (hi - lo);
    if (!(t < hi)) t = lo;
    while (ep < xe.size() && xe[ep].x <= t) el.add(in, xe[ep++].unit);

    const Sums sr{split_total.a - sl.a, split_total.b - sl.b, split_total.n - sl.n,
                  split_total.treated - sl.treated};
    const Sums er{est_total.a - el.a, est_total.b - el.b, est_total.n - el.n,
                  est_total.treated - el.treated};
    if (!meets_minima(cfg, sl) || !meets_minima(cfg, sr) || !meets_minima(cfg, el) ||
        !meets_minima(cfg, er)) {
      continue;
    }
    const double score = criterion(cfg.rule, sl, sr);
    if (score > best.score) best = {score, feature, t};
  }
  return best;
}

Sums total_of(const GrowInputs& in, const std::vector<std::size_t>& units) {
  Sums s;
  for (auto i : units) s.add(in, i);
  return s;
}

}  // namespace

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [k, d] = stack.back();
    stack.pop_back();
    const auto& nd = nodes[static_cast<std::size_t>(k)];
    if (nd.is_leaf()) {
      deepest = std::max(deepest, d);
    } else {
      stack.emplace_back(nd.left, d + 1);
      stack.emplace_back(nd.right, d + 1);
    }
  }
  return deepest;
}

std::size_t Tree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
}

double split_criterion(const GrowInputs& in, SplitRule rule, std::span<const std::size_t> units,
                       int feature, double threshold) {
  Sums l, r;
  for (auto i : units) {
    if ((*in.features)(static_cast<Eigen::Index>(i), feature) <= threshold) {
      l.add(in, i);
    } else {
      r.add(in, i);
    }
  }
  return criterion(rule, l, r);
}

Tree grow_tree(const GrowInputs& in, const TreeConfig& cfg, std::vector<std::size_t> split_units,
               std::vector<std::size_t> estimation_units, Rng& rng) {
  const int p = static_cast<int>(in.features->cols());
  const int mtry = std::clamp(cfg.mtry, 1, p);

  Tree tree;
  tree.split_subsample = split_units;
  tree.estimation_subsample = estimation_units;

  struct Work {
    int node;
    std::vector<std::size_t> split;
    std::vector<std::size_t> est;
  };
  std::vector<Work> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, std::move(split_units), std::move(estimation_units)});

  std::vector<int> features(static_cast<std::size_t>(p));
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();

    const Sums split_total = total_of(in, w.split);
    const Sums est_total = total_of(in, w.est);
    {
      auto& nd = tree.nodes[static_cast<std::size_t>(w.node)];
      nd.value = est_total.b > 0.0 ? est_total.a / est_total.b : 0.0;
      if (cfg.rule == SplitRule::Causal) {
        nd.n_treated = est_total.treated;
        nd.n_control = est_total.control();
      } else {
        nd.n_treated = est_total.n;
        nd.n_control = 0;
      }
    }

    // Partial Fisher-Yates draw of mtry distinct features, scanned in index order.
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < mtry; ++k) {
      std::uniform_int_distribution<int> pick(k, p - 1);
      std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> candidates(features.begin(), features.begin() + mtry);
    std::sort(candidates.begin(), candidates.end());

    Candidate best;
    for (int f : candidates) {
      const auto c = best_split_on(in, cfg, f, w.split, w.est, split_total, est_total);
      if (c.score > best.score) best = c;
    }
    if (best.feature < 0) continue;

    std::vector<std::size_t> sl, sr, el, er;
    const auto& X = *in.features;
    for (auto i : w.split) {
      (X(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? sl : sr).push_back(i);
    }
    for (auto i : w.est) {
      (X(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? el : er).push_back(i);
    }

    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& nd = tree.nodes[static_cast<std::size_t>(w.node)];
    nd.feature = best.feature;
    nd.threshold = best.threshold;
    nd.left = left;
    nd.right = left + 1;
    stack.push_back({left + 1, std::move(sr), std::move(er)});
    stack.push_back({left, std::move(sl), std::move(el)});
  }
  return tree;
}

}  // namespace hte::forest
