#include "hte/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hte/dgp.hpp"
#include "hte/io.hpp"

namespace hte::eval {

namespace {

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

bool MethodReport::identity_holds() const {
  return std::abs(mse - (bias * bias + variance)) <= 1e-8 + 1e-6 * mse;
}

MethodReport bias_variance_mse(const CateEstimates& estimates, std::span<const double> truth) {
  const auto n = truth.size();
  if (estimates.tau_hat.size() != n) {
    throw Error("length mismatch: " + std::to_string(estimates.tau_hat.size()) + " estimates vs " +
                std::to_string(n) + " true values");
  }
  if (n < 2) throw Error("bias/variance decomposition needs at least 2 units");
  std::vector<double> err(n);
  for (std::size_t i = 0; i < n; ++i) err[i] = estimates.tau_hat[i] - truth[i];
  const double mean = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(n);
  double var = 0.0, sq = 0.0;
  for (double e : err) {
    var += (e - mean) * (e - mean);
    sq += e * e;
  }
  MethodReport r;
  r.method = estimates.method;
  r.bias = std::abs(mean);
  r.variance = var / static_cast<double>(n);
  r.mse = sq / static_cast<double>(n);
  return r;
}

std::string SubgroupRow::label() const {
  return std::string(minority ? "Minority" : "Non-Minority") + ", " + (female ? "Female" : "Male") + ", " +
         (high_income ? "High Income" : "Low Income");
}

const SubgroupRow& SubgroupReport::row(int minority, int female, int high_income) const {
  for (const auto& r : rows) {
    if (r.minority == minority && r.female == female && r.high_income == high_income) return r;
  }
  throw Error("no such subgroup");
}

SubgroupReport subgroup_report(const Dataset& data, std::span<const double> truth,
                               const std::vector<CateEstimates>& estimates) {
  const std::size_t n = data.size();
  if (truth.size() != n) throw Error("truth length does not match the dataset");
  for (const auto& e : estimates) {
    if (e.tau_hat.size() != n) throw Error("estimates for '" + e.method + "' do not match the dataset length");
  }
  const auto ci = data.column("income");
  const auto cm = data.column("minority");
  const auto cf = data.column("female");
  std::vector<double> income(n);
  for (std::size_t i = 0; i < n; ++i) income[i] = data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ci));
  const double med = dgp::median(income);

  // Cell order: the +5 cell first, then the remaining minority cells, then non-minority.
  const int order[8][3] = {{1, 1, 1}, {1, 0, 1}, {1, 1, 0}, {0, 1, 1}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {0, 0, 0}};
  auto cell_of = [&](std::size_t i) {
    const int m = data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cm)) == 1.0;
    const int f = data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cf)) == 1.0;
    const int h = income[i] > med;
    return std::array<int, 3>{m, f, h};
  };

  SubgroupReport rep;
  for (const auto& e : estimates) rep.methods.push_back(e.method);
  for (const auto& o : order) {
    SubgroupRow row;
    row.minority = o[0];
    row.female = o[1];
    row.high_income = o[2];
    double t = 0.0;
    std::vector<double> sums(estimates.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = cell_of(i);
      if (c[0] != o[0] || c[1] != o[1] || c[2] != o[2]) continue;
      ++row.n;
      t += truth[i];
      for (std::size_t k = 0; k < estimates.size(); ++k) sums[k] += estimates[k].tau_hat[i];
    }
    if (row.n == 0) throw Error("subgroup '" + row.label() + "' is empty");
    row.true_mean = t / static_cast<double>(row.n);
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      const double m = sums[k] / static_cast<double>(row.n);
      row.estimate_mean[estimates[k].method] = m;
      row.bias[estimates[k].method] = m - row.true_mean;
    }
    rep.rows.push_back(std::move(row));
  }
  for (const auto& m : rep.methods) {
    double s = 0.0;
    for (const auto& r : rep.rows) s += std::abs(r.bias.at(m));
    rep.mean_absolute_bias[m] = s / static_cast<double>(rep.rows.size());
  }
  return rep;
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0,1)");
  if (level == 0.95) return kZ95;
  // Solve erfc(z / sqrt 2) = 1 - level by bisection.
  const double target = 1.0 - level;
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double coverage(const CateEstimates& estimates, std::span<const double> truth, double level) {
  if (!estimates.se) throw Error("coverage requires standard errors; '" + estimates.method + "' has none");
  const auto& se = *estimates.se;
  const auto n = truth.size();
  if (estimates.tau_hat.size() != n || se.size() != n) throw Error("coverage: length mismatch");
  if (n == 0) throw Error("coverage of an empty vector");
  const double z = normal_critical_value(level);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(se[i] >= 0.0)) throw Error("standard errors must be nonnegative");
    const double half = z * se[i];
    hit += (truth[i] >= estimates.tau_hat[i] - half && truth[i] <= estimates.tau_hat[i] + half);
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

OverlapDiagnostic overlap_check(std::span<const double> propensity, double epsilon) {
  OverlapDiagnostic d;
  d.epsilon = epsilon;
  d.n = propensity.size();
  if (propensity.empty()) return d;
  d.min = *std::min_element(propensity.begin(), propensity.end());
  d.max = *std::max_element(propensity.begin(), propensity.end());
  for (double e : propensity) {
    if (!std::isfinite(e)) throw Error("propensity values must be finite");
    d.violations += (e < epsilon || e > 1.0 - epsilon);
  }
  return d;
}

// ---------------------------------------------------------------------------

std::string Table::csv() const { return io::to_csv({header, rows}); }

std::string Table::markdown() const {
  std::vector<std::size_t> width(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) width[j] = std::max<std::size_t>(3, header[j].size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size() && j < width.size(); ++j) width[j] = std::max(width[j], r[j].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (std::size_t j = 0; j < width.size(); ++j) {
      const std::string c = j < cells.size() ? cells[j] : "";
      s += " " + c + std::string(width[j] - c.size(), ' ') + " |";
    }
    return s + "\n";
  };
  std::string out = line(header);
  out += "|";
  for (auto w : width) out += std::string(w + 2, '-') + "|";
  out += "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

Table method_table(const std::vector<std::pair<std::string, MethodReport>>& reports) {
  Table t;
  t.header = {"scenario", "method", "bias", "variance", "mse"};
  for (const auto& [scenario, r] : reports) {
    t.rows.push_back({scenario, r.method, fixed(r.bias), fixed(r.variance), fixed(r.mse)});
  }
  return t;
}

Table subgroup_table(const SubgroupReport& report) {
  Table t;
  t.header = {"subgroup", "n", "true"};
  for (const auto& m : report.methods) t.header.push_back(m);
  for (const auto& m : report.methods) t.header.push_back(m + "_bias");
  for (const auto& r : report.rows) {
    std::vector<std::string> cells = {r.label(), std::to_string(r.n), fixed(r.true_mean, 2)};
    for (const auto& m : report.methods) cells.push_back(fixed(r.estimate_mean.at(m), 2));
    for (const auto& m : report.methods) cells.push_back(fixed(r.bias.at(m), 2));
    t.rows.push_back(std::move(cells));
  }
  std::vector<std::string> footer = {"Mean Absolute Bias", "", ""};
  for (std::size_t k = 0; k < report.methods.size(); ++k) footer.emplace_back();
  for (const auto& m : report.methods) footer.push_back(fixed(report.mean_absolute_bias.at(m), 2));
  t.rows.push_back(std::move(footer));
  return t;
}

std::vector<std::filesystem::path> emit_figure_data(const std::vector<RunResults>& runs,
                                                    const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  std::vector<std::string> methods;
  for (const auto& run : runs) {
    for (const auto& e : run.estimates) {
      if (std::find(methods.begin(), methods.end(), e.method) == methods.end()) methods.push_back(e.method);
    }
  }
  for (const auto& m : methods) {
    bool with_se = true;
    for (const auto& run : runs) {
      for (const auto& e : run.estimates) {
        if (e.method == m) with_se = with_se && e.se.has_value();
      }
    }
    Table t;
    t.header = {"scenario", "unit_id", "tau_true", "tau_hat"};
    if (with_se) t.header.push_back("se");
    for (const auto& run : runs) {
      for (const auto& e : run.estimates) {
        if (e.method != m) continue;
        if (e.tau_hat.size() != run.tau_true.size()) throw Error("scatter data length mismatch for '" + m + "'");
        for (std::size_t i = 0; i < e.tau_hat.size(); ++i) {
          t.rows.push_back({run.scenario, std::to_string(i), io::format_double(run.tau_true[i]),
                            io::format_double(e.tau_hat[i])});
          if (with_se) t.rows.back().push_back(io::format_double((*e.se)[i]));
        }
      }
    }
    written.push_back(dir / ("scatter_" + m + ".csv"));
    io::write_atomic(written.back(), t.csv());
  }

  Table imp;
  imp.header = {"scenario", "feature", "importance"};
  bool any_importance = false;
  for (const auto& run : runs) {
    for (const auto& [name, w] : run.importance) {
      imp.rows.push_back({run.scenario, name, io::format_double(w)});
      any_importance = true;
    }
  }
  if (any_importance) {
    written.push_back(dir / "importance.csv");
    io::write_atomic(written.back(), imp.csv());
  }

  Table sub;
  bool any_subgroups = false;
  for (const auto& run : runs) {
    if (!run.subgroups) continue;
    if (!any_subgroups) {
      sub.header = {"scenario", "minority", "female", "high_income", "n", "true"};
      for (const auto& m : run.subgroups->methods) sub.header.push_back(m);
    }
    any_subgroups = true;
    for (const auto& r : run.subgroups->rows) {
      std::vector<std::string> cells = {run.scenario, std::to_string(r.minority), std::to_string(r.female),
                                        std::to_string(r.high_income), std::to_string(r.n),
                                        io::format_double(r.true_mean)};
      for (const auto& m : run.subgroups->methods) cells.push_back(io::format_double(r.estimate_mean.at(m)));
      sub.rows.push_back(std::move(cells));
    }
  }
  if (any_subgroups) {
    written.push_back(dir / "subgroups.csv");
    io::write_atomic(written.back(), sub.csv());
  }
  return written;
}

}  // namespace hte::eval
