#include "hte/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "hte/eval.hpp"
#include "hte/interaction.hpp"
#include "hte/io.hpp"
#include "hte/metalearners.hpp"
#include "hte/rng.hpp"
#include "hte/scm.hpp"

namespace hte::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kForestStream = 1;
constexpr std::uint64_t kLearnerStream = 2;
constexpr std::uint64_t kScenarioStream = 1000;

std::string_view command_name(Command c) {
  switch (c) {
    case Command::Replicate:
      return "replicate";
    case Command::Simulate:
      return "simulate";
    case Command::Fit:
      return "fit";
  }
  return "?";
}

bool is_meta(const std::string& m) { return m == "s" || m == "t" || m == "x" || m == "r" || m == "dr"; }

bool wants(const RunConfig& c, std::string_view method) {
  return std::find(c.methods.begin(), c.methods.end(), method) != c.methods.end();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> string_list(const json& v, const char* key) {
  if (v.is_string()) return split_list(v.get<std::string>());
  if (!v.is_array()) throw InputError(std::string("config key '") + key + "' must be a list or a comma-separated string");
  return v.get<std::vector<std::string>>();
}

long long integer(const json& v, const char* key, long long min) {
  if (!v.is_number_integer()) throw InputError(std::string("config key '") + key + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < min) throw InputError(std::string("config key '") + key + "' must be >= " + std::to_string(min));
  return x;
}

void apply_json(RunConfig& c, const json& j) {
  static const std::set<std::string> known = {
      "scenario", "n",    "noise_sd", "seed", "methods", "forest",    "trees",  "mtry",     "folds",   "learners",
      "out",      "dump_data", "threads", "data", "treatment", "outcome", "covariates", "save_forest"};
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw InputError("unknown config key '" + key + "'");
  }
  try {
    if (j.contains("scenario")) c.scenario = dgp::parse_kind(j.at("scenario").get<std::string>());
    if (j.contains("n")) c.n = static_cast<std::size_t>(integer(j.at("n"), "n", 2));
    if (j.contains("noise_sd")) c.noise_sd = j.at("noise_sd").get<double>();
    if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(integer(j.at("seed"), "seed", 0));
    if (j.contains("methods")) c.methods = string_list(j.at("methods"), "methods");
    if (j.contains("forest")) {
      if (!j.at("forest").is_object()) throw InputError("config key 'forest' must be an object");
      c.forest = j.at("forest").get<forest::ForestParams>();
      if (j.at("forest").contains("num_folds_nuisance")) c.folds = c.forest.num_folds_nuisance;
      if (j.at("forest").contains("mtry")) c.mtry = c.forest.mtry;
    }
    if (j.contains("mtry")) c.mtry = static_cast<int>(integer(j.at("mtry"), "mtry", 0));
    if (j.contains("trees")) c.forest.num_trees = static_cast<std::size_t>(integer(j.at("trees"), "trees", 1));
    if (j.contains("folds")) c.folds = static_cast<int>(integer(j.at("folds"), "folds", 2));
    if (j.contains("learners")) {
      const auto& l = j.at("learners");
      if (!l.is_object()) throw InputError("config key 'learners' must be an object");
      for (const auto& [key, value] : l.items()) {
        if (key != "oracle" && key != "ridge" && key != "forest") {
          throw InputError("unknown config key 'learners." + key + "'");
        }
      }
      c.learner_oracle = l.value("oracle", c.learner_oracle);
      c.learner_ridge = l.value("ridge", c.learner_ridge);
      if (l.contains("forest")) c.learner_forest = l.at("forest").get<forest::RegressionForestParams>();
    }
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("dump_data")) c.dump_data = j.at("dump_data").get<bool>();
    if (j.contains("threads")) c.threads = static_cast<unsigned>(integer(j.at("threads"), "threads", 1));
    if (j.contains("data")) c.data = j.at("data").get<std::string>();
    if (j.contains("treatment")) c.treatment = j.at("treatment").get<std::string>();
    if (j.contains("outcome")) c.outcome = j.at("outcome").get<std::string>();
    if (j.contains("covariates")) c.covariates = string_list(j.at("covariates"), "covariates");
    if (j.contains("save_forest")) c.save_forest = j.at("save_forest").get<std::string>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json overlap_json(const eval::OverlapDiagnostic& d) {
  return {{"min", d.min},
          {"max", d.max},
          {"epsilon", d.epsilon},
          {"violations", d.violations},
          {"violation_fraction", d.violation_fraction()}};
}

json importance_json(const std::vector<std::pair<std::string, double>>& imp) {
  json j = json::array();
  for (const auto& [name, w] : imp) j.push_back({{"feature", name}, {"importance", w}});
  return j;
}

// ---------------------------------------------------------------------------

struct MethodRun {
  std::vector<CateEstimates> estimates;  ///< in requested method order
  std::optional<forest::CausalForest> forest;
  std::vector<std::pair<std::string, double>> importance;
};

MethodRun estimate(const Dataset& data, const RunConfig& c, std::ostream& log) {
  std::map<std::string, CateEstimates> by_method;
  std::vector<meta::LearnerConfig> learners;
  MethodRun run;
  for (const auto& m : c.methods) {
    if (m == "ols") {
      log << "  fitting ols\n";
      const auto model = interaction::fit(data, interaction::DesignSpec::saturated(data.covariate_names));
      CateEstimates e;
      e.method = "ols";
      e.tau_hat = interaction::predict_cate(model, data);
      e.ate = mean(e.tau_hat);
      by_method.emplace(m, std::move(e));
    } else if (m == "causal_forest") {
      log << "  growing causal forest (" << c.forest.num_trees << " trees)\n";
      auto params = c.effective_forest(data.num_covariates());
      params.threads = c.threads;
      auto cf = forest::grow(data, params);
      auto e = forest::predict(cf, data.covariates);
      e.ate = mean(e.tau_hat);
      run.importance = forest::variable_importance(cf);
      run.forest = std::move(cf);
      by_method.emplace(m, std::move(e));
    } else {
      meta::LearnerConfig lc;
      lc.method = m;
      lc.oracle = c.learner_oracle;
      lc.folds = c.folds;
      lc.ridge = c.learner_ridge;
      lc.forest = c.learner_forest;
      lc.forest.threads = c.threads;
      learners.push_back(std::move(lc));
    }
  }
  if (!learners.empty()) {
    log << "  fitting meta-learners\n";
    for (auto& e : meta::run_learners(data, learners, derive_seed(c.seed, kLearnerStream))) {
      if (!e.ate) e.ate = mean(e.tau_hat);
      by_method.emplace(e.method, std::move(e));
    }
  }
  for (const auto& m : c.methods) run.estimates.push_back(std::move(by_method.at(m)));
  return run;
}

struct ScenarioRun {
  dgp::ScenarioKind kind{};
  std::uint64_t data_seed = 0;
  Dataset data;
  GroundTruth truth;
  MethodRun methods;
  std::vector<eval::MethodReport> reports;
  std::optional<eval::SubgroupReport> subgroups;
};

ScenarioRun run_scenario(dgp::ScenarioKind kind, const RunConfig& c, bool require_subgroups, std::ostream& log) {
  ScenarioRun r;
  r.kind = kind;
  r.data_seed = scenario_seed(c.seed, kind);
  log << "scenario " << dgp::to_string(kind) << " (n=" << c.n << ")\n";
  auto generated = dgp::generate({kind, c.n, r.data_seed, c.noise_sd});
  r.data = std::move(generated.first);
  r.truth = std::move(generated.second);
  r.methods = estimate(r.data, c, log);
  for (const auto& e : r.methods.estimates) {
    auto rep = eval::bias_variance_mse(e, r.truth.tau_true);
    if (!rep.identity_holds()) throw Error("bias/variance identity failed for '" + e.method + "'");
    r.reports.push_back(std::move(rep));
  }
  try {
    r.subgroups = eval::subgroup_report(r.data, r.truth.tau_true, r.methods.estimates);
  } catch (const Error& e) {
    if (require_subgroups) throw;
    log << "  skipping subgroup report: " << e.what() << "\n";
  }
  return r;
}

json scenario_json(const ScenarioRun& r) {
  json j;
  j["scenario"] = dgp::to_string(r.kind);
  j["n"] = r.data.size();
  j["data_seed"] = r.data_seed;
  j["ate_true"] = mean(r.truth.tau_true);
  j["true_propensity_overlap"] = overlap_json(eval::overlap_check(r.truth.propensity));
  json methods = json::array();
  for (std::size_t k = 0; k < r.reports.size(); ++k) {
    const auto& rep = r.reports[k];
    const auto& est = r.methods.estimates[k];
    methods.push_back({{"method", rep.method},
                       {"bias", rep.bias},
                       {"variance", rep.variance},
                       {"mse", rep.mse},
                       {"ate", est.ate.value_or(mean(est.tau_hat))}});
  }
  j["methods"] = std::move(methods);
  for (const auto& est : r.methods.estimates) {
    if (est.method != "causal_forest" || !est.se) continue;
    std::vector<double> se = *est.se;
    const double med = dgp::median(se);
    j["causal_forest"] = {{"coverage_95", eval::coverage(est, r.truth.tau_true)},
                          {"median_ci_width", 2.0 * eval::kZ95 * med},
                          {"e_hat_overlap", overlap_json(eval::overlap_check(r.methods.forest->e_hat))},
                          {"importance", importance_json(r.methods.importance)}};
  }
  if (r.subgroups) {
    json rows = json::array();
    for (const auto& row : r.subgroups->rows) {
      rows.push_back({{"minority", row.minority},
                      {"female", row.female},
                      {"high_income", row.high_income},
                      {"n", row.n},
                      {"true_mean", row.true_mean},
                      {"estimate_mean", row.estimate_mean},
                      {"bias", row.bias}});
    }
    j["subgroups"] = {{"rows", std::move(rows)}, {"mean_absolute_bias", r.subgroups->mean_absolute_bias}};
  }
  return j;
}

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  void write(const std::string& name, std::string_view contents) {
    io::write_atomic(dir_ / name, contents);
    written_.push_back(dir_ / name);
  }
  void adopt(std::vector<fs::path> paths) {
    for (auto& p : paths) written_.push_back(std::move(p));
  }
  const fs::path& dir() const { return dir_; }
  const std::vector<fs::path>& written() const { return written_; }

  /// Relative names of everything written so far, sorted.
  json manifest() const {
    std::vector<std::string> names;
    for (const auto& p : written_) names.push_back(p.filename().string());
    std::sort(names.begin(), names.end());
    return names;
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

void write_tables(OutputDir& out, const std::vector<const ScenarioRun*>& runs, const ScenarioRun* subgroup_run) {
  std::vector<std::pair<std::string, eval::MethodReport>> reports;
  for (const auto* r : runs) {
    for (const auto& rep : r->reports) reports.emplace_back(std::string(dgp::to_string(r->kind)), rep);
  }
  const auto t2 = eval::method_table(reports);
  out.write("table2.csv", t2.csv());
  out.write("table2.md", t2.markdown());
  if (subgroup_run && subgroup_run->subgroups) {
    const auto t3 = eval::subgroup_table(*subgroup_run->subgroups);
    out.write("table3.csv", t3.csv());
    out.write("table3.md", t3.markdown());
  }
}

eval::RunResults figure_run(const ScenarioRun& r, bool with_extras) {
  eval::RunResults f;
  f.scenario = dgp::to_string(r.kind);
  f.tau_true = r.truth.tau_true;
  f.estimates = r.methods.estimates;
  if (with_extras) {
    f.importance = r.methods.importance;
    f.subgroups = r.subgroups;
  }
  return f;
}

void write_summary(OutputDir& out, const RunConfig& c, std::size_t num_features, json results) {
  json s;
  s["command"] = command_name(c.command);
  s["seed"] = c.seed;
  s["config"] = c.to_json(num_features);
  s["results"] = std::move(results);
  auto files = out.manifest();
  files.push_back("summary.json");
  s["files"] = std::move(files);
  out.write("summary.json", s.dump(2) + "\n");
}

std::vector<fs::path> replicate(const RunConfig& c, std::ostream& log) {
  OutputDir out(c.out);
  std::vector<ScenarioRun> runs;
  for (auto kind : dgp::kAllScenarios) {
    runs.push_back(run_scenario(kind, c, kind == dgp::ScenarioKind::ComplexNonlinear, log));
  }
  const ScenarioRun* complex = nullptr;
  std::vector<const ScenarioRun*> ptrs;
  for (const auto& r : runs) {
    ptrs.push_back(&r);
    if (r.kind == dgp::ScenarioKind::ComplexNonlinear) complex = &r;
  }
  write_tables(out, ptrs, complex);
  std::vector<eval::RunResults> figures;
  for (const auto& r : runs) figures.push_back(figure_run(r, &r == complex));
  out.adopt(eval::emit_figure_data(figures, out.dir()));

  json results = json::array();
  for (const auto& r : runs) results.push_back(scenario_json(r));
  write_summary(out, c, dgp::kCovariateNames.size(), std::move(results));
  return out.written();
}

std::vector<fs::path> simulate(const RunConfig& c, std::ostream& log) {
  OutputDir out(c.out);
  const auto run = run_scenario(c.scenario, c, false, log);
  if (c.dump_data) {
    out.write("dataset.csv", io::dataset_to_csv(run.data));
    out.write("ground_truth.csv", io::ground_truth_to_csv(run.truth));
    std::vector<double> income(run.data.size());
    const auto col = static_cast<Eigen::Index>(run.data.column("income"));
    for (std::size_t i = 0; i < income.size(); ++i) income[i] = run.data.covariates(static_cast<Eigen::Index>(i), col);
    const auto model = scm::simulation_model(c.scenario, dgp::median(income));
    out.write("counterfactuals.csv", scm::counterfactuals_to_csv(model, run.data));
  }
  write_tables(out, {&run}, &run);
  out.adopt(eval::emit_figure_data({figure_run(run, true)}, out.dir()));
  write_summary(out, c, dgp::kCovariateNames.size(), json::array({scenario_json(run)}));
  return out.written();
}

std::string estimates_csv(const CateEstimates& e) {
  io::CsvTable t;
  t.header = {"unit_id", "method", "tau_hat"};
  if (e.se) t.header.push_back("se");
  for (std::size_t i = 0; i < e.tau_hat.size(); ++i) {
    std::vector<std::string> row = {std::to_string(i), e.method, io::format_double(e.tau_hat[i])};
    if (e.se) row.push_back(io::format_double((*e.se)[i]));
    t.rows.push_back(std::move(row));
  }
  return io::to_csv(t);
}

std::vector<fs::path> fit(const RunConfig& c, std::ostream& log) {
  log << "reading " << c.data.string() << "\n";
  const auto data = io::dataset_from_table(io::read_csv(c.data), c.treatment, c.outcome, c.covariates);
  data.validate();
  try {
    if (wants(c, "causal_forest")) c.effective_forest(data.num_covariates()).validate(data.num_covariates());
    if (c.learner_oracle == "forest") c.learner_forest.validate(data.num_covariates() + 1);
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(e.what());
  }

  const auto run = estimate(data, c, log);
  OutputDir out(c.out);
  json methods = json::array();
  for (const auto& e : run.estimates) {
    out.write("estimates_" + e.method + ".csv", estimates_csv(e));
    methods.push_back({{"method", e.method}, {"ate", e.ate.value_or(mean(e.tau_hat))}});
  }
  json results;
  results["n"] = data.size();
  results["num_treated"] = data.num_treated();
  results["covariates"] = data.covariate_names;
  results["methods"] = std::move(methods);
  if (run.forest) {
    results["causal_forest"] = {{"e_hat_overlap", overlap_json(eval::overlap_check(run.forest->e_hat))},
                                {"importance", importance_json(run.importance)}};
    if (c.save_forest) {
      forest::save(*run.forest, *c.save_forest);
      log << "saved forest to " << c.save_forest->string() << "\n";
    }
  }
  write_summary(out, c, data.num_covariates(), std::move(results));
  auto written = out.written();
  if (run.forest && c.save_forest) written.push_back(*c.save_forest);
  return written;
}

}  // namespace

std::uint64_t scenario_seed(std::uint64_t seed, dgp::ScenarioKind kind) {
  return derive_seed(seed, kScenarioStream + static_cast<std::uint64_t>(kind));
}

void RunConfig::validate() const {
  if (methods.empty()) throw InputError("at least one method is required");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end()) {
      throw InputError("unknown method '" + m + "' (expected one of ols, causal_forest, s, t, x, r, dr)");
    }
    if (!seen.insert(m).second) throw InputError("method '" + m + "' listed twice");
  }
  if (folds < 2) throw InputError("folds must be at least 2");
  if (threads < 1) throw InputError("threads must be at least 1");
  if (learner_oracle != "forest" && learner_oracle != "linear") {
    throw InputError("unknown learner oracle '" + learner_oracle + "' (expected forest or linear)");
  }
  if (!(learner_ridge >= 0.0)) throw InputError("learner ridge must be >= 0");
  if (command == Command::Fit) {
    if (data.empty()) throw InputError("fit requires --data");
    if (treatment.empty()) throw InputError("fit requires a treatment column name");
    if (outcome.empty()) throw InputError("fit requires an outcome column name");
    if (treatment == outcome) throw InputError("treatment and outcome columns must differ");
  } else if (save_forest) {
    throw InputError("--save-forest is only available for fit");
  }
  try {
    if (command != Command::Fit) {
      dgp::ScenarioSpec{scenario, n, 0, noise_sd}.validate();
      const auto p = dgp::kCovariateNames.size();
      if (wants(*this, "causal_forest")) effective_forest(p).validate(p);
      if (learner_oracle == "forest") learner_forest.validate(dgp::kCovariateNames.size() + 1);
    }
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(e.what());
  }
}

forest::ForestParams RunConfig::effective_forest(std::size_t num_features) const {
  auto f = forest;
  f.seed = derive_seed(seed, kForestStream);
  f.num_folds_nuisance = folds;
  f.mtry = mtry.value_or(static_cast<int>(num_features));
  return f;
}

json RunConfig::to_json(std::size_t num_features) const {
  json j;
  j["command"] = command_name(command);
  if (command == Command::Simulate) j["scenario"] = dgp::to_string(scenario);
  if (command != Command::Fit) {
    j["n"] = n;
    j["noise_sd"] = noise_sd;
  }
  j["seed"] = seed;
  j["methods"] = methods;
  j["folds"] = folds;
  if (wants(*this, "causal_forest")) {
    const auto f = effective_forest(num_features);
    j["forest"] = f;
    j["trees"] = f.num_trees;
  }
  if (std::any_of(methods.begin(), methods.end(), is_meta)) {
    j["learners"] = {{"oracle", learner_oracle}, {"ridge", learner_ridge}};
    if (learner_oracle == "forest") j["learners"]["forest"] = learner_forest;
  }
  if (command == Command::Simulate) j["dump_data"] = dump_data;
  if (command == Command::Fit) {
    j["data"] = data.string();
    j["treatment"] = treatment;
    j["outcome"] = outcome;
    j["covariates"] = covariates;
  }
  return j;
}

std::optional<RunConfig> parse_args(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Heterogeneous treatment effect estimation", "hte"};
  app.require_subcommand(1);
  auto* rep = app.add_subcommand("replicate", "Run all three simulation scenarios and write the report tables");
  auto* sim = app.add_subcommand("simulate", "Run one simulation scenario");
  auto* fit = app.add_subcommand("fit", "Estimate effects on a CSV dataset");

  std::string config_path, scenario, out_dir, data, treatment, outcome, save_forest;
  std::vector<std::string> methods, covariates;
  std::size_t n = 0, trees = 0;
  std::uint64_t seed = 0;
  int folds = 0;
  int mtry = 0;
  unsigned threads = 0;
  bool dump_data = false;

  for (auto* s : {rep, sim, fit}) {
    s->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    s->add_option("--seed", seed, "Master seed");
    s->add_option("--methods", methods, "Comma-separated: ols,causal_forest,s,t,x,r,dr")->delimiter(',');
    s->add_option("--trees", trees, "Causal forest trees")->check(CLI::PositiveNumber);
    s->add_option("--mtry", mtry, "Features tried per split (0: ceil(sqrt(p)); default: all)")
        ->check(CLI::NonNegativeNumber);
    s->add_option("--folds", folds, "Cross-fitting folds")->check(CLI::Range(2, 1000));
    s->add_option("--out", out_dir, "Output directory");
    s->add_option("--threads", threads, "Worker threads for forest growth")->check(CLI::Range(1u, 4096u));
  }
  for (auto* s : {rep, sim}) {
    s->add_option("--n", n, "Units per scenario")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  }
  sim->add_option("--scenario", scenario, "linear, complex_nonlinear, or constant");
  sim->add_flag("--dump-data", dump_data, "Also write dataset.csv, ground_truth.csv, counterfactuals.csv");
  fit->add_option("--data", data, "Input CSV with a header row");
  fit->add_option("--treatment", treatment, "Treatment column (default W)");
  fit->add_option("--outcome", outcome, "Outcome column (default Y)");
  fit->add_option("--covariates", covariates, "Comma-separated covariate columns (default: all others)")
      ->delimiter(',');
  fit->add_option("--save-forest", save_forest, "Write the fitted causal forest as JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream ignored;
      app.exit(e, out, ignored);
      return std::nullopt;
    }
    throw InputError(e.what());
  }

  CLI::App* active = rep->parsed() ? rep : sim->parsed() ? sim : fit;
  RunConfig c;
  c.command = active == rep ? Command::Replicate : active == sim ? Command::Simulate : Command::Fit;
  if (active->count("--config")) apply_json(c, load_json(config_path));

  if (active->count("--seed")) c.seed = seed;
  if (active->count("--methods")) c.methods = methods;
  if (active->count("--trees")) c.forest.num_trees = trees;
  if (active->count("--folds")) c.folds = folds;
  if (active->count("--mtry")) c.mtry = mtry;
  if (active->count("--out")) c.out = out_dir;
  if (active->count("--threads")) c.threads = threads;
  if (active != fit && active->count("--n")) c.n = n;
  if (active == sim) {
    if (sim->count("--scenario")) c.scenario = dgp::parse_kind(scenario);
    if (dump_data) c.dump_data = true;
  }
  if (active == fit) {
    if (fit->count("--data")) c.data = data;
    if (fit->count("--treatment")) c.treatment = treatment;
    if (fit->count("--outcome")) c.outcome = outcome;
    if (fit->count("--covariates")) c.covariates = covariates;
    if (fit->count("--save-forest")) c.save_forest = save_forest;
  }
  c.forest.num_folds_nuisance = c.folds;
  c.validate();
  return c;
}

std::vector<std::filesystem::path> execute(const RunConfig& config, std::ostream& log) {
  config.validate();
  switch (config.command) {
    case Command::Replicate:
      return replicate(config, log);
    case Command::Simulate:
      return simulate(config, log);
    case Command::Fit:
      return fit(config, log);
  }
  return {};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const auto config = parse_args(args, out);
    if (!config) return kExitOk;
    for (const auto& p : execute(*config, err)) out << p.string() << "\n";
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace hte::cli
