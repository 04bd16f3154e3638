#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <thread>

namespace {

int default_threads() {
  if (const char* env = std::getenv("GDID_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const auto hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void add_data_options(CLI::App* app, gdid::cli::DataOptions& d) {
  app->add_option("--data", d.path, "Panel CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--layout", d.layout, "long or wide")->check(CLI::IsMember({"long", "wide"}));
  app->add_option("--unit-col", d.unit, "Unit id column");
  app->add_option("--time-col", d.time, "Time column (long layout)");
  app->add_option("--outcome-col", d.outcome, "Outcome column (long layout)");
  app->add_option("--treatment-col", d.treatment, "Treatment column");
  app->add_option("--covariates", d.covariates, "Covariate columns")->delimiter(',');
  app->add_option("--covariate-prefix", d.covariate_prefix, "Prefix selecting covariates when none are listed");
  app->add_option("--outcome-prefix", d.outcome_prefix, "Outcome column prefix (wide layout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized difference-in-differences estimation and simulation"};
  app.require_subcommand(1);

  gdid::cli::GlobalOptions global;
  global.threads = default_threads();
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for folds, bootstrap weights and simulations");
  app.add_option("--threads", global.threads, "Worker threads (default: GDID_THREADS or logical cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--output-dir", global.output_dir, "Directory for output files");
  app.add_option("--format", global.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  gdid::cli::EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "Estimate a treatment effect from a panel CSV");
  add_data_options(estimate, est.data);
  estimate->add_option("--estimand", est.estimand, "gdid, did, cdid, ign, ign-pre or ate")
      ->check(CLI::IsMember({"gdid", "did", "cdid", "ign", "ign-pre", "ate"}));
  estimate->add_option("--lags", est.lags, "Lagged outcomes in the conditioning set")->check(CLI::NonNegativeNumber);
  estimate->add_option("--learner", est.learner, "glm, knn[:k], stumps[:rounds[:shrinkage]] or ensemble");
  estimate->add_option("--config", est.config, "TOML file with a [nuisance] table")->check(CLI::ExistingFile);
  estimate->add_option("--folds", est.folds, "Cross-fitting folds (1 = no split)");
  estimate->add_option("--trim-eps", est.trim_eps, "Propensity trimming bound");
  estimate->add_option("--infer", est.infer, "plugin, bootstrap or sandwich")
      ->check(CLI::IsMember({"plugin", "bootstrap", "sandwich"}));
  estimate->add_option("--B", est.B, "Bootstrap replicates");
  estimate->add_option("--weights", est.weights, "Bootstrap weights: exponential, mammen or normal");
  estimate->add_option("--level", est.level, "Confidence level");
  estimate->add_option("--influence-csv", est.influence_csv, "Write per-unit influence values");
  estimate->add_option("--cluster-col", est.cluster_col, "Cluster column; enables cluster-level estimation");
  estimate->add_option("--cluster-cap", est.cluster_cap, "<treated>,<control> unit caps per cluster");
  estimate->add_option("--cluster-summary", est.cluster_summary, "mean or mean_and_size");
  estimate->add_flag("--staggered", est.staggered, "Time-varying treatment column (staggered adoption)");
  estimate->add_option("--target-time", est.target_time, "Target period for group-time effects");
  estimate->add_option("--aggregate", est.aggregate,
                       "treated-at-t, adopted-at-s=<s>, cohort-time=<s>,<t> or custom=<file>");
  estimate->add_option("--min-group-size", est.min_group_size, "Smallest admissible history group");

  gdid::cli::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a TOML file");
  simulate->add_option("--config", sim.config, "Experiment TOML")->required()->check(CLI::ExistingFile);
  simulate->add_option("--reps", sim.reps, "Override the replicate count")->check(CLI::PositiveNumber);

  gdid::cli::ValidateOptions val;
  auto* validate = app.add_subcommand("validate", "Check a panel CSV and report overlap diagnostics");
  add_data_options(validate, val.data);
  validate->add_option("--lags", val.lags, "Lagged outcomes in the conditioning set")->check(CLI::NonNegativeNumber);
  validate->add_option("--trim-eps", val.trim_eps, "Propensity trimming bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gdid::cli::kInvalidInput;
  }
  if (seed_opt->count() > 0) global.seed = seed;

  if (*estimate) return gdid::cli::cmd_estimate(global, est);
  if (*simulate) return gdid::cli::cmd_simulate(global, sim);
  return gdid::cli::cmd_validate(global, val);
}
