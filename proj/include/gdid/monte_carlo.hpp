#pragma once

#include "gdid/estimators.hpp"
#include "gdid/inference.hpp"
#include "gdid/learners.hpp"
#include "gdid/simulation.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace gdid {

enum class EstimatorKind { Did, Cdid, Gdid, Ignorability, AteGdid };

struct EstimatorPreset {
  std::string name;
  EstimatorKind kind = EstimatorKind::Gdid;
  int lag_depth = 0;
};

// DiD, cDiD, gDiD-0, Ign-1, Ign-2, gDiD-1, gDiD-2, ATE-gDiD-1.
std::vector<EstimatorPreset> default_presets();
// Errors: InvalidArgument for unknown names.
EstimatorPreset preset_by_name(const std::string& name);

using DgpConfig = std::variant<Dgp1Config, Dgp2Config>;

PanelDataset simulate(const DgpConfig& dgp, std::uint64_t seed);

struct MonteCarloConfig {
  DgpConfig dgp = Dgp1Config{};
  std::vector<EstimatorPreset> estimators = default_presets();
  int reps = 500;
  double truth = 0.0;
  LearnerSpec spec = LearnerSpec::linear();
  int folds = 5;  // < 2 selects the no-split path for every estimator
  double trim_eps = kDefaultTrimEps;
  std::vector<VarianceMethod> inference = {VarianceMethod::Plugin};
  BootstrapConfig bootstrap;
  double level = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;

  void check() const;
};

struct EstimatorSummary {
  std::string estimator;
  VarianceMethod inference = VarianceMethod::Plugin;
  double bias = 0.0;
  double rmse = 0.0;
  double ci_length = 0.0;
  double coverage = 0.0;  // percent
  int replicates = 0;
  int failures = 0;
  std::vector<std::string> failure_samples;  // first few messages
};

struct MonteCarloReport {
  std::string config_echo;  // canonical JSON of the configuration
  std::vector<EstimatorSummary> rows;
  // tau_hat per estimator (outer) and replicate (inner); NaN for failures.
  std::vector<std::vector<double>> estimates;

  const EstimatorSummary& row(const std::string& estimator,
                              VarianceMethod method = VarianceMethod::Plugin) const;
};

// Replicate r uses seed mix_seed(config.seed, r) for data, folds and
// bootstrap weights, so reports do not depend on the thread count.
// Errors: AllReplicatesFailed (every estimator failed every replicate).
MonteCarloReport run_monte_carlo(const MonteCarloConfig& config);

std::string describe(const DgpConfig& dgp);
std::string config_json(const MonteCarloConfig& config);
std::string report_csv(const MonteCarloReport& report);
std::string report_json(const MonteCarloReport& report);

}  // namespace gdid
