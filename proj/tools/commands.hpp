#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gdid::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kInvalidInput = 2;
inline constexpr int kEstimationError = 3;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string output_dir;
  std::string format = "json";
};

struct DataOptions {
  std::string path;
  std::string layout = "long";
  std::string unit = "unit";
  std::string time = "time";
  std::string outcome = "outcome";
  std::string treatment = "treatment";
  std::vector<std::string> covariates;
  std::string covariate_prefix = "cov_";
  std::string outcome_prefix = "y_";
};

struct EstimateOptions {
  DataOptions data;
  std::string estimand = "gdid";
  int lags = 1;
  std::string learner = "glm";
  std::string config;  // TOML with a [nuisance] table
  std::optional<int> folds;
  std::optional<double> trim_eps;
  std::string infer = "plugin";
  int B = 1000;
  std::string weights = "exponential";
  double level = 0.95;
  std::string influence_csv;
  std::string cluster_col;
  std::string cluster_cap;
  std::string cluster_summary = "mean";
  bool staggered = false;
  std::optional<int> target_time;
  std::string aggregate;
  std::size_t min_group_size = 5;
};

struct SimulateOptions {
  std::string config;
  std::optional<int> reps;
};

struct ValidateOptions {
  DataOptions data;
  int lags = 1;
  double trim_eps = 0.01;
};

int cmd_estimate(const GlobalOptions& global, const EstimateOptions& options);
int cmd_simulate(const GlobalOptions& global, const SimulateOptions& options);
int cmd_validate(const GlobalOptions& global, const ValidateOptions& options);

}  // namespace gdid::cli
