#pragma once

#include "gdid/learners.hpp"
#include "gdid/monte_carlo.hpp"

#include <string>

namespace gdid {

// Learner shorthand: glm | linear | logistic | knn[:k] | stumps[:rounds[:shrinkage]] | ensemble.
// Errors: Config.
LearnerSpec parse_learner(const std::string& text);

// Nuisance settings shared by the CLI and experiment files.
struct NuisanceSettings {
  LearnerSpec spec = LearnerSpec::linear();
  int folds = 5;
  double trim_eps = kDefaultTrimEps;
};

// Tables [experiment], [dgp], [nuisance], [bootstrap]; unknown keys are
// rejected. Errors: Config, Io.
MonteCarloConfig parse_experiment(const std::string& toml_text);
MonteCarloConfig load_experiment(const std::string& path);

// Reads only the [nuisance] table of a TOML file.
NuisanceSettings load_nuisance_settings(const std::string& path);

}  // namespace gdid
