#pragma once

#include "gdid/estimators.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace gdid {

enum class VarianceMethod { Plugin, MultiplierBootstrap, Sandwich };

std::string to_string(VarianceMethod m);

// sigma2_hat follows the per-contribution convention: se^2 = sigma2_hat / denominator.
struct VarianceEstimate {
  double sigma2_hat = 0.0;
  double se = 0.0;
  VarianceMethod method = VarianceMethod::Plugin;
  std::string scale_note;
};

enum class WeightDist { Exponential, Mammen, Normal };

struct BootstrapConfig {
  int B = 1000;
  WeightDist weight_dist = WeightDist::Exponential;
  std::uint64_t seed = 0;
  int threads = 1;
  // Test hook replacing the weight distribution.
  std::function<double(std::mt19937_64&)> custom_weight;

  void check() const;  // B >= 100
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  VarianceMethod method = VarianceMethod::Plugin;
};

struct BootstrapResult {
  VarianceEstimate variance;
  ConfidenceInterval ci;
  std::vector<double> replicates;
};

// sigma2 = sum_i (influence_i - offset_i)^2 / denominator; se = sqrt(sigma2 / denominator).
// Errors: EmptyInfluence.
VarianceEstimate plugin_variance(const AttEstimate& estimate);

// tau*_b = sum_i G_bi influence_i / denominator with iid mean-one, variance-one
// weights; percentile interval from type-7 quantiles.
BootstrapResult multiplier_bootstrap(const AttEstimate& estimate, const BootstrapConfig& config, double level = 0.95);

// Stacked estimating equations of the no-split GLM fits and the estimator.
// Errors: NotParametricPath, SingularJacobian.
VarianceEstimate sandwich_variance(const PanelDataset& dataset, const NuisanceFits& fits, const AttEstimate& estimate);

ConfidenceInterval confidence_interval(double tau_hat, const VarianceEstimate& variance, double level = 0.95);

double weight_draw(WeightDist dist, std::mt19937_64& rng);

// Type-7 empirical quantile of unsorted data.
double quantile_type7(std::vector<double> values, double prob);

// Copies se and interval bounds into the estimate.
void attach(AttEstimate& estimate, const VarianceEstimate& variance, const ConfidenceInterval& ci);

}  // namespace gdid
