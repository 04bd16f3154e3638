#pragma once

#include "gdid/panel.hpp"
#include "gdid/staggered.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gdid {

// ---------------------------------------------------------------------------
// First design: omitted covariate and tunable pre-period overlap.

enum class Observed { Linear, Nonlinear };

struct Dgp1Config {
  std::size_t n = 1000;
  double zeta = 0.0;
  Observed observed = Observed::Linear;
  std::uint64_t seed = 0;

  void check() const;  // n >= 10, zeta >= 0
};

// Generates periods 1..4 and stores them at panel times -2..1. Released
// covariates are (X2, X3, X4) or the standardized (Z2, Z3, Z4).
PanelDataset simulate_dgp1(const Dgp1Config& config);

// Means and standard deviations of the four raw Z transforms, estimated once
// from 10^6 draws with a fixed seed.
struct ZMoments {
  std::array<double, 4> mean;
  std::array<double, 4> sd;
};
const ZMoments& dgp1_z_moments();

// ---------------------------------------------------------------------------
// Second design: one unobserved confounder and lagged-outcome dynamics.

enum class EffectPath { Zero, Constant, LinearGrowth, RandomChanges };

// Coefficient path over the generated periods t = -1, 0, 1 (index k = 0, 1, 2):
// Constant: base; LinearGrowth: base + step * k; RandomChanges: base plus the
// cumulative sum of changes[0..k-1].
struct EffectSpec {
  EffectPath kind = EffectPath::Constant;
  double base = 1.0;
  double step = 0.0;
  std::vector<double> changes;

  double at(int k) const;
  std::string to_string() const;

  static EffectSpec zero() { return {EffectPath::Zero, 0.0, 0.0, {}}; }
  static EffectSpec constant(double v) { return {EffectPath::Constant, v, 0.0, {}}; }
  static EffectSpec linear_growth(double base, double step) { return {EffectPath::LinearGrowth, base, step, {}}; }
  // Two changes drawn from Uniform(0.25, 0.75) with random signs.
  static EffectSpec random_changes(double base, std::uint64_t seed);
};

enum class Form { Linear, Additive, Nonlinear };

struct Dgp2Config {
  std::size_t n = 1000;
  EffectSpec gamma = EffectSpec::zero();
  EffectSpec beta = EffectSpec::constant(1.0);
  Form form = Form::Linear;
  std::uint64_t seed = 0;
  // Required for Form::Nonlinear, which has no built-in definition.
  std::function<double(double)> custom_f, custom_g;

  void check() const;  // beta never zero, n >= 10
};

inline constexpr double kDefaultGamma = 0.5;
inline constexpr double kDefaultGammaStep = 0.5;
inline constexpr double kDefaultBeta = 1.0;
inline constexpr double kDefaultBetaStep = 0.5;

double additive_f(double x);
double additive_g(double x);

// Y_{-2} ~ N(0, 1) seeds the recursion; Y_t for t = -1, 0, 1 follows
// beta_t f(theta) + gamma_t g(Y_{t-1}) + (t - 1) + eps_t. Errors: NotSpecified.
PanelDataset simulate_dgp2(const Dgp2Config& config);

// ---------------------------------------------------------------------------
// Staggered adoption with no effect anywhere.

struct StaggeredDgpConfig {
  std::size_t n = 1000;
  int window = 3;          // treatment periods 1..window
  int pre_periods = 3;     // periods 1 - pre_periods .. 0
  double gamma = 0.0;
  double beta = 1.0;
  double switch_off = 0.0; // per-period probability a treated unit stops treatment
  std::uint64_t seed = 0;
};

StaggeredPanel simulate_staggered(const StaggeredDgpConfig& config);

// ---------------------------------------------------------------------------
// Cluster-randomized design with no effect.

struct ClusteredDgpConfig {
  std::size_t clusters = 100;
  std::size_t cluster_size = 10;
  double icc = 0.5;  // share of the period shock common to the cluster
  std::uint64_t seed = 0;
};

// Periods -1, 0, 1; one covariate; cluster intercepts drive assignment.
PanelDataset simulate_clustered(const ClusteredDgpConfig& config);

}  // namespace gdid
