#pragma once

#include "gdid/learners.hpp"
#include "gdid/panel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gdid {

enum class Estimand {
  Gdid,
  IgnorabilityPost,
  IgnorabilityPre,
  Did,
  Cdid,
  AteGdid,
  ClusteredGdid,
  GroupTime,
  Aggregated,
};

std::string to_string(Estimand e);

// Point estimate plus the per-unit contributions inference works from.
//
// tau_hat == sum(influence) / denominator. The plug-in variance centers each
// contribution at offset_i (tau_hat for the ATT estimators, n_j * tau_hat for
// cluster sums); bootstraps reweight the uncentered contributions.
struct AttEstimate {
  Estimand estimand = Estimand::Gdid;
  double tau_hat = 0.0;
  Vector influence;
  Vector offsets;
  double denominator = 0.0;
  std::size_t n = 0;         // units (or clusters) contributing
  std::size_t n_treated = 0;
  double trim_eps = kDefaultTrimEps;
  int lag_depth = 0;
  std::string config_digest;
  std::vector<std::string> warnings;

  // Filled by the inference module.
  std::optional<double> se;
  std::optional<double> ci_lower, ci_upper;
  std::string inference_method;
  double level = 0.95;
};

// The summand of the post- or pre-period AIPW ATT estimator:
// y a - ((1 - a) pi y + (a - pi) mu) / (1 - pi).
double aipw_summand(double y, int a, double pi, double mu);

// Post-period (outcome_time 1: Y1, mu1, pi) or pre-period (0: Y0, mu0, pi0)
// ignorability estimator. pi is clipped to at most 1 - trim_eps.
// Errors: MissingFits, InvalidArgument.
AttEstimate estimate_aipw_att(const PanelDataset& dataset, int outcome_time, const NuisanceFits& fits,
                              double trim_eps = kDefaultTrimEps);

// Post-period minus pre-period AIPW, computed summand by summand.
AttEstimate estimate_gdid(const PanelDataset& dataset, const NuisanceFits& fits, double trim_eps = kDefaultTrimEps);

// Two-group difference in mean trends between periods 0 and 1.
AttEstimate estimate_did(const PanelDataset& dataset);

// gDiD on fits built from covariates only (lag depth 0).
AttEstimate estimate_cdid(const PanelDataset& dataset, const NuisanceFits& fits, double trim_eps = kDefaultTrimEps);

// Average treatment effect analogue; needs treated-arm outcome fits.
// Errors: MissingTreatedArmFits.
AttEstimate estimate_ate_gdid(const PanelDataset& dataset, const NuisanceFits& fits,
                              double trim_eps = kDefaultTrimEps);

enum class ImputationKind { EtaIgn, EtaCdid, EtaGdid };

struct ImputationInputs {
  std::optional<double> y0;          // Y_{i0}
  std::optional<double> mu1_w0;      // mu1(W_{i0})
  std::optional<double> mu0_wm1;     // mu0(W_{i,-1})
  std::optional<double> delta;       // E(Y1 - Y0 | X, A = 0)
};

// Counterfactual untreated post-period outcome for a treated unit.
// Errors: MissingComponent.
double impute_counterfactual(ImputationKind kind, const ImputationInputs& inputs);

// {estimand, tau_hat, se, ci_lower, ci_upper, n, n_treated, trim_eps, config_digest, ...}
std::string to_json(const AttEstimate& estimate, int indent = 2);

// FNV-1a digest of a canonical configuration string, as 16 hex digits.
std::string digest(const std::string& canonical);

}  // namespace gdid
