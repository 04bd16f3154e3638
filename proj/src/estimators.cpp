#include "gdid/estimators.hpp"

#include "gdid/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace gdid {

std::string to_string(Estimand e) {
  switch (e) {
    case Estimand::Gdid: return "gdid";
    case Estimand::IgnorabilityPost: return "ignorability_post";
    case Estimand::IgnorabilityPre: return "ignorability_pre";
    case Estimand::Did: return "did";
    case Estimand::Cdid: return "cdid";
    case Estimand::AteGdid: return "ate_gdid";
    case Estimand::ClusteredGdid: return "clustered_gdid";
    case Estimand::GroupTime: return "group_time";
    case Estimand::Aggregated: return "aggregated";
  }
  return "unknown";
}

double aipw_summand(double y, int a, double pi, double mu) {
  return y * a - ((1 - a) * pi * y + (a - pi) * mu) / (1.0 - pi);
}

namespace {

void require_fits(const PanelDataset& d, const Vector& v, const char* name) {
  if (v.size() != static_cast<Eigen::Index>(d.n_units()))
    throw Error(ErrorCode::MissingFits, std::string(name) + " predictions missing or of the wrong length");
}

void check_trim(double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw Error(ErrorCode::InvalidArgument, "trim_eps must lie in (0, 0.5)");
}

double clip_upper(double pi, double eps) {
  const double p = std::min(pi, 1.0 - eps);
  if (!(p < 1.0)) throw Error(ErrorCode::DegeneratePropensity, "propensity equals one after trimming");
  return p;
}

AttEstimate att_shell(const PanelDataset& d, Estimand e, double eps, int lag) {
  const int n1 = d.n_treated();
  if (n1 <= 0) throw Error(ErrorCode::InvalidArgument, "no treated units");
  AttEstimate est;
  est.estimand = e;
  est.n = d.n_units();
  est.n_treated = static_cast<std::size_t>(n1);
  est.denominator = n1;
  est.trim_eps = eps;
  est.lag_depth = lag;
  est.influence.resize(static_cast<Eigen::Index>(d.n_units()));
  return est;
}

void finish(AttEstimate& est) {
  est.tau_hat = est.influence.sum() / est.denominator;
  est.offsets = Vector::Constant(est.influence.size(), est.tau_hat);
}

// Per-unit AIPW summands for one period.
Vector period_summands(const PanelDataset& d, int t, const NuisanceFits& fits, double eps) {
  const Vector& mu = t == 1 ? fits.mu1 : fits.mu0;
  const Vector& pi = t == 1 ? fits.pi : fits.pi0;
  require_fits(d, mu, t == 1 ? "mu1" : "mu0");
  require_fits(d, pi, t == 1 ? "pi" : "pi0");
  const Vector y = d.outcome_at(t);
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    out[i] = aipw_summand(y[i], d.treatment[static_cast<std::size_t>(i)], clip_upper(pi[i], eps), mu[i]);
  return out;
}

}  // namespace

AttEstimate estimate_aipw_att(const PanelDataset& dataset, int outcome_time, const NuisanceFits& fits,
                              double trim_eps) {
  if (outcome_time != 0 && outcome_time != 1) throw Error(ErrorCode::InvalidArgument, "outcome_time must be 0 or 1");
  check_trim(trim_eps);
  auto est = att_shell(dataset, outcome_time == 1 ? Estimand::IgnorabilityPost : Estimand::IgnorabilityPre, trim_eps,
                       fits.lag_depth);
  est.influence = period_summands(dataset, outcome_time, fits, trim_eps);
  est.warnings = fits.warnings;
  finish(est);
  return est;
}

AttEstimate estimate_gdid(const PanelDataset& dataset, const NuisanceFits& fits, double trim_eps) {
  check_trim(trim_eps);
  auto est = att_shell(dataset, Estimand::Gdid, trim_eps, fits.lag_depth);
  est.influence = period_summands(dataset, 1, fits, trim_eps) - period_summands(dataset, 0, fits, trim_eps);
  est.warnings = fits.warnings;
  finish(est);
  return est;
}

AttEstimate estimate_cdid(const PanelDataset& dataset, const NuisanceFits& fits, double trim_eps) {
  if (fits.lag_depth != 0) throw Error(ErrorCode::InvalidArgument, "cdid needs fits built with lag depth 0");
  auto est = estimate_gdid(dataset, fits, trim_eps);
  est.estimand = Estimand::Cdid;
  return est;
}

AttEstimate estimate_did(const PanelDataset& dataset) {
  auto est = att_shell(dataset, Estimand::Did, kDefaultTrimEps, 0);
  const Vector trend = dataset.outcome_at(1) - dataset.outcome_at(0);
  const auto n1 = static_cast<double>(est.n_treated);
  const auto n0 = static_cast<double>(dataset.n_units()) - n1;
  if (n0 <= 0) throw Error(ErrorCode::InvalidArgument, "no control units");
  double control_mean = 0.0;
  for (Eigen::Index i = 0; i < trend.size(); ++i)
    if (!dataset.treatment[static_cast<std::size_t>(i)]) control_mean += trend[i];
  control_mean /= n0;
  // Treated units contribute their trend net of the control mean; control
  // contributions are mean-zero and scaled by n1 / n0.
  for (Eigen::Index i = 0; i < trend.size(); ++i) {
    const double dev = trend[i] - control_mean;
    est.influence[i] = dataset.treatment[static_cast<std::size_t>(i)] ? dev : -(n1 / n0) * dev;
  }
  finish(est);
  return est;
}

AttEstimate estimate_ate_gdid(const PanelDataset& dataset, const NuisanceFits& fits, double trim_eps) {
  check_trim(trim_eps);
  if (!fits.has_treated_arm()) throw Error(ErrorCode::MissingTreatedArmFits, "ATE needs treated-arm outcome fits");
  require_fits(dataset, fits.mu1_treated, "mu1_treated");
  require_fits(dataset, fits.mu0_treated, "mu0_treated");
  require_fits(dataset, fits.mu1, "mu1");
  require_fits(dataset, fits.mu0, "mu0");
  require_fits(dataset, fits.pi, "pi");
  require_fits(dataset, fits.pi0, "pi0");
  auto est = att_shell(dataset, Estimand::AteGdid, trim_eps, fits.lag_depth);
  est.denominator = static_cast<double>(dataset.n_units());
  const Vector y1 = dataset.outcome_at(1);
  const Vector y0 = dataset.outcome_at(0);
  auto term = [&](double y, int a, double pi, double m1, double m0) {
    const double p = std::clamp(pi, trim_eps, 1.0 - trim_eps);
    return m1 - m0 + a * (y - m1) / p - (1 - a) * (y - m0) / (1.0 - p);
  };
  for (Eigen::Index i = 0; i < y1.size(); ++i) {
    const int a = dataset.treatment[static_cast<std::size_t>(i)];
    est.influence[i] = term(y1[i], a, fits.pi[i], fits.mu1_treated[i], fits.mu1[i]) -
                       term(y0[i], a, fits.pi0[i], fits.mu0_treated[i], fits.mu0[i]);
  }
  est.warnings = fits.warnings;
  finish(est);
  return est;
}

double impute_counterfactual(ImputationKind kind, const ImputationInputs& in) {
  auto need = [](const std::optional<double>& v, const char* name) {
    if (!v) throw Error(ErrorCode::MissingComponent, std::string("imputation needs ") + name);
    return *v;
  };
  switch (kind) {
    case ImputationKind::EtaIgn:
      return need(in.mu1_w0, "mu1(W0)");
    case ImputationKind::EtaCdid:
      return need(in.y0, "Y0") + need(in.delta, "delta(X)");
    case ImputationKind::EtaGdid:
      return need(in.y0, "Y0") + need(in.mu1_w0, "mu1(W0)") - need(in.mu0_wm1, "mu0(W-1)");
  }
  throw Error(ErrorCode::InvalidArgument, "unknown imputation kind");
}

std::string to_json(const AttEstimate& e, int indent) {
  nlohmann::ordered_json j;
  j["estimand"] = to_string(e.estimand);
  j["tau_hat"] = e.tau_hat;
  j["se"] = e.se ? nlohmann::ordered_json(*e.se) : nlohmann::ordered_json(nullptr);
  j["ci_lower"] = e.ci_lower ? nlohmann::ordered_json(*e.ci_lower) : nlohmann::ordered_json(nullptr);
  j["ci_upper"] = e.ci_upper ? nlohmann::ordered_json(*e.ci_upper) : nlohmann::ordered_json(nullptr);
  j["level"] = e.level;
  j["inference"] = e.inference_method;
  j["n"] = e.n;
  j["n_treated"] = e.n_treated;
  j["trim_eps"] = e.trim_eps;
  j["lag_depth"] = e.lag_depth;
  j["config_digest"] = e.config_digest;
  j["warnings"] = e.warnings;
  return j.dump(indent);
}

std::string digest(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gdid
