#include "gdid/monte_carlo.hpp"

#include "gdid/errors.hpp"
#include "internal.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace gdid {

using ojson = nlohmann::ordered_json;

std::vector<EstimatorPreset> default_presets() {
  return {{"DiD", EstimatorKind::Did, 0},          {"cDiD", EstimatorKind::Cdid, 0},
          {"gDiD-0", EstimatorKind::Gdid, 0},      {"Ign-1", EstimatorKind::Ignorability, 1},
          {"Ign-2", EstimatorKind::Ignorability, 2}, {"gDiD-1", EstimatorKind::Gdid, 1},
          {"gDiD-2", EstimatorKind::Gdid, 2},      {"ATE-gDiD-1", EstimatorKind::AteGdid, 1}};
}

EstimatorPreset preset_by_name(const std::string& name) {
  for (auto& p : default_presets())
    if (p.name == name) return p;
  // Generic forms beyond the table rows: gDiD-k, Ign-k, ATE-gDiD-k.
  auto lag_suffix = [&](const std::string& prefix) -> int {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return -1;
    const auto rest = name.substr(prefix.size());
    if (rest.find_first_not_of("0123456789") != std::string::npos) return -1;
    return std::stoi(rest);
  };
  if (int k = lag_suffix("gDiD-"); k >= 0) return {name, EstimatorKind::Gdid, k};
  if (int k = lag_suffix("Ign-"); k >= 0) return {name, EstimatorKind::Ignorability, k};
  if (int k = lag_suffix("ATE-gDiD-"); k >= 0) return {name, EstimatorKind::AteGdid, k};
  throw Error(ErrorCode::InvalidArgument, "unknown estimator preset '" + name + "'");
}

PanelDataset simulate(const DgpConfig& dgp, std::uint64_t seed) {
  return std::visit(
      [&](auto cfg) {
        cfg.seed = seed;
        if constexpr (std::is_same_v<decltype(cfg), Dgp1Config>)
          return simulate_dgp1(cfg);
        else
          return simulate_dgp2(cfg);
      },
      dgp);
}

void MonteCarloConfig::check() const {
  if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be at least 1");
  if (estimators.empty()) throw Error(ErrorCode::InvalidArgument, "no estimators requested");
  if (inference.empty()) throw Error(ErrorCode::InvalidArgument, "no inference method requested");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "level must lie in (0, 1)");
  if (!(trim_eps > 0.0 && trim_eps < 0.5)) throw Error(ErrorCode::InvalidArgument, "trim_eps must lie in (0, 0.5)");
  for (auto m : inference)
    if (m == VarianceMethod::MultiplierBootstrap) bootstrap.check();
  spec.check();
  std::visit([](const auto& c) { c.check(); }, dgp);
}

const EstimatorSummary& MonteCarloReport::row(const std::string& estimator, VarianceMethod method) const {
  for (const auto& r : rows)
    if (r.estimator == estimator && r.inference == method) return r;
  throw Error(ErrorCode::InvalidArgument, "no report row for " + estimator);
}

namespace {

struct Interval {
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
};

struct Replicate {
  std::vector<double> tau;                   // per estimator
  std::vector<std::vector<Interval>> ci;     // per estimator, per method
  std::vector<std::string> error;            // per estimator, empty on success
};

AttEstimate run_estimator(const EstimatorPreset& p, const PanelDataset& d, const MonteCarloConfig& cfg,
                          std::uint64_t seed, std::map<int, NuisanceFits>& cache, NuisanceFits& used) {
  if (p.kind == EstimatorKind::Did) return estimate_did(d);
  const bool need_treated = p.kind == EstimatorKind::AteGdid;
  if (p.kind == EstimatorKind::Cdid) {
    // Covariate-only regressions fitted once on the full sample with GLMs.
    const auto c0 = build_conditioning(d, 0, 0);
    const auto cm1 = build_conditioning(d, -1, 0);
    CrossFitOptions o;
    o.trim_eps = cfg.trim_eps;
    used = cross_fit_nuisances(d, c0, cm1, LearnerSpec::linear(), CrossFitPlan::none(), o);
    return estimate_cdid(d, used, cfg.trim_eps);
  }
  auto it = cache.find(p.lag_depth);
  if (it == cache.end() || (need_treated && !it->second.has_treated_arm())) {
    const auto c0 = build_conditioning(d, 0, p.lag_depth);
    const auto cm1 = build_conditioning(d, -1, p.lag_depth);
    const auto plan = cfg.folds >= 2 ? make_plan(d.treatment, cfg.folds, mix_seed(seed, 0xF0)) : CrossFitPlan::none();
    CrossFitOptions o;
    o.trim_eps = cfg.trim_eps;
    // Treated-arm fits are cheap relative to the rest; fit them whenever an
    // ATE row is requested so every row at this lag shares one fit.
    o.treated_arm = std::any_of(cfg.estimators.begin(), cfg.estimators.end(), [&](const EstimatorPreset& q) {
      return q.kind == EstimatorKind::AteGdid && q.lag_depth == p.lag_depth;
    });
    it = cache.insert_or_assign(p.lag_depth, cross_fit_nuisances(d, c0, cm1, cfg.spec, plan, o)).first;
  }
  used = it->second;
  switch (p.kind) {
    case EstimatorKind::Gdid: return estimate_gdid(d, used, cfg.trim_eps);
    case EstimatorKind::Ignorability: return estimate_aipw_att(d, 1, used, cfg.trim_eps);
    case EstimatorKind::AteGdid: return estimate_ate_gdid(d, used, cfg.trim_eps);
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled estimator kind");
}

Replicate run_replicate(const MonteCarloConfig& cfg, std::size_t r) {
  const auto seed = mix_seed(cfg.seed, r);
  const auto nest = cfg.estimators.size();
  Replicate out;
  out.tau.assign(nest, std::numeric_limits<double>::quiet_NaN());
  out.ci.assign(nest, std::vector<Interval>(cfg.inference.size()));
  out.error.assign(nest, "");
  PanelDataset d;
  try {
    d = simulate(cfg.dgp, mix_seed(seed, 0xDA7A));
  } catch (const std::exception& e) {
    out.error.assign(nest, e.what());
    return out;
  }
  std::map<int, NuisanceFits> cache;
  for (std::size_t k = 0; k < nest; ++k) {
    try {
      NuisanceFits fits;
      auto est = run_estimator(cfg.estimators[k], d, cfg, seed, cache, fits);
      if (!std::isfinite(est.tau_hat)) throw Error(ErrorCode::InvalidArgument, "non-finite estimate");
      out.tau[k] = est.tau_hat;
      for (std::size_t m = 0; m < cfg.inference.size(); ++m) {
        ConfidenceInterval ci;
        switch (cfg.inference[m]) {
          case VarianceMethod::Plugin: ci = confidence_interval(est.tau_hat, plugin_variance(est), cfg.level); break;
          case VarianceMethod::Sandwich:
            ci = confidence_interval(est.tau_hat, sandwich_variance(d, fits, est), cfg.level);
            break;
          case VarianceMethod::MultiplierBootstrap: {
            auto b = cfg.bootstrap;
            b.seed = mix_seed(seed, 0xB007, k);
            b.threads = 1;
            ci = multiplier_bootstrap(est, b, cfg.level).ci;
            break;
          }
        }
        out.ci[k][m] = {ci.lower, ci.upper};
      }
    } catch (const std::exception& e) {
      out.tau[k] = std::numeric_limits<double>::quiet_NaN();
      out.error[k] = e.what();
    }
  }
  return out;
}

}  // namespace

MonteCarloReport run_monte_carlo(const MonteCarloConfig& config) {
  config.check();
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<Replicate> results(reps);
  parallel_for(reps, config.threads, [&](std::size_t r) { results[r] = run_replicate(config, r); });

  MonteCarloReport report;
  report.config_echo = config_json(config);
  const auto nest = config.estimators.size();
  report.estimates.assign(nest, std::vector<double>(reps));
  bool any = false;
  for (std::size_t k = 0; k < nest; ++k) {
    for (std::size_t r = 0; r < reps; ++r) report.estimates[k][r] = results[r].tau[k];
    for (std::size_t m = 0; m < config.inference.size(); ++m) {
      EstimatorSummary s;
      s.estimator = config.estimators[k].name;
      s.inference = config.inference[m];
      double sum = 0.0, sum2 = 0.0, len = 0.0;
      int covered = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& rep = results[r];
        if (!rep.error[k].empty()) {
          ++s.failures;
          if (s.failure_samples.size() < 5) s.failure_samples.push_back("rep " + std::to_string(r) + ": " + rep.error[k]);
          continue;
        }
        const double err = rep.tau[k] - config.truth;
        sum += err;
        sum2 += err * err;
        const auto& ci = rep.ci[k][m];
        len += ci.upper - ci.lower;
        if (ci.lower <= config.truth && config.truth <= ci.upper) ++covered;
        ++s.replicates;
      }
      if (s.replicates > 0) {
        any = true;
        const double n = s.replicates;
        s.bias = sum / n;
        s.rmse = std::sqrt(sum2 / n);
        s.ci_length = len / n;
        s.coverage = 100.0 * covered / n;
      } else {
        s.bias = s.rmse = s.ci_length = s.coverage = std::numeric_limits<double>::quiet_NaN();
      }
      report.rows.push_back(std::move(s));
    }
  }
  if (!any) {
    std::string first;
    for (const auto& row : report.rows)
      if (!row.failure_samples.empty()) {
        first = row.failure_samples.front();
        break;
      }
    throw Error(ErrorCode::AllReplicatesFailed, "every replicate failed; first failure " + first);
  }
  return report;
}

namespace {

std::string form_name(Form f) {
  switch (f) {
    case Form::Linear: return "linear";
    case Form::Additive: return "additive";
    case Form::Nonlinear: return "nonlinear";
  }
  return "";
}

ojson dgp_json(const DgpConfig& dgp) {
  ojson j;
  if (const auto* c = std::get_if<Dgp1Config>(&dgp)) {
    j["design"] = "dgp1";
    j["n"] = c->n;
    j["zeta"] = c->zeta;
    j["observed"] = c->observed == Observed::Linear ? "linear" : "nonlinear";
  } else {
    const auto& c2 = std::get<Dgp2Config>(dgp);
    j["design"] = "dgp2";
    j["n"] = c2.n;
    j["gamma"] = c2.gamma.to_string();
    j["beta"] = c2.beta.to_string();
    j["form"] = form_name(c2.form);
  }
  return j;
}

std::string weight_name(WeightDist w) {
  switch (w) {
    case WeightDist::Exponential: return "exponential";
    case WeightDist::Mammen: return "mammen";
    case WeightDist::Normal: return "normal";
  }
  return "";
}

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string describe(const DgpConfig& dgp) { return dgp_json(dgp).dump(); }

std::string config_json(const MonteCarloConfig& config) {
  ojson j;
  j["dgp"] = dgp_json(config.dgp);
  j["estimators"] = ojson::array();
  for (const auto& e : config.estimators) j["estimators"].push_back(e.name);
  j["reps"] = config.reps;
  j["truth"] = config.truth;
  j["learner"] = config.spec.to_string();
  j["folds"] = config.folds;
  j["trim_eps"] = config.trim_eps;
  j["inference"] = ojson::array();
  for (auto m : config.inference) j["inference"].push_back(to_string(m));
  j["bootstrap"] = {{"B", config.bootstrap.B}, {"weights", weight_name(config.bootstrap.weight_dist)}};
  j["level"] = config.level;
  j["seed"] = config.seed;
  return j.dump();
}

std::string report_csv(const MonteCarloReport& report) {
  std::ostringstream os;
  os << "estimator,inference,bias,rmse,ci_length,coverage,replicates,failures\n";
  for (const auto& r : report.rows)
    os << r.estimator << ',' << to_string(r.inference) << ',' << csv_number(r.bias) << ',' << csv_number(r.rmse)
       << ',' << csv_number(r.ci_length) << ',' << csv_number(r.coverage) << ',' << r.replicates << ','
       << r.failures << '\n';
  return os.str();
}

std::string report_json(const MonteCarloReport& report) {
  ojson j;
  j["config"] = ojson::parse(report.config_echo);
  j["rows"] = ojson::array();
  for (const auto& r : report.rows) {
    ojson row;
    row["estimator"] = r.estimator;
    row["inference"] = to_string(r.inference);
    row["bias"] = number_or_null(r.bias);
    row["rmse"] = number_or_null(r.rmse);
    row["ci_length"] = number_or_null(r.ci_length);
    row["coverage"] = number_or_null(r.coverage);
    row["replicates"] = r.replicates;
    row["failures"] = r.failures;
    row["failure_samples"] = r.failure_samples;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

}  // namespace gdid
