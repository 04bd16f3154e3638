// Acceptance checks: one PASS/FAIL line per criterion, details indented below.
#include "gdid/clustered.hpp"
#include "gdid/errors.hpp"
#include "gdid/inference.hpp"
#include "gdid/monte_carlo.hpp"
#include "gdid/simulation.hpp"
#include "gdid/staggered.hpp"
#include "internal.hpp"

#include <Eigen/Dense>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

using namespace gdid;

namespace {

int threads() {
  if (const char* env = std::getenv("GDID_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const auto hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct Criterion {
  int id;
  std::string title;
  std::vector<std::pair<bool, std::string>> checks;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) { checks.emplace_back(ok, what); }
  void note(const std::string& what) { notes.push_back(what); }
  bool passed() const {
    for (const auto& c : checks)
      if (!c.first) return false;
    return !checks.empty();
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

bool report(const Criterion& c, double seconds) {
  std::cout << (c.passed() ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << " (" << fmt(seconds, 1)
            << " s)\n";
  for (const auto& [ok, what] : c.checks) std::cout << "    [" << (ok ? "ok" : "FAIL") << "] " << what << "\n";
  for (const auto& n : c.notes) std::cout << "    note: " << n << "\n";
  std::cout.flush();
  return c.passed();
}

MonteCarloConfig mc(DgpConfig dgp, int reps, std::uint64_t seed, std::vector<std::string> names) {
  MonteCarloConfig c;
  c.dgp = std::move(dgp);
  c.reps = reps;
  c.seed = seed;
  c.threads = threads();
  c.estimators.clear();
  for (const auto& n : names) c.estimators.push_back(preset_by_name(n));
  return c;
}

std::string row_text(const EstimatorSummary& r) {
  return r.estimator + " bias " + fmt(r.bias) + " rmse " + fmt(r.rmse) + " coverage " + fmt(r.coverage, 1);
}

const std::vector<std::string> kAttPresets = {"DiD", "cDiD", "gDiD-0", "Ign-1", "Ign-2", "gDiD-1", "gDiD-2"};

// ---------------------------------------------------------------------------
// Monte Carlo criteria

MonteCarloReport dgp1_report(double zeta, int reps, std::uint64_t seed) {
  return run_monte_carlo(mc(Dgp1Config{.n = 1000, .zeta = zeta}, reps, seed, kAttPresets));
}

Criterion criterion1(const MonteCarloReport& r) {
  Criterion c{1, "omitted-covariate design at zeta = 0", {}, {}};
  const auto& did = r.row("DiD");
  const auto& ign1 = r.row("Ign-1");
  const auto& ign2 = r.row("Ign-2");
  const auto& g1 = r.row("gDiD-1");
  c.check(std::abs(did.bias + 0.21) <= 0.08, "DiD bias " + fmt(did.bias) + " within -0.21 +/- 0.08");
  c.check(std::abs(ign1.bias + 0.003) <= 0.05, "Ign-1 bias " + fmt(ign1.bias) + " within -0.003 +/- 0.05");
  c.check(std::abs(g1.bias + 0.004) <= 0.05, "gDiD-1 bias " + fmt(g1.bias) + " within -0.004 +/- 0.05");
  c.check(g1.rmse <= 0.25, "gDiD-1 rmse " + fmt(g1.rmse) + " <= 0.25");
  c.check(g1.coverage >= 88.0, "gDiD-1 coverage " + fmt(g1.coverage, 1) + " >= 88");
  const double tie = 0.02;
  c.check(ign2.rmse < ign1.rmse + tie && ign1.rmse < g1.rmse + tie && g1.rmse < did.rmse + tie,
          "rmse order Ign-2 " + fmt(ign2.rmse) + " < Ign-1 " + fmt(ign1.rmse) + " < gDiD-1 " + fmt(g1.rmse) +
              " < DiD " + fmt(did.rmse) + " (ties within 0.02)");
  for (const auto& row : r.rows) c.note(row_text(row));
  return c;
}

Criterion criterion2(const MonteCarloReport& r) {
  Criterion c{2, "omitted-covariate design at zeta = 0.1", {}, {}};
  const auto& did = r.row("DiD");
  const auto& ign1 = r.row("Ign-1");
  const auto& g1 = r.row("gDiD-1");
  c.check(std::abs(ign1.bias) > 1.0, "|Ign-1 bias| " + fmt(std::abs(ign1.bias)) + " > 1.0");
  c.check(std::abs(g1.bias) < 0.3, "|gDiD-1 bias| " + fmt(std::abs(g1.bias)) + " < 0.3");
  c.check(g1.rmse < did.rmse, "gDiD-1 rmse " + fmt(g1.rmse) + " < DiD rmse " + fmt(did.rmse));
  for (const auto& row : r.rows) c.note(row_text(row));
  return c;
}

Criterion criterion3(const MonteCarloReport& base, const MonteCarloReport& r) {
  Criterion c{3, "degradation under weak pre-period overlap (zeta = 0.3)", {}, {}};
  for (const char* name : {"Ign-1", "Ign-2", "gDiD-1", "gDiD-2"}) {
    const double ratio = r.row(name).rmse / base.row(name).rmse;
    c.check(ratio >= 2.0, std::string(name) + " rmse " + fmt(r.row(name).rmse) + " is " + fmt(ratio, 2) +
                              "x its zeta = 0 value (>= 2x)");
  }
  const double change = std::abs(r.row("DiD").rmse / base.row("DiD").rmse - 1.0);
  c.check(change < 0.30, "DiD rmse changes by " + fmt(100 * change, 1) + "% (< 30%)");
  for (const char* name : {"cDiD", "gDiD-0"})
    c.note(std::string(name) + " conditions on covariates only; rmse ratio " +
           fmt(r.row(name).rmse / base.row(name).rmse, 2) + " (not part of the check)");
  return c;
}

Criterion criterion4(int reps) {
  Criterion c{4, "lagged-dependence design orderings", {}, {}};
  const double tie = 0.02;
  {
    const auto r = run_monte_carlo(mc(Dgp2Config{.n = 1000, .gamma = EffectSpec::zero()}, reps, 401, kAttPresets));
    const auto& did = r.row("DiD");
    bool smallest = true;
    std::string worst;
    for (const auto& row : r.rows)
      if (row.rmse + tie < did.rmse) {
        smallest = false;
        worst += " " + row.estimator;
      }
    c.check(smallest, "(a) gamma = 0: DiD rmse " + fmt(did.rmse) + " is the smallest (ties within 0.02)" + worst);
    c.check(r.row("gDiD-1").rmse <= 2.0 * did.rmse,
            "(a) gDiD-1 rmse " + fmt(r.row("gDiD-1").rmse) + " <= 2 x DiD rmse " + fmt(did.rmse));
    for (const auto& row : r.rows) c.note("(a) " + row_text(row));
  }
  {
    const auto r = run_monte_carlo(
        mc(Dgp2Config{.n = 1000, .gamma = EffectSpec::constant(kDefaultGamma)}, reps, 402, {"DiD", "gDiD-1"}));
    c.check(r.row("gDiD-1").rmse < 0.5 * r.row("DiD").rmse,
            "(b) gamma = " + fmt(kDefaultGamma, 2) + " constant: gDiD-1 rmse " + fmt(r.row("gDiD-1").rmse) +
                " < 0.5 x DiD rmse " + fmt(r.row("DiD").rmse));
    const auto g1 = run_monte_carlo(mc(Dgp2Config{.n = 1000, .gamma = EffectSpec::constant(1.0)}, reps, 402,
                                       {"DiD", "gDiD-1"}));
    c.note("(b) with gamma = 1 constant instead: gDiD-1 rmse " + fmt(g1.row("gDiD-1").rmse) + ", DiD rmse " +
           fmt(g1.row("DiD").rmse) + ", DiD bias " + fmt(g1.row("DiD").bias));
  }
  {
    const auto r = run_monte_carlo(mc(Dgp2Config{.n = 1000,
                                                 .gamma = EffectSpec::linear_growth(kDefaultGamma, kDefaultGammaStep)},
                                      reps, 403, {"DiD", "gDiD-1"}));
    c.check(r.row("gDiD-1").rmse < 0.5 * r.row("DiD").rmse,
            "(c) gamma growing: gDiD-1 rmse " + fmt(r.row("gDiD-1").rmse) + " < 0.5 x DiD rmse " +
                fmt(r.row("DiD").rmse));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Property suite

// X ~ N(0, 1), A ~ Bernoulli(expit(0.5 X)), an arm shift of 1 in both periods
// (stable bias) and no treatment effect.
struct StableBiasSample {
  PanelDataset data;
  Vector pi_true, mu1_true, mu0_true;
};

StableBiasSample stable_bias_sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  StableBiasSample s;
  auto& d = s.data;
  const auto m = static_cast<Eigen::Index>(n);
  d.times = {0, 1};
  d.outcomes.resize(m, 2);
  d.covariates.resize(m, 1);
  d.covariate_names = {"x"};
  s.pi_true.resize(m);
  s.mu1_true.resize(m);
  s.mu0_true.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = nd(rng);
    const double p = expit(0.5 * x);
    const int a = ud(rng) < p ? 1 : 0;
    d.unit_ids.push_back(std::to_string(i));
    d.treatment.push_back(a);
    d.covariates(i, 0) = x;
    d.outcomes(i, 0) = x + a + nd(rng);
    d.outcomes(i, 1) = 1.0 + 2.0 * x + a + nd(rng);
    s.pi_true[i] = p;
    s.mu1_true[i] = 1.0 + 2.0 * x;
    s.mu0_true[i] = x;
  }
  return s;
}

std::vector<Eigen::Index> controls(const PanelDataset& d) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < d.n_units(); ++i)
    if (!d.treatment[i]) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

void property_double_robustness(Criterion& c) {
  const int reps = 200;
  double bias_mu = 0.0, bias_pi = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto s = stable_bias_sample(5000, mix_seed(7001, static_cast<std::uint64_t>(r)));
    const auto& d = s.data;
    const auto ctrl = controls(d);
    const Matrix& x = d.covariates;
    Vector a(x.rows());
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = d.treatment[static_cast<std::size_t>(i)];

    // Arm 1: correct outcome models, propensity fixed at a wrong constant.
    NuisanceFits f;
    f.mu1 = fit_linear(x(ctrl, Eigen::all), d.outcome_at(1)(ctrl))->predict(x);
    f.mu0 = fit_linear(x(ctrl, Eigen::all), d.outcome_at(0)(ctrl))->predict(x);
    f.pi = Vector::Constant(x.rows(), 0.3);
    f.pi0 = f.pi;
    bias_mu += estimate_gdid(d, f).tau_hat;

    // Arm 2: correct propensity model, outcome models fixed at zero.
    NuisanceFits g;
    g.pi = fit_logistic(x, a)->predict(x);
    g.pi0 = g.pi;
    g.mu1 = Vector::Zero(x.rows());
    g.mu0 = Vector::Zero(x.rows());
    bias_pi += estimate_gdid(d, g).tau_hat;
  }
  bias_mu /= reps;
  bias_pi /= reps;
  c.check(std::abs(bias_mu) < 0.05, "double robustness, correct outcome models: |bias| " + fmt(std::abs(bias_mu)) +
                                        " < 0.05 (n = 5000, 200 reps)");
  c.check(std::abs(bias_pi) < 0.05, "double robustness, correct propensity: |bias| " + fmt(std::abs(bias_pi)) +
                                        " < 0.05 (n = 5000, 200 reps)");
}

void property_orthogonality(Criterion& c) {
  const auto s = stable_bias_sample(100000, 7100);
  const auto& d = s.data;
  const Vector x = d.covariates.col(0);
  const Vector h_mu = (1.0 + x.array()).matrix();
  const Vector h_pi = Vector::Ones(x.size());
  auto tau_at = [&](double r) {
    NuisanceFits f;
    f.mu1 = s.mu1_true + r * h_mu;
    f.mu0 = s.mu0_true - r * h_mu;
    f.pi.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) f.pi[i] = expit(0.5 * x[i] + r * h_pi[i]);
    f.pi0 = f.pi;
    return estimate_gdid(d, f).tau_hat;
  };
  const std::array<double, 5> rs = {-0.1, -0.05, 0.0, 0.05, 0.1};
  Matrix design(5, 3);
  Vector y(5);
  for (int k = 0; k < 5; ++k) {
    design(k, 0) = 1.0;
    design(k, 1) = rs[static_cast<std::size_t>(k)];
    design(k, 2) = rs[static_cast<std::size_t>(k)] * rs[static_cast<std::size_t>(k)];
    y[k] = tau_at(rs[static_cast<std::size_t>(k)]);
  }
  const Vector coef = design.colPivHouseholderQr().solve(y);
  const double lin = std::abs(coef[1]), quad = std::abs(coef[2]);
  c.check(lin < 10.0 * quad * 0.1, "orthogonality: linear drift " + sci(lin) + " < 10 x quadratic " + sci(quad) +
                                       " x 0.1 (n = 100000)");
}

void property_identities(Criterion& c) {
  // Decomposition identity.
  const auto d = simulate_dgp1({.n = 1000, .seed = 11});
  const auto c0 = build_conditioning(d, 0, 1), cm1 = build_conditioning(d, -1, 1);
  const auto fits = cross_fit_nuisances(d, c0, cm1, LearnerSpec::linear(), make_plan(d.treatment, 5, 1));
  const double gap = std::abs(estimate_gdid(d, fits).tau_hat -
                              (estimate_aipw_att(d, 1, fits).tau_hat - estimate_aipw_att(d, 0, fits).tau_hat));
  c.check(gap < 1e-12, "decomposition identity gap " + sci(gap) + " < 1e-12");

  // Singleton clusters.
  auto dc = d;
  for (std::size_t i = 0; i < dc.n_units(); ++i) dc.cluster_ids.push_back("k" + std::to_string(i));
  ClusterFits cf;
  cf.m1 = fits.mu1;
  cf.m0 = fits.mu0;
  cf.p = fits.pi;
  cf.p0 = fits.pi0;
  const auto clus = estimate_clustered_gdid(dc, index_clusters(dc), cf);
  const auto unit = estimate_gdid(d, fits);
  const double cgap = std::max(std::abs(clus.tau_hat - unit.tau_hat),
                               std::abs(plugin_variance(clus).se - plugin_variance(unit).se));
  c.check(cgap < 1e-12, "singleton-cluster reduction gap " + sci(cgap) + " < 1e-12");

  // One treatment period.
  const auto d2 = simulate_dgp2({.n = 1000, .gamma = EffectSpec::constant(0.5), .seed = 12});
  StaggeredPanel p;
  p.unit_ids = d2.unit_ids;
  p.times = d2.times;
  p.outcomes = d2.outcomes;
  p.covariates = d2.covariates;
  p.treatment = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(d2.n_units()), d2.outcomes.cols());
  for (std::size_t i = 0; i < d2.n_units(); ++i) p.treatment(static_cast<Eigen::Index>(i), d2.outcomes.cols() - 1) = d2.treatment[i];
  GroupTimeOptions go;
  go.seed = 5;
  const auto gt = fit_group_time(p, TreatmentHistory{{1}}, 1, go);
  const auto f2 = cross_fit_nuisances(d2, build_conditioning(d2, 0, 1), build_conditioning(d2, -1, 1),
                                      LearnerSpec::linear(), make_plan(d2.treatment, 5, 5));
  const double direct = estimate_gdid(d2, f2).tau_hat;
  c.check(gt.estimate.tau_hat == direct, "one-period staggered reduction: " + fmt(gt.estimate.tau_hat, 12) +
                                             " == " + fmt(direct, 12));

  // Bootstrap conditional mean.
  BootstrapConfig bc;
  bc.B = 10000;
  bc.seed = 13;
  bc.threads = threads();
  const auto boot = multiplier_bootstrap(unit, bc);
  const double mean = std::accumulate(boot.replicates.begin(), boot.replicates.end(), 0.0) / bc.B;
  const double bound = 3.0 * boot.variance.se / std::sqrt(static_cast<double>(bc.B));
  c.check(std::abs(mean - unit.tau_hat) < bound,
          "bootstrap mean offset " + sci(std::abs(mean - unit.tau_hat)) + " < 3 SE " + sci(bound) + " (B = 10000)");
}

void property_honesty_and_stacking(Criterion& c) {
  const auto d = simulate_dgp1({.n = 600, .observed = Observed::Nonlinear, .seed = 21});
  const auto c0 = build_conditioning(d, 0, 1), cm1 = build_conditioning(d, -1, 1);
  CrossFitOptions opt;
  opt.treated_arm = true;
  opt.threads = threads();
  std::size_t violations = 0;
  for (int k : {2, 5, 10}) {
    const auto fits = cross_fit_nuisances(d, c0, cm1, LearnerSpec::default_ensemble(), make_plan(d.treatment, k, 3), opt);
    violations += audit_cross_fit(fits);
  }
  c.check(violations == 0, "cross-fit honesty audit: " + std::to_string(violations) + " violations over K = 2, 5, 10");

  const Matrix& x = c0.features;
  const Vector y = d.outcome_at(1);
  Vector a(x.rows());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = d.treatment[static_cast<std::size_t>(i)];
  const std::vector<LearnerSpec> reg = {LearnerSpec::linear(), LearnerSpec::knn(15), LearnerSpec::boosted_stumps(100, 0.1)};
  const std::vector<LearnerSpec> prop = {LearnerSpec::logistic(), LearnerSpec::knn(15),
                                         LearnerSpec::boosted_stumps(100, 0.1)};
  double worst_sum = 0.0, worst_gap = -1e300, worst_neg = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& [cands, task, target] :
         {std::tuple{reg, Task::Regression, y}, std::tuple{prop, Task::Propensity, a}}) {
      const auto fit = fit_ensemble(cands, x, target, 5, task, seed);
      double sum = 0.0;
      for (double w : fit.weights.weights) {
        sum += w;
        worst_neg = std::min(worst_neg, w);
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      const double best = *std::min_element(fit.weights.cv_risk.begin(), fit.weights.cv_risk.end());
      worst_gap = std::max(worst_gap, fit.weights.ensemble_risk - best);
    }
  }
  c.check(worst_sum < 1e-8 && worst_neg >= 0.0,
          "ensemble weights on the simplex: |sum - 1| " + sci(worst_sum) + ", min weight " + sci(worst_neg));
  c.check(worst_gap <= 1e-8, "ensemble cv risk minus best candidate risk " + sci(worst_gap) + " <= 1e-8");
}

// ---------------------------------------------------------------------------
// Hand oracles

PanelDataset four_units() {
  PanelDataset d;
  d.unit_ids = {"a", "b", "c", "d"};
  d.times = {0, 1};
  d.outcomes.resize(4, 2);
  d.outcomes << 2.0, 5.0, 1.0, 3.0, 1.5, 2.5, 0.5, 1.0;
  d.covariates.resize(4, 0);
  d.treatment = {1, 1, 0, 0};
  return d;
}

NuisanceFits four_unit_fits() {
  NuisanceFits f;
  f.pi = (Vector(4) << 0.5, 0.6, 0.3, 0.25).finished();
  f.pi0 = (Vector(4) << 0.4, 0.5, 0.2, 0.3).finished();
  f.mu1 = (Vector(4) << 3.0, 2.0, 2.2, 1.1).finished();
  f.mu0 = (Vector(4) << 1.5, 1.0, 1.2, 0.4).finished();
  f.mu1_treated = (Vector(4) << 4.8, 3.1, 2.9, 2.0).finished();
  f.mu0_treated = (Vector(4) << 1.9, 1.1, 1.4, 0.8).finished();
  return f;
}

NuisanceFits fits_rows(const std::vector<std::array<double, 4>>& rows) {
  NuisanceFits f;
  const auto n = static_cast<Eigen::Index>(rows.size());
  f.pi.resize(n);
  f.pi0.resize(n);
  f.mu1.resize(n);
  f.mu0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    f.pi[i] = r[0];
    f.pi0[i] = r[1];
    f.mu1[i] = r[2];
    f.mu0[i] = r[3];
  }
  return f;
}

Criterion criterion6() {
  Criterion c{6, "hand-computed oracles", {}, {}};
  auto near = [&](const std::string& what, double got, double want) {
    c.check(std::abs(got - want) <= 1e-10, what + " " + fmt(got, 12) + " vs oracle " + fmt(want, 12));
  };
  const auto d = four_units();
  const auto f = four_unit_fits();
  near("4-unit post-period AIPW", estimate_aipw_att(d, 1, f).tau_hat, 1.4523809523809523);
  near("4-unit pre-period AIPW", estimate_aipw_att(d, 0, f).tau_hat, 0.19107142857142856);
  const auto g = estimate_gdid(d, f);
  near("4-unit gDiD", g.tau_hat, 2119.0 / 1680.0);
  near("4-unit plug-in se", plugin_variance(g).se, 0.9025900075091285);
  near("4-unit DiD", estimate_did(d).tau_hat, 1.75);
  near("4-unit ATE", estimate_ate_gdid(d, f).tau_hat, 0.9514880952380952);
  ImputationInputs in;
  in.y0 = 2.0;
  in.mu1_w0 = 3.0;
  in.mu0_wm1 = 1.5;
  near("4-unit imputation for unit a", impute_counterfactual(ImputationKind::EtaGdid, in), 3.5);

  StaggeredPanel p;
  p.unit_ids = {"u1", "u2", "u3", "u4", "u5", "u6"};
  p.times = {0, 1, 2};
  p.outcomes.resize(6, 3);
  p.outcomes << 1, 2, 4, 0, 1, 3, 2, 5, 7, 1, 3, 4, 1, 2, 2, 0, 1, 2;
  p.covariates.resize(6, 0);
  p.treatment.resize(6, 3);
  p.treatment << 0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0;
  const TreatmentHistory h01{{0, 1}}, h11{{1, 1}};
  const auto e01 =
      estimate_group_time(p, h01, 2, fits_rows({{.5, .4, 3, 1.5}, {.4, .5, 2, 1}, {.2, .2, 2, 1.5}, {.3, .25, 1.5, .5}}));
  const auto e11 =
      estimate_group_time(p, h11, 2, fits_rows({{.6, .5, 5, 3}, {.5, .4, 4, 2}, {.25, .2, 2, 1}, {.2, .3, 1.5, .5}}));
  near("6-unit group-time 01", e01.estimate.tau_hat, 265.0 / 336.0);
  near("6-unit group-time 11", e11.estimate.tau_hat, 205.0 / 112.0);
  const auto agg = aggregate_effects({e01, e11}, preset_weights(WeightKind::TreatedAtT, {h01, h11}, 2));
  near("6-unit aggregate", agg.tau_hat, 1.3095238095238095);
  near("6-unit aggregate plug-in se", plugin_variance(agg).se, 1.044077779265189);
  return c;
}

// ---------------------------------------------------------------------------
// Coverage and determinism

Criterion criterion7(int reps) {
  Criterion c{7, "confidence interval coverage for gDiD-1", {}, {}};
  auto cfg = mc(Dgp2Config{.n = 1000, .gamma = EffectSpec::zero()}, reps, 701, {"gDiD-1"});
  cfg.inference = {VarianceMethod::Plugin, VarianceMethod::MultiplierBootstrap};
  cfg.bootstrap.B = 1000;
  const auto r = run_monte_carlo(cfg);
  const auto& plug = r.row("gDiD-1", VarianceMethod::Plugin);
  const auto& boot = r.row("gDiD-1", VarianceMethod::MultiplierBootstrap);
  c.check(plug.coverage >= 90.0, "plug-in coverage " + fmt(plug.coverage, 1) + "% >= 90%");
  c.check(boot.coverage >= 90.0, "bootstrap coverage " + fmt(boot.coverage, 1) + "% >= 90%");
  c.note("plug-in mean length " + fmt(plug.ci_length) + ", bootstrap mean length " + fmt(boot.ci_length));
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GDID_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Criterion criterion8() {
  Criterion c{8, "determinism across runs and thread counts", {}, {}};
  auto cfg = mc(Dgp1Config{.n = 500, .zeta = 0.1}, 20, 801, kAttPresets);
  cfg.estimators.push_back(preset_by_name("ATE-gDiD-1"));
  cfg.inference = {VarianceMethod::Plugin, VarianceMethod::MultiplierBootstrap};
  cfg.bootstrap.B = 200;
  cfg.threads = 1;
  const auto a = run_monte_carlo(cfg);
  const auto b = run_monte_carlo(cfg);
  cfg.threads = 4;
  const auto t4 = run_monte_carlo(cfg);
  c.check(report_csv(a) == report_csv(b) && report_json(a) == report_json(b), "library reports identical across runs");
  c.check(report_csv(a) == report_csv(t4) && report_json(a) == report_json(t4),
          "library reports identical for 1 and 4 threads");

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "gdid_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto toml = dir / "experiment.toml";
  std::ofstream(toml) << "[experiment]\nreps = 10\nseed = 802\n"
                         "estimators = [\"DiD\", \"gDiD-1\", \"Ign-1\"]\ninference = [\"plugin\", \"bootstrap\"]\n"
                         "[dgp]\ndesign = \"dgp2\"\nn = 400\ngamma = \"linear_growth\"\n"
                         "[nuisance]\nlearner = \"ensemble\"\n[bootstrap]\nB = 200\n";
  bool ran = true;
  std::vector<std::pair<std::string, std::string>> outputs;
  for (const auto& [name, t] : {std::pair{"run1", 1}, std::pair{"run2", 1}, std::pair{"run3", 3}}) {
    const auto out = dir / name;
    ran = ran && run_cli("--threads " + std::to_string(t) + " --output-dir " + out.string() + " simulate --config " +
                         toml.string()) == 0;
    outputs.emplace_back(slurp(out / "report.csv"), slurp(out / "report.json"));
  }
  c.check(ran, "command-line simulate runs succeed");
  c.check(ran && !outputs[0].first.empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2],
          "command-line report.csv and report.json byte-identical across runs and --threads 1/3");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  // A reduced replicate count can be passed for quick local runs; ctest uses the full counts.
  const int scale_div = argc > 1 ? std::max(1, std::atoi(argv[1])) : 1;
  const int reps500 = 500 / scale_div, reps200 = 200 / scale_div;
  std::cout << "acceptance run with " << threads() << " threads, " << reps500 << "/" << reps200 << " replicates\n";

  int failed = 0;
  auto timed = [&](const std::function<Criterion()>& f) {
    const auto start = std::chrono::steady_clock::now();
    Criterion c{0, "", {}, {}};
    try {
      c = f();
    } catch (const std::exception& e) {
      c.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!report(c, secs)) ++failed;
  };

  MonteCarloReport zeta0;
  timed([&] {
    zeta0 = dgp1_report(0.0, reps500, 101);
    return criterion1(zeta0);
  });
  timed([&] { return criterion2(dgp1_report(0.1, reps500, 201)); });
  timed([&] {
    if (zeta0.rows.empty()) throw std::runtime_error("zeta = 0 report unavailable");
    return criterion3(zeta0, dgp1_report(0.3, reps200, 301));
  });
  timed([&] { return criterion4(reps500); });
  timed([&] {
    Criterion c{5, "property suite", {}, {}};
    property_identities(c);
    property_double_robustness(c);
    property_orthogonality(c);
    property_honesty_and_stacking(c);
    return c;
  });
  timed([] { return criterion6(); });
  timed([&] { return criterion7(reps500); });
  timed([] { return criterion8(); });

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
