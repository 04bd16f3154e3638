#include "gdid/estimators.hpp"
#include "gdid/simulation.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <numeric>
#include <random>

using namespace gdid;
using gdid::test::code_of;

TEST_CASE("hand-computed AIPW oracles on four units", "[estimators]") {
  const auto d = test::four_units();
  const auto f = test::four_unit_fits();
  CHECK(aipw_summand(5.0, 1, 0.5, 3.0) == Catch::Approx(5.0 - 0.5 * 3.0 / 0.5));
  const auto post = estimate_aipw_att(d, 1, f);
  const auto pre = estimate_aipw_att(d, 0, f);
  const auto g = estimate_gdid(d, f);
  CHECK(post.tau_hat == Catch::Approx(1.4523809523809523).epsilon(1e-14));
  CHECK(pre.tau_hat == Catch::Approx(0.19107142857142856).epsilon(1e-14));
  CHECK(g.tau_hat == Catch::Approx(2119.0 / 1680.0).epsilon(1e-14));
  CHECK(g.estimand == Estimand::Gdid);
  CHECK(g.n == 4);
  CHECK(g.n_treated == 2);
  CHECK(g.denominator == 2.0);
}

TEST_CASE("gdid equals post minus pre summand by summand", "[estimators]") {
  const auto d = simulate_dgp2({.n = 300, .gamma = EffectSpec::constant(0.5), .seed = 4});
  const auto c0 = build_conditioning(d, 0, 1), cm1 = build_conditioning(d, -1, 1);
  const auto fits = cross_fit_nuisances(d, c0, cm1, LearnerSpec::linear(), make_plan(d.treatment, 5, 1));
  const auto post = estimate_aipw_att(d, 1, fits);
  const auto pre = estimate_aipw_att(d, 0, fits);
  const auto g = estimate_gdid(d, fits);
  CHECK(std::abs(g.tau_hat - (post.tau_hat - pre.tau_hat)) < 1e-12);
  CHECK((g.influence - (post.influence - pre.influence)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identical periods with matching nuisances give zero", "[estimators]") {
  auto d = test::four_units();
  d.outcomes.col(1) = d.outcomes.col(0);
  auto f = test::four_unit_fits();
  f.pi0 = f.pi;
  f.mu0 = f.mu1;
  CHECK(std::abs(estimate_gdid(d, f).tau_hat) < 1e-14);
}

TEST_CASE("correct outcome model for controls leaves treated residuals", "[estimators]") {
  // mu equal to the control outcomes removes every control summand.
  const auto d = test::four_units();
  auto f = test::four_unit_fits();
  f.mu1 << 3.0, 2.0, 2.5, 1.0;
  const auto post = estimate_aipw_att(d, 1, f);
  CHECK(post.influence[2] == Catch::Approx(0.0).margin(1e-14));
  CHECK(post.influence[3] == Catch::Approx(0.0).margin(1e-14));
  CHECK(post.tau_hat == Catch::Approx(((5.0 - 3.0) + (3.0 - 2.0)) / 2.0));
}

TEST_CASE("difference in differences matches the textbook formula", "[estimators]") {
  const auto d = test::four_units();
  const auto e = estimate_did(d);
  CHECK(e.tau_hat == Catch::Approx(1.75).epsilon(1e-14));
  CHECK(e.influence.sum() / 2.0 == Catch::Approx(1.75));
}

TEST_CASE("covariate-free cdid reduces to difference in differences", "[estimators]") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  PanelDataset d;
  d.times = {0, 1};
  d.outcomes.resize(50, 2);
  d.covariates.resize(50, 0);
  for (int i = 0; i < 50; ++i) {
    d.unit_ids.push_back("u" + std::to_string(i));
    d.treatment.push_back(i < 18);
    d.outcomes(i, 0) = nd(rng);
    d.outcomes(i, 1) = d.outcomes(i, 0) + (i < 18 ? 1.0 : 0.3) + nd(rng);
  }
  const auto c0 = build_conditioning(d, 0, 0), cm1 = build_conditioning(d, -1, 0);
  const auto fits = cross_fit_nuisances(d, c0, cm1, LearnerSpec::linear(), CrossFitPlan::none());
  CHECK(fits.pi[0] == Catch::Approx(18.0 / 50.0).epsilon(1e-8));
  const auto c = estimate_cdid(d, fits);
  CHECK(c.estimand == Estimand::Cdid);
  CHECK(c.tau_hat == Catch::Approx(estimate_did(d).tau_hat).epsilon(1e-10));
}

TEST_CASE("cdid refuses fits that condition on lagged outcomes", "[estimators]") {
  auto f = test::four_unit_fits();
  f.lag_depth = 1;
  CHECK(code_of([&] { estimate_cdid(test::four_units(), f); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("average treatment effect oracle", "[estimators]") {
  const auto d = test::four_units();
  const auto e = estimate_ate_gdid(d, test::four_unit_fits());
  CHECK(e.tau_hat == Catch::Approx(0.9514880952380952).epsilon(1e-14));
  CHECK(e.denominator == 4.0);
  auto f = test::four_unit_fits();
  f.mu1_treated.resize(0);
  CHECK(code_of([&] { estimate_ate_gdid(d, f); }) == ErrorCode::MissingTreatedArmFits);
}

TEST_CASE("imputation formulas", "[estimators]") {
  ImputationInputs in;
  in.y0 = 2.0;
  in.mu1_w0 = 3.0;
  in.mu0_wm1 = 1.5;
  CHECK(impute_counterfactual(ImputationKind::EtaGdid, in) == Catch::Approx(3.5));
  CHECK(impute_counterfactual(ImputationKind::EtaIgn, in) == 3.0);
  CHECK(code_of([&] { impute_counterfactual(ImputationKind::EtaCdid, in); }) == ErrorCode::MissingComponent);
  in.delta = 0.25;
  CHECK(impute_counterfactual(ImputationKind::EtaCdid, in) == 2.25);
}

TEST_CASE("estimates are invariant to unit order and outcome location", "[estimators]") {
  const auto d = test::four_units();
  const auto f = test::four_unit_fits();
  const double tau = estimate_gdid(d, f).tau_hat;

  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  const auto dp = d.subset(perm);
  auto fp = f;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto j = static_cast<Eigen::Index>(perm[i]);
    const auto k = static_cast<Eigen::Index>(i);
    fp.pi[k] = f.pi[j];
    fp.pi0[k] = f.pi0[j];
    fp.mu1[k] = f.mu1[j];
    fp.mu0[k] = f.mu0[j];
  }
  CHECK(estimate_gdid(dp, fp).tau_hat == Catch::Approx(tau).epsilon(1e-14));

  auto ds = d;
  auto fs = f;
  ds.outcomes.col(0).array() += 7.0;
  fs.mu0.array() += 7.0;
  ds.outcomes.col(1).array() -= 3.0;
  fs.mu1.array() -= 3.0;
  CHECK(estimate_gdid(ds, fs).tau_hat == Catch::Approx(tau).epsilon(1e-12));
}

TEST_CASE("missing or misshapen fits are rejected", "[estimators]") {
  const auto d = test::four_units();
  auto f = test::four_unit_fits();
  f.mu0.resize(3);
  CHECK(code_of([&] { estimate_gdid(d, f); }) == ErrorCode::MissingFits);
  CHECK(code_of([&] { estimate_gdid(d, test::four_unit_fits(), 0.7); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("json output carries the documented fields", "[estimators]") {
  auto e = estimate_gdid(test::four_units(), test::four_unit_fits());
  e.config_digest = digest("estimand=gdid");
  const auto j = nlohmann::json::parse(to_json(e));
  for (const char* key : {"estimand", "tau_hat", "se", "ci_lower", "ci_upper", "n", "n_treated", "trim_eps",
                          "config_digest"})
    CHECK(j.contains(key));
  CHECK(j["estimand"] == "gdid");
  CHECK(j["config_digest"].get<std::string>().size() == 16);
  CHECK(digest("a") != digest("b"));
  CHECK(digest("a") == digest("a"));
}
