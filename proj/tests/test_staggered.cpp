#include "gdid/inference.hpp"
#include "gdid/simulation.hpp"
#include "gdid/staggered.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace gdid;
using gdid::test::code_of;

namespace {

TreatmentHistory h(std::vector<int> p) { return TreatmentHistory{std::move(p)}; }

// Six units over periods 0, 1, 2: two adopt at 2, two at 1, two never.
StaggeredPanel six_units() {
  StaggeredPanel p;
  p.unit_ids = {"u1", "u2", "u3", "u4", "u5", "u6"};
  p.times = {0, 1, 2};
  p.outcomes.resize(6, 3);
  p.outcomes << 1, 2, 4, 0, 1, 3, 2, 5, 7, 1, 3, 4, 1, 2, 2, 0, 1, 2;
  p.covariates.resize(6, 0);
  p.treatment.resize(6, 3);
  p.treatment << 0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0;
  return p;
}

NuisanceFits fits_from(const std::vector<std::array<double, 4>>& rows) {
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
  f.plan = CrossFitPlan::none();
  return f;
}

std::vector<GroupTimeEffect> oracle_effects() {
  const auto p = six_units();
  auto e01 = estimate_group_time(p, h({0, 1}), 2, fits_from({{.5, .4, 3, 1.5}, {.4, .5, 2, 1}, {.2, .2, 2, 1.5}, {.3, .25, 1.5, .5}}));
  auto e11 = estimate_group_time(p, h({1, 1}), 2, fits_from({{.6, .5, 5, 3}, {.5, .4, 4, 2}, {.25, .2, 2, 1}, {.2, .3, 1.5, .5}}));
  return {e01, e11};
}

}  // namespace

TEST_CASE("history labels and anchors", "[staggered]") {
  CHECK(h({0, 1, 1}).label() == "011");
  CHECK(h({0, 1, 1}).adoption_time() == 2);
  CHECK(h({0, 1, 1}).last_pre_period() == 1);
  CHECK_FALSE(h({0, 0}).adoption_time().has_value());
  CHECK(h({1, 0}).last_pre_period() == 0);
}

TEST_CASE("enumeration finds observed histories and applies the admissibility rules", "[staggered]") {
  const auto p = six_units();
  const auto set = enumerate_histories(p, 2, 1);
  CHECK(set.never_treated == 2);
  REQUIRE(set.admissible.size() == 2);
  CHECK(set.admissible[0] == h({0, 1}));
  CHECK(set.admissible[1] == h({1, 1}));
  CHECK(set.group_sizes == std::vector<std::size_t>{2, 2});

  const auto strict = enumerate_histories(p, 2, 3);
  CHECK(strict.admissible.empty());
  CHECK(strict.excluded.size() == 2);

  // History 11 is anchored at period 0, the first period, so one lag is too many.
  const auto lagged = enumerate_histories(p, 2, 1, 1);
  REQUIRE(lagged.admissible.size() == 1);
  CHECK(lagged.admissible[0] == h({0, 1}));
  CHECK(lagged.excluded.front().history == h({1, 1}));

  const auto t1 = enumerate_histories(p, 1, 1);
  REQUIRE(t1.admissible.size() == 1);
  CHECK(t1.admissible[0] == h({1}));
  CHECK(t1.never_treated == 4);
}

TEST_CASE("non-absorbing paths are histories of their own", "[staggered]") {
  auto p = six_units();
  p.treatment(3, 2) = 0;  // u4 switches off
  const auto set = enumerate_histories(p, 2, 1);
  REQUIRE(set.admissible.size() == 3);
  CHECK(set.admissible[1] == h({1, 0}));
  CHECK(set.admissible[2] == h({1, 1}));

  const auto sim = simulate_staggered({.n = 2000, .window = 3, .switch_off = 0.3, .seed = 5});
  const auto hs = enumerate_histories(sim, 3, 5);
  bool found = false;
  for (const auto& x : hs.admissible) found = found || x == h({1, 0, 0}) || x == h({1, 1, 0});
  CHECK(found);
}

TEST_CASE("a panel without never-treated units is rejected", "[staggered]") {
  auto p = six_units();
  p.treatment(4, 2) = 1;
  p.treatment(5, 1) = 1;
  CHECK(code_of([&] { enumerate_histories(p, 2, 1); }) == ErrorCode::NoNeverTreatedUnits);
  CHECK(code_of([&] { group_time_panel(six_units(), h({1, 0}), 2); }) == ErrorCode::HistoryNotInXi);
  CHECK(code_of([&] { group_time_panel(six_units(), h({1}), 2); }) == ErrorCode::HistoryNotInXi);
}

TEST_CASE("group-time panels anchor at the last pre-adoption period", "[staggered]") {
  const auto gp = group_time_panel(six_units(), h({0, 1}), 2);
  CHECK(gp.units == std::vector<std::size_t>{0, 1, 4, 5});
  CHECK(gp.data.treatment == std::vector<int>{1, 1, 0, 0});
  CHECK(gp.data.times == std::vector<int>{-1, 0, 1});
  CHECK(gp.data.outcome_at(0)[0] == 2.0);
  CHECK(gp.data.outcome_at(1)[0] == 4.0);
}

TEST_CASE("hand-computed group-time oracles", "[staggered]") {
  const auto e = oracle_effects();
  CHECK(e[0].estimate.tau_hat == Catch::Approx(265.0 / 336.0).epsilon(1e-14));
  CHECK(e[1].estimate.tau_hat == Catch::Approx(205.0 / 112.0).epsilon(1e-14));
  CHECK(e[0].n_in_group == 2);
  const auto w = preset_weights(WeightKind::TreatedAtT, {h({0, 1}), h({1, 1})}, 2);
  const auto agg = aggregate_effects(e, w);
  CHECK(agg.tau_hat == Catch::Approx(1.3095238095238095).epsilon(1e-14));
  CHECK(agg.influence.sum() / agg.denominator == Catch::Approx(agg.tau_hat).epsilon(1e-13));
  CHECK(plugin_variance(agg).se == Catch::Approx(1.044077779265189).epsilon(1e-12));
}

TEST_CASE("one treatment period reduces to the two-period estimator", "[staggered]") {
  const auto d = simulate_dgp2({.n = 400, .gamma = EffectSpec::constant(0.5), .seed = 14});
  StaggeredPanel p;
  p.unit_ids = d.unit_ids;
  p.times = d.times;
  p.outcomes = d.outcomes;
  p.covariates = d.covariates;
  p.treatment = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(d.n_units()), d.outcomes.cols());
  for (std::size_t i = 0; i < d.n_units(); ++i) p.treatment(static_cast<Eigen::Index>(i), d.outcomes.cols() - 1) = d.treatment[i];

  GroupTimeOptions opt;
  opt.lag_depth = 1;
  opt.folds = 5;
  opt.seed = 77;
  const auto gt = fit_group_time(p, h({1}), 1, opt);
  const auto fits = cross_fit_nuisances(d, build_conditioning(d, 0, 1), build_conditioning(d, -1, 1),
                                        LearnerSpec::linear(), make_plan(d.treatment, 5, 77));
  const auto direct = estimate_gdid(d, fits);
  CHECK(std::abs(gt.estimate.tau_hat - direct.tau_hat) < 1e-12);
  CHECK(gt.units.size() == d.n_units());
}

TEST_CASE("preset weights", "[staggered]") {
  const std::vector<TreatmentHistory> hs = {h({0, 1}), h({1, 0}), h({1, 1})};
  auto weight_of = [](const AggregationWeights& w) {
    std::vector<double> out;
    for (const auto& e : w.entries) out.push_back(e.second);
    return out;
  };
  CHECK(weight_of(preset_weights(WeightKind::TreatedAtT, hs, 2)) == std::vector<double>{0.5, 0.0, 0.5});
  CHECK(weight_of(preset_weights(WeightKind::AdoptedAtS, hs, 2, 1)) == std::vector<double>{0.0, 0.5, 0.5});
  CHECK(weight_of(preset_weights(WeightKind::AdoptedAtSAndTreatedAtT, hs, 2, 1)) == std::vector<double>{0.0, 0.0, 1.0});
  const auto sized = preset_weights(WeightKind::TreatedAtT, {h({0, 1}), h({1, 1})}, 2, std::nullopt, {10, 30}, true);
  CHECK(weight_of(sized) == std::vector<double>{0.25, 0.75});
  CHECK(code_of([&] { preset_weights(WeightKind::AdoptedAtS, hs, 2, 3); }) == ErrorCode::EmptySelection);
  CHECK(code_of([&] { preset_weights(WeightKind::AdoptedAtS, hs, 2); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("aggregation is a convex combination", "[staggered]") {
  auto make = [](const TreatmentHistory& hist, double tau) {
    GroupTimeEffect e;
    e.history = hist;
    e.estimate.tau_hat = tau;
    e.estimate.denominator = 2;
    e.estimate.influence = Vector::Constant(2, tau);
    e.estimate.offsets = Vector::Constant(2, tau);
    e.units = {0, 1};
    e.n_units_total = 2;
    return e;
  };
  const std::vector<GroupTimeEffect> effects = {make(h({0, 1}), 2.0), make(h({1, 1}), 4.0)};
  AggregationWeights w;
  w.entries = {{h({0, 1}), 0.5}, {h({1, 1}), 0.5}};
  CHECK(aggregate_effects(effects, w).tau_hat == Catch::Approx(3.0));
  for (double a : {0.0, 0.1, 0.7, 1.0}) {
    w.entries = {{h({0, 1}), a}, {h({1, 1}), 1.0 - a}};
    const double tau = aggregate_effects(effects, w).tau_hat;
    CHECK(tau >= 2.0 - 1e-12);
    CHECK(tau <= 4.0 + 1e-12);
  }
  w.entries = {{h({0, 1}), 0.5}, {h({1, 0}), 0.5}};
  CHECK(code_of([&] { aggregate_effects(effects, w); }) == ErrorCode::WeightMismatch);
  w.entries = {{h({0, 1}), 0.5}, {h({1, 1}), 0.6}};
  CHECK(code_of([&] { aggregate_effects(effects, w); }) == ErrorCode::WeightMismatch);
}

TEST_CASE("staggered csv loader shifts calendar time to the first treated period", "[staggered]") {
  const auto dir = std::filesystem::temp_directory_path() / "gdid_staggered_tests";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "stag.csv").string();
  std::ofstream(path) << "unit,time,outcome,treatment\n"
                         "a,2010,1,0\na,2011,2,0\na,2012,3,1\n"
                         "b,2010,1,0\nb,2011,2,1\nb,2012,3,1\n"
                         "c,2010,0,0\nc,2011,0,0\nc,2012,0,0\n";
  CsvSchema s;
  const auto p = load_staggered_csv(path, s);
  CHECK(p.times == std::vector<int>{0, 1, 2});
  CHECK(p.path(0, 2) == std::vector<int>{0, 1});
  CHECK(p.path(1, 2) == std::vector<int>{1, 1});
}
