#include "gdid/errors.hpp"
#include "internal.hpp"

#include <algorithm>
#include <numeric>

namespace gdid {

CrossFitPlan make_plan(const std::vector<int>& treatment, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "cross-fitting needs at least 2 folds");
  if (static_cast<std::size_t>(folds) > treatment.size())
    throw Error(ErrorCode::InvalidArgument, "more folds than units");
  CrossFitPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.fold_of.assign(treatment.size(), 0);
  auto rng = make_rng(mix_seed(seed, 0xF01D));
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < treatment.size(); ++i) (treatment[i] ? treated : control).push_back(i);
  std::shuffle(treated.begin(), treated.end(), rng);
  std::shuffle(control.begin(), control.end(), rng);
  // Round robin continues from the treated arm into the control arm, so the
  // overall fold sizes differ by at most one.
  std::size_t slot = 0;
  for (auto i : treated) plan.fold_of[i] = static_cast<int>(slot++ % static_cast<std::size_t>(folds));
  for (auto i : control) plan.fold_of[i] = static_cast<int>(slot++ % static_cast<std::size_t>(folds));
  return plan;
}

namespace {

enum Nuisance : int { kMu1 = 0, kMu0, kPi, kPi0, kMu1Treated, kMu0Treated, kCount };

const char* nuisance_name(int k) {
  static const char* names[] = {"mu1", "mu0", "pi", "pi0", "mu1_treated", "mu0_treated"};
  return names[k];
}

struct Job {
  int fold;
  int nuisance;
};

}  // namespace

NuisanceFits cross_fit_nuisances(const PanelDataset& dataset, const ConditioningSet& cond0,
                                 const ConditioningSet& cond_m1, const LearnerSpec& spec, const CrossFitPlan& plan,
                                 const CrossFitOptions& options) {
  spec.check();
  const auto n = static_cast<Eigen::Index>(dataset.n_units());
  if (cond0.features.rows() != n || cond_m1.features.rows() != n)
    throw Error(ErrorCode::InvalidArgument, "conditioning sets do not match the dataset");
  if (!plan.no_split() && plan.fold_of.size() != dataset.n_units())
    throw Error(ErrorCode::InvalidArgument, "cross-fit plan does not partition the dataset's units");
  if (!(options.trim_eps > 0.0 && options.trim_eps < 0.5))
    throw Error(ErrorCode::InvalidArgument, "trim_eps must lie in (0, 0.5)");

  const int folds = plan.no_split() ? 1 : plan.folds;
  const Vector y1 = dataset.outcome_at(1);
  const Vector y0 = dataset.outcome_at(0);
  Vector a(n);
  for (Eigen::Index i = 0; i < n; ++i) a[i] = dataset.treatment[static_cast<std::size_t>(i)];

  std::vector<std::vector<Eigen::Index>> train_all(static_cast<std::size_t>(folds)),
      train_ctrl(static_cast<std::size_t>(folds)), train_trt(static_cast<std::size_t>(folds)),
      test(static_cast<std::size_t>(folds));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int fi = plan.no_split() ? -1 : plan.fold_of[static_cast<std::size_t>(i)];
    if (fi >= folds || (!plan.no_split() && fi < 0)) throw Error(ErrorCode::InvalidArgument, "fold index out of range");
    for (int f = 0; f < folds; ++f) {
      if (fi == f) continue;
      train_all[static_cast<std::size_t>(f)].push_back(i);
      (a[i] > 0.5 ? train_trt : train_ctrl)[static_cast<std::size_t>(f)].push_back(i);
    }
    test[static_cast<std::size_t>(plan.no_split() ? 0 : fi)].push_back(i);
  }
  for (int f = 0; f < folds; ++f) {
    if (train_ctrl[static_cast<std::size_t>(f)].size() < 2)
      throw Error(ErrorCode::FoldWithoutControls,
                  "training complement of fold " + std::to_string(f) + " has fewer than 2 control units");
    if (train_trt[static_cast<std::size_t>(f)].empty())
      throw Error(ErrorCode::InvalidArgument, "training complement of fold " + std::to_string(f) + " has no treated units");
    if (options.treated_arm && train_trt[static_cast<std::size_t>(f)].size() < 2)
      throw Error(ErrorCode::MissingTreatedArmFits,
                  "training complement of fold " + std::to_string(f) + " has fewer than 2 treated units");
  }

  const int kinds = options.treated_arm ? kCount : kMu1Treated;
  std::vector<Job> jobs;
  for (int f = 0; f < folds; ++f)
    for (int k = 0; k < kinds; ++k) jobs.push_back({f, k});

  std::vector<ModelPtr> models(jobs.size());
  std::vector<std::vector<std::string>> warnings(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t j) {
    const auto [f, k] = jobs[j];
    const auto fs = static_cast<std::size_t>(f);
    const std::uint64_t seed = mix_seed(plan.seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(k) + 1);
    const Matrix& x = (k == kMu1 || k == kPi || k == kMu1Treated) ? cond0.features : cond_m1.features;
    const Vector& y = (k == kMu1 || k == kMu1Treated) ? y1 : y0;
    FitOutcome fit;
    if (k == kPi || k == kPi0) {
      const auto& idx = train_all[fs];
      fit = fit_propensity(x(idx, Eigen::all), a(idx), spec, seed);
    } else {
      const auto& idx = (k == kMu1 || k == kMu0) ? train_ctrl[fs] : train_trt[fs];
      fit = fit_regression(x(idx, Eigen::all), y(idx), spec, seed);
    }
    for (auto& w : fit.warnings) warnings[j].push_back(std::string(nuisance_name(k)) + " fold " + std::to_string(f) + ": " + w);
    models[j] = std::move(fit.model);
  });

  NuisanceFits out;
  out.plan = plan;
  out.trim_eps = options.trim_eps;
  out.lag_depth = cond0.lag_depth;
  out.mu1.resize(n);
  out.mu0.resize(n);
  out.pi.resize(n);
  out.pi0.resize(n);
  if (options.treated_arm) {
    out.mu1_treated.resize(n);
    out.mu0_treated.resize(n);
  }
  const double lo = options.two_sided_trim ? options.trim_eps : 0.0;
  const double hi = 1.0 - options.trim_eps;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto [f, k] = jobs[j];
    const auto& idx = test[static_cast<std::size_t>(f)];
    if (idx.empty()) continue;
    const Matrix& x = (k == kMu1 || k == kPi || k == kMu1Treated) ? cond0.features : cond_m1.features;
    Vector pred = models[j]->predict(x(idx, Eigen::all));
    Vector* target = nullptr;
    switch (k) {
      case kMu1: target = &out.mu1; break;
      case kMu0: target = &out.mu0; break;
      case kPi: target = &out.pi; break;
      case kPi0: target = &out.pi0; break;
      case kMu1Treated: target = &out.mu1_treated; break;
      default: target = &out.mu0_treated; break;
    }
    if (k == kPi || k == kPi0) pred = pred.cwiseMax(lo).cwiseMin(hi);
    (*target)(idx) = pred;
    for (auto& w : warnings[j]) out.warnings.push_back(std::move(w));
  }

  for (int f = 0; f < folds; ++f) {
    const auto fs = static_cast<std::size_t>(f);
    auto as_units = [](const std::vector<Eigen::Index>& v) {
      return std::vector<std::size_t>(v.begin(), v.end());
    };
    auto mu_units = as_units(train_ctrl[fs]);
    if (options.treated_arm) {
      for (auto i : train_trt[fs]) mu_units.push_back(static_cast<std::size_t>(i));
      std::sort(mu_units.begin(), mu_units.end());
    }
    out.mu_provenance.training_units.push_back(std::move(mu_units));
    out.pi_provenance.training_units.push_back(as_units(train_all[fs]));
  }
  out.mu_provenance.model_of_unit.assign(dataset.n_units(), 0);
  if (!plan.no_split())
    for (std::size_t i = 0; i < dataset.n_units(); ++i) out.mu_provenance.model_of_unit[i] = plan.fold_of[i];
  out.pi_provenance.model_of_unit = out.mu_provenance.model_of_unit;

  if (plan.no_split() && is_glm(spec)) {
    ParametricInternals p;
    auto find = [&](int k) { return models[static_cast<std::size_t>(k)]; };
    p.mu1 = std::dynamic_pointer_cast<const LinearModel>(find(kMu1));
    p.mu0 = std::dynamic_pointer_cast<const LinearModel>(find(kMu0));
    p.pi = std::dynamic_pointer_cast<const LogisticModel>(find(kPi));
    p.pi0 = std::dynamic_pointer_cast<const LogisticModel>(find(kPi0));
    if (options.treated_arm) {
      p.mu1_treated = std::dynamic_pointer_cast<const LinearModel>(find(kMu1Treated));
      p.mu0_treated = std::dynamic_pointer_cast<const LinearModel>(find(kMu0Treated));
    }
    p.cond0 = cond0.features;
    p.cond_m1 = cond_m1.features;
    out.parametric = std::move(p);
  }
  return out;
}

std::size_t audit_cross_fit(const NuisanceFits& fits) {
  std::size_t violations = 0;
  for (const auto* prov : {&fits.mu_provenance, &fits.pi_provenance}) {
    for (std::size_t i = 0; i < prov->model_of_unit.size(); ++i) {
      const auto m = static_cast<std::size_t>(prov->model_of_unit[i]);
      if (m >= prov->training_units.size()) {
        ++violations;
        continue;
      }
      const auto& tr = prov->training_units[m];
      if (std::binary_search(tr.begin(), tr.end(), i)) ++violations;
    }
  }
  return violations;
}

}  // namespace gdid
