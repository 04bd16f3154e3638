#include "gdid/errors.hpp"
#include "internal.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace gdid {

LearnerSpec LearnerSpec::knn(int k) {
  LearnerSpec s;
  s.kind = LearnerKind::Knn;
  s.k = k;
  return s;
}

LearnerSpec LearnerSpec::boosted_stumps(int rounds, double shrinkage) {
  LearnerSpec s;
  s.kind = LearnerKind::BoostedStumps;
  s.rounds = rounds;
  s.shrinkage = shrinkage;
  return s;
}

LearnerSpec LearnerSpec::ensemble(std::vector<LearnerSpec> candidates, int folds) {
  LearnerSpec s;
  s.kind = LearnerKind::Ensemble;
  s.candidates = std::move(candidates);
  s.ensemble_folds = folds;
  return s;
}

LearnerSpec LearnerSpec::default_ensemble() {
  return ensemble({linear(), knn(15), boosted_stumps(100, 0.1)}, 5);
}

void LearnerSpec::check() const {
  switch (kind) {
    case LearnerKind::Linear:
    case LearnerKind::Logistic:
      return;
    case LearnerKind::Knn:
      if (k < 1) throw Error(ErrorCode::InvalidArgument, "knn needs k >= 1");
      return;
    case LearnerKind::BoostedStumps:
      if (rounds < 1) throw Error(ErrorCode::InvalidArgument, "boosted_stumps needs rounds >= 1");
      if (!(shrinkage > 0.0 && shrinkage <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "boosted_stumps shrinkage must lie in (0, 1]");
      return;
    case LearnerKind::Ensemble:
      if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "ensemble needs at least one candidate");
      if (ensemble_folds < 2) throw Error(ErrorCode::InvalidArgument, "ensemble needs at least 2 folds");
      for (const auto& c : candidates) {
        if (c.kind == LearnerKind::Ensemble) throw Error(ErrorCode::InvalidArgument, "nested ensembles are not allowed");
        c.check();
      }
      return;
  }
}

std::string LearnerSpec::to_string() const {
  std::ostringstream s;
  switch (kind) {
    case LearnerKind::Linear: s << "linear"; break;
    case LearnerKind::Logistic: s << "logistic"; break;
    case LearnerKind::Knn: s << "knn(" << k << ")"; break;
    case LearnerKind::BoostedStumps: s << "boosted_stumps(" << rounds << "," << shrinkage << ")"; break;
    case LearnerKind::Ensemble:
      s << "ensemble[";
      for (std::size_t i = 0; i < candidates.size(); ++i) s << (i ? "," : "") << candidates[i].to_string();
      s << ";folds=" << ensemble_folds << "]";
      break;
  }
  return s.str();
}

bool is_glm(const LearnerSpec& spec) {
  return spec.kind == LearnerKind::Linear || spec.kind == LearnerKind::Logistic;
}

namespace {

class WeightedModel final : public Model {
 public:
  WeightedModel(std::vector<ModelPtr> models, std::vector<double> weights)
      : models_(std::move(models)), weights_(std::move(weights)) {}

  Vector predict(const Matrix& features) const override {
    Vector out = Vector::Zero(features.rows());
    for (std::size_t k = 0; k < models_.size(); ++k)
      if (models_[k] && weights_[k] > 0.0) out += weights_[k] * models_[k]->predict(features);
    return out;
  }

  std::string describe() const override {
    std::ostringstream s;
    s << "ensemble(";
    bool first = true;
    for (std::size_t k = 0; k < models_.size(); ++k) {
      if (!models_[k]) continue;
      s << (first ? "" : ", ") << models_[k]->describe() << ":" << weights_[k];
      first = false;
    }
    s << ")";
    return s.str();
  }

 private:
  std::vector<ModelPtr> models_;
  std::vector<double> weights_;
};

double clip_prob(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

double mean_nll(const Vector& q, const Vector& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double p = clip_prob(q[i]);
    s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p);
  }
  return s / static_cast<double>(y.size());
}

double mean_sq(const Vector& q, const Vector& y) { return (q - y).squaredNorm() / static_cast<double>(y.size()); }

Vector to_vec(const std::vector<double>& w) { return Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())); }

std::vector<double> vertex(Eigen::Index k, Eigen::Index j) {
  std::vector<double> w(static_cast<std::size_t>(k), 0.0);
  w[static_cast<std::size_t>(j)] = 1.0;
  return w;
}

}  // namespace

std::vector<double> simplex_least_squares(const Matrix& predictions, const Vector& targets) {
  const auto n = predictions.rows();
  const auto k = predictions.cols();
  if (k == 0 || n != targets.size()) throw Error(ErrorCode::InvalidArgument, "simplex_least_squares: bad shapes");
  if (k == 1) return {1.0};
  // With R = P - y 1', the simplex problem is min ||R w||; appending the row
  // (1, ..., 1) with target 1 keeps NNLS scale-free, and w = v / sum(v) is exact.
  const Matrix r = predictions.colwise() - targets;
  const double m = std::max(1.0, std::sqrt(r.squaredNorm() / static_cast<double>(k)));
  Matrix a(n + 1, k);
  a.topRows(n) = r;
  a.row(n).setConstant(m);
  Vector b = Vector::Zero(n + 1);
  b[n] = m;
  const Vector v = nnls(a, b);

  Eigen::Index best = 0;
  double best_risk = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double risk = r.col(j).squaredNorm();
    if (risk < best_risk) {
      best_risk = risk;
      best = j;
    }
  }
  const double total = v.sum();
  if (!(total > 0.0)) return vertex(k, best);
  std::vector<double> w(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) w[static_cast<std::size_t>(j)] = v[j] / total;
  if ((r * to_vec(w)).squaredNorm() > best_risk) return vertex(k, best);
  return w;
}

// Sequential quadratic approximation of the NLL; each step is a weighted
// simplex least-squares problem followed by a backtracking line search.
std::vector<double> simplex_log_likelihood(const Matrix& probabilities, const Vector& labels) {
  const auto n = probabilities.rows();
  const auto k = probabilities.cols();
  if (k == 0 || n != labels.size() || n == 0)
    throw Error(ErrorCode::InvalidArgument, "simplex_log_likelihood: bad shapes");
  if (k == 1) return {1.0};

  Eigen::Index best = 0;
  double loss = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double l = mean_nll(probabilities.col(j), labels);
    if (l < loss) {
      loss = l;
      best = j;
    }
  }
  Vector w = to_vec(vertex(k, best));
  for (int it = 0; it < 100; ++it) {
    const Vector q = probabilities * w;
    Vector sw(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = clip_prob(q[i]);
      const double y = labels[i];
      const double g = -(y / p - (1.0 - y) / (1.0 - p));
      const double h = y / (p * p) + (1.0 - y) / ((1.0 - p) * (1.0 - p));
      sw[i] = std::sqrt(h);
      z[i] = q[i] - g / h;
    }
    const Matrix scaled = sw.asDiagonal() * probabilities;
    const Vector target = sw.cwiseProduct(z);
    const Vector proposal = to_vec(simplex_least_squares(scaled, target));
    const Vector dir = proposal - w;
    if (dir.cwiseAbs().maxCoeff() < 1e-14) break;
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 40; ++half, step *= 0.5) {
      const Vector cand = w + step * dir;
      const double l = mean_nll(probabilities * cand, labels);
      if (l < loss) {
        const double gain = loss - l;
        w = cand;
        loss = l;
        moved = gain > 1e-14;
        break;
      }
    }
    if (!moved) break;
  }
  w = w.cwiseMax(0.0);
  w /= w.sum();
  std::vector<double> out(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = w[j];
  return out;
}

FitOutcome fit_regression(const Matrix& features, const Vector& targets, const LearnerSpec& spec,
                          std::uint64_t seed) {
  spec.check();
  if (features.rows() != targets.size()) throw Error(ErrorCode::InvalidArgument, "features/targets size mismatch");
  FitOutcome out;
  switch (spec.kind) {
    case LearnerKind::Linear:
    case LearnerKind::Logistic:
      out.model = fit_linear(features, targets);
      break;
    case LearnerKind::Knn:
      out.model = fit_knn(features, targets, spec.k);
      break;
    case LearnerKind::BoostedStumps:
      out.model = fit_boosted_stumps(features, targets, spec.rounds, spec.shrinkage, false);
      break;
    case LearnerKind::Ensemble: {
      auto e = fit_ensemble(spec.candidates, features, targets, spec.ensemble_folds, Task::Regression, seed);
      out.model = e.model;
      out.warnings = std::move(e.warnings);
      break;
    }
  }
  return out;
}

FitOutcome fit_propensity(const Matrix& features, const Vector& treatment, const LearnerSpec& spec,
                          std::uint64_t seed) {
  spec.check();
  if (features.rows() != treatment.size()) throw Error(ErrorCode::InvalidArgument, "features/labels size mismatch");
  const double rate = treatment.size() ? treatment.mean() : 0.0;
  if (rate <= 0.0 || rate >= 1.0)
    throw Error(ErrorCode::InvalidArgument, "propensity fit needs both treated and control units");
  FitOutcome out;
  switch (spec.kind) {
    case LearnerKind::Linear:
    case LearnerKind::Logistic: {
      auto m = fit_logistic(features, treatment);
      if (m->separated()) out.warnings.emplace_back("Separation: logistic fit refit with ridge penalty");
      out.model = std::move(m);
      break;
    }
    case LearnerKind::Knn:
      out.model = fit_knn(features, treatment, spec.k);
      break;
    case LearnerKind::BoostedStumps:
      out.model = fit_boosted_stumps(features, treatment, spec.rounds, spec.shrinkage, true);
      break;
    case LearnerKind::Ensemble: {
      auto e = fit_ensemble(spec.candidates, features, treatment, spec.ensemble_folds, Task::Propensity, seed);
      out.model = e.model;
      out.warnings = std::move(e.warnings);
      break;
    }
  }
  return out;
}

EnsembleFit fit_ensemble(const std::vector<LearnerSpec>& candidates, const Matrix& features, const Vector& targets,
                         int folds, Task task, std::uint64_t seed) {
  LearnerSpec::ensemble(candidates, folds).check();
  const auto n = targets.size();
  if (features.rows() != n) throw Error(ErrorCode::InvalidArgument, "features/targets size mismatch");
  const auto k = static_cast<Eigen::Index>(candidates.size());

  std::vector<int> strata(static_cast<std::size_t>(n), 0);
  if (task == Task::Propensity)
    for (Eigen::Index i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = targets[i] > 0.5;
  const int inner = static_cast<int>(std::min<Eigen::Index>(folds, n));
  const auto plan = make_plan(strata, std::max(inner, 2), mix_seed(seed, 0xE5));

  auto fit_one = [&](const LearnerSpec& spec, const Matrix& x, const Vector& y, std::uint64_t s) {
    return task == Task::Regression ? fit_regression(x, y, spec, s) : fit_propensity(x, y, spec, s);
  };
  auto loss = [&](const Vector& q, const Vector& y) { return task == Task::Regression ? mean_sq(q, y) : mean_nll(q, y); };

  EnsembleFit result;
  Matrix cv(n, k);
  std::vector<char> ok(static_cast<std::size_t>(k), 1);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& spec = candidates[static_cast<std::size_t>(j)];
    try {
      for (int f = 0; f < plan.folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < n; ++i) (plan.fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        if (te.empty()) continue;
        const Matrix xtr = features(tr, Eigen::all);
        const Vector ytr = targets(tr);
        const auto fit = fit_one(spec, xtr, ytr, mix_seed(seed, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(f)));
        const Vector pred = fit.model->predict(features(te, Eigen::all));
        if (!pred.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite predictions");
        cv(te, j) = pred;
      }
    } catch (const Error& e) {
      ok[static_cast<std::size_t>(j)] = 0;
      result.warnings.push_back("candidate " + spec.to_string() + " failed and receives weight 0: " + e.what());
    }
  }

  std::vector<Eigen::Index> alive;
  for (Eigen::Index j = 0; j < k; ++j)
    if (ok[static_cast<std::size_t>(j)]) alive.push_back(j);
  if (alive.empty()) {
    // Surface the underlying failure of the first candidate.
    fit_one(candidates.front(), features, targets, seed);
    throw Error(ErrorCode::InvalidArgument, "every ensemble candidate failed");
  }

  const Matrix cv_alive = cv(Eigen::all, alive);
  const auto w_alive = task == Task::Regression ? simplex_least_squares(cv_alive, targets)
                                                : simplex_log_likelihood(cv_alive, targets);
  result.weights.weights.assign(static_cast<std::size_t>(k), 0.0);
  result.weights.cv_risk.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < alive.size(); ++a) {
    const auto j = static_cast<std::size_t>(alive[a]);
    result.weights.weights[j] = w_alive[a];
    result.weights.cv_risk[j] = loss(cv.col(alive[a]), targets);
  }
  result.weights.ensemble_risk = loss(cv_alive * to_vec(w_alive), targets);

  std::vector<ModelPtr> models(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    if (result.weights.weights[static_cast<std::size_t>(j)] <= 0.0) continue;
    auto fit = fit_one(candidates[static_cast<std::size_t>(j)], features, targets,
                       mix_seed(seed, static_cast<std::uint64_t>(j), 0xFF));
    for (auto& w : fit.warnings) result.warnings.push_back(std::move(w));
    models[static_cast<std::size_t>(j)] = std::move(fit.model);
  }
  result.model = std::make_shared<const WeightedModel>(std::move(models), result.weights.weights);
  return result;
}

}  // namespace gdid
