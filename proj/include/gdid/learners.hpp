#pragma once

#include "gdid/panel.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gdid {

enum class Task { Regression, Propensity };

// A fitted nuisance model. Propensity models return probabilities.
class Model {
 public:
  virtual ~Model() = default;
  virtual Vector predict(const Matrix& features) const = 0;
  virtual std::string describe() const = 0;
};

using ModelPtr = std::shared_ptr<const Model>;

// ---------------------------------------------------------------------------
// Learner specifications

enum class LearnerKind { Linear, Logistic, Knn, BoostedStumps, Ensemble };

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Linear;
  int k = 10;               // knn
  int rounds = 100;         // boosted stumps
  double shrinkage = 0.1;   // boosted stumps
  int ensemble_folds = 5;   // inner CV folds for stacking
  std::vector<LearnerSpec> candidates;

  static LearnerSpec linear() { return {}; }
  static LearnerSpec logistic() { LearnerSpec s; s.kind = LearnerKind::Logistic; return s; }
  static LearnerSpec knn(int k);
  static LearnerSpec boosted_stumps(int rounds, double shrinkage);
  static LearnerSpec ensemble(std::vector<LearnerSpec> candidates, int folds = 5);
  // {glm, knn(15), boosted_stumps(100, 0.1)} stacked with 5 inner folds.
  static LearnerSpec default_ensemble();

  // Throws InvalidArgument when a hyperparameter is out of range.
  void check() const;
  std::string to_string() const;
};

// linear/logistic name the GLM for the task at hand: least squares for
// outcome regressions, logistic IRLS for propensities.
bool is_glm(const LearnerSpec& spec);

// ---------------------------------------------------------------------------
// Parametric building blocks (also used for the sandwich variance)

// Standardizes columns, drops zero-variance ones and prepends an intercept.
class DesignMap {
 public:
  DesignMap() = default;
  explicit DesignMap(const Matrix& features);

  Matrix design(const Matrix& features) const;
  Eigen::Index width() const { return static_cast<Eigen::Index>(kept_.size()) + 1; }

 private:
  std::vector<Eigen::Index> kept_;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

class LinearModel final : public Model {
 public:
  LinearModel(DesignMap map, Vector coef) : map_(std::move(map)), coef_(std::move(coef)) {}
  Vector predict(const Matrix& features) const override;
  std::string describe() const override { return "linear"; }

  const DesignMap& design_map() const { return map_; }
  const Vector& coef() const { return coef_; }

 private:
  DesignMap map_;
  Vector coef_;
};

class LogisticModel final : public Model {
 public:
  LogisticModel(DesignMap map, Vector coef, bool separated)
      : map_(std::move(map)), coef_(std::move(coef)), separated_(separated) {}
  Vector predict(const Matrix& features) const override;
  std::string describe() const override { return "logistic"; }

  const DesignMap& design_map() const { return map_; }
  const Vector& coef() const { return coef_; }
  bool separated() const { return separated_; }

 private:
  DesignMap map_;
  Vector coef_;
  bool separated_;
};

std::shared_ptr<const LinearModel> fit_linear(const Matrix& features, const Vector& targets);

struct LogisticOptions {
  int max_iterations = 50;
  double deviance_tol = 1e-8;
  double ridge = 1e-6;  // fallback penalty, scaled by n and the feature variances
};

// IRLS; on separation refits with the ridge fallback and flags the model.
std::shared_ptr<const LogisticModel> fit_logistic(const Matrix& features, const Vector& treatment,
                                                  const LogisticOptions& options = {});

double expit(double x);

// ---------------------------------------------------------------------------
// Generic fitting entry points

struct FitOutcome {
  ModelPtr model;
  std::vector<std::string> warnings;
};

// Outcome regression (callers pass control units only for mu fits).
// Errors: SingularDesign, NotEnoughNeighbors, InvalidArgument.
FitOutcome fit_regression(const Matrix& features, const Vector& targets, const LearnerSpec& spec,
                          std::uint64_t seed = 0);

// Propensity model; predictions lie in [0, 1]. Separation is reported as a
// warning and the ridge fallback is used.
FitOutcome fit_propensity(const Matrix& features, const Vector& treatment, const LearnerSpec& spec,
                          std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Stacking

struct EnsembleWeights {
  std::vector<double> weights;
  std::vector<double> cv_risk;   // per candidate (infinity when it failed)
  double ensemble_risk = 0.0;    // risk of the weighted CV predictions
};

struct EnsembleFit {
  EnsembleWeights weights;
  ModelPtr model;
  std::vector<std::string> warnings;
};

// Squared error for regression, Bernoulli negative log-likelihood for
// propensities, minimized over the simplex.
EnsembleFit fit_ensemble(const std::vector<LearnerSpec>& candidates, const Matrix& features,
                         const Vector& targets, int folds, Task task, std::uint64_t seed);

// Minimizes ||P w - y||^2 over the probability simplex (NNLS + normalization).
std::vector<double> simplex_least_squares(const Matrix& predictions, const Vector& targets);

// Minimizes the mean Bernoulli NLL of P w over the simplex, starting from the
// best vertex; never returns a point worse than that vertex.
std::vector<double> simplex_log_likelihood(const Matrix& probabilities, const Vector& labels);

// ---------------------------------------------------------------------------
// Cross-fitting

struct CrossFitPlan {
  int folds = 5;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;  // empty for the no-split marker

  bool no_split() const { return fold_of.empty(); }
  static CrossFitPlan none() { CrossFitPlan p; p.folds = 1; return p; }
};

// Random partition stratified by arm; fold sizes differ by at most one.
CrossFitPlan make_plan(const std::vector<int>& treatment, int folds, std::uint64_t seed);

// Training units of each fitted model, kept for the honesty audit.
struct FitProvenance {
  std::vector<std::vector<std::size_t>> training_units;  // per model
  std::vector<int> model_of_unit;                        // which model predicted unit i
};

// Coefficients and design maps of the no-split GLM path.
struct ParametricInternals {
  std::shared_ptr<const LinearModel> mu1, mu0, mu1_treated, mu0_treated;
  std::shared_ptr<const LogisticModel> pi, pi0;
  Matrix cond0, cond_m1;  // raw conditioning features used by every model
};

struct NuisanceFits {
  Vector mu1, mu0, pi, pi0;
  Vector mu1_treated, mu0_treated;  // only when treated-arm fits were requested
  CrossFitPlan plan;
  double trim_eps = kDefaultTrimEps;
  int lag_depth = 0;
  FitProvenance mu_provenance, pi_provenance;
  std::optional<ParametricInternals> parametric;
  std::vector<std::string> warnings;

  bool has_treated_arm() const { return mu1_treated.size() > 0 && mu0_treated.size() > 0; }
};

struct CrossFitOptions {
  double trim_eps = kDefaultTrimEps;
  bool treated_arm = false;  // also fit E(Y | W, A = 1) for ATE
  bool two_sided_trim = true;
  int threads = 1;
};

// mu models on control units, pi models on all units, each evaluated only on
// units outside its training folds. Errors: FoldWithoutControls.
NuisanceFits cross_fit_nuisances(const PanelDataset& dataset, const ConditioningSet& cond0,
                                 const ConditioningSet& cond_m1, const LearnerSpec& spec,
                                 const CrossFitPlan& plan, const CrossFitOptions& options = {});

// Number of units whose prediction came from a model trained on them.
std::size_t audit_cross_fit(const NuisanceFits& fits);

}  // namespace gdid
