#include "gdid/errors.hpp"
#include "gdid/learners.hpp"

#include <cmath>

namespace gdid {

namespace {

// Solves (X'WX + penalty) b = X'Wz via Cholesky; returns false when the
// system is not numerically positive definite.
bool solve_normal(const Matrix& x, const Vector& w, const Vector& z, double ridge, Vector& out) {
  const auto q = x.cols();
  Matrix xtx = Matrix::Zero(q, q);
  xtx.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose() * w.cwiseSqrt().asDiagonal());
  Matrix full = xtx.selfadjointView<Eigen::Lower>();
  for (Eigen::Index j = 1; j < q; ++j) full(j, j) += ridge;
  Eigen::LLT<Matrix> llt(full);
  if (llt.info() != Eigen::Success) return false;
  const Vector d = llt.matrixL().toDenseMatrix().diagonal();
  const double dmax = d.maxCoeff();
  if (!(d.minCoeff() > 1e-7 * dmax)) return false;
  out = llt.solve(x.transpose() * w.cwiseProduct(z));
  return out.allFinite();
}

double bernoulli_deviance(const Vector& y, const Vector& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(1 + exp(eta)) - y * eta, computed stably
    const double e = eta[i];
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    dev += 2.0 * (softplus - y[i] * e);
  }
  return dev;
}

struct IrlsResult {
  Vector coef;
  bool converged = false;
  double deviance = 0.0;
};

IrlsResult irls(const Matrix& x, const Vector& y, double ridge, const LogisticOptions& options) {
  const auto n = x.rows();
  const double ybar = y.mean();
  IrlsResult r;
  r.coef = Vector::Zero(x.cols());
  r.coef[0] = std::log(std::clamp(ybar, 1e-6, 1 - 1e-6) / (1 - std::clamp(ybar, 1e-6, 1 - 1e-6)));
  Vector eta = x * r.coef;
  auto objective = [&](const Vector& b, const Vector& e) {
    return bernoulli_deviance(y, e) + ridge * b.tail(b.size() - 1).squaredNorm();
  };
  double obj = objective(r.coef, eta);
  for (int it = 0; it < options.max_iterations; ++it) {
    Vector w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = expit(eta[i]);
      const double v = std::max(p * (1 - p), 1e-10);
      w[i] = v;
      z[i] = eta[i] + (y[i] - p) / v;
    }
    Vector next;
    // deviance carries a factor 2, so the matching penalty on the normal equations is ridge
    if (!solve_normal(x, w, z, ridge, next)) break;
    Vector eta_next = x * next;
    double obj_next = objective(next, eta_next);
    for (int half = 0; half < 30 && !(obj_next <= obj + 1e-12 * std::abs(obj)); ++half) {
      next = 0.5 * (next + r.coef);
      eta_next = x * next;
      obj_next = objective(next, eta_next);
    }
    const double change = std::abs(obj_next - obj);
    r.coef = next;
    eta = eta_next;
    obj = obj_next;
    if (change < options.deviance_tol * (std::abs(obj) + 0.1)) {
      r.converged = true;
      break;
    }
  }
  r.deviance = bernoulli_deviance(y, eta);
  return r;
}

}  // namespace

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DesignMap::DesignMap(const Matrix& features) {
  const auto n = static_cast<double>(features.rows());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double m = features.col(j).mean();
    const double sd = std::sqrt((features.col(j).array() - m).square().sum() / std::max(n, 1.0));
    if (sd > 1e-10 * (1.0 + std::abs(m))) {
      kept_.push_back(j);
      mean_.push_back(m);
      scale_.push_back(sd);
    }
  }
}

Matrix DesignMap::design(const Matrix& features) const {
  Matrix out(features.rows(), width());
  out.col(0).setOnes();
  for (std::size_t k = 0; k < kept_.size(); ++k)
    out.col(static_cast<Eigen::Index>(k) + 1) = (features.col(kept_[k]).array() - mean_[k]) / scale_[k];
  return out;
}

Vector LinearModel::predict(const Matrix& features) const { return map_.design(features) * coef_; }

Vector LogisticModel::predict(const Matrix& features) const {
  Vector eta = map_.design(features) * coef_;
  return eta.unaryExpr([](double e) { return expit(e); });
}

std::shared_ptr<const LinearModel> fit_linear(const Matrix& features, const Vector& targets) {
  if (features.rows() != targets.size()) throw Error(ErrorCode::InvalidArgument, "features/targets size mismatch");
  if (features.rows() < 2) throw Error(ErrorCode::InvalidArgument, "linear fit needs at least 2 rows");
  if (!features.allFinite() || !targets.allFinite())
    throw Error(ErrorCode::SingularDesign, "non-finite values in the design");
  DesignMap map(features);
  const Matrix x = map.design(features);
  const Vector ones = Vector::Ones(x.rows());
  Vector coef;
  if (!solve_normal(x, ones, targets, 0.0, coef)) {
    const double ridge = 1e-6 * static_cast<double>(x.rows());
    if (!solve_normal(x, ones, targets, ridge, coef))
      throw Error(ErrorCode::SingularDesign, "rank-deficient design after ridge fallback");
  }
  return std::make_shared<const LinearModel>(std::move(map), std::move(coef));
}

std::shared_ptr<const LogisticModel> fit_logistic(const Matrix& features, const Vector& treatment,
                                                  const LogisticOptions& options) {
  if (features.rows() != treatment.size()) throw Error(ErrorCode::InvalidArgument, "features/labels size mismatch");
  if (features.rows() == 0) throw Error(ErrorCode::InvalidArgument, "logistic fit on empty data");
  for (Eigen::Index i = 0; i < treatment.size(); ++i)
    if (treatment[i] != 0.0 && treatment[i] != 1.0)
      throw Error(ErrorCode::NonBinaryTreatment, "logistic labels must be 0/1");
  if (!features.allFinite()) throw Error(ErrorCode::SingularDesign, "non-finite values in the design");
  DesignMap map(features);
  const Matrix x = map.design(features);

  const double ybar = treatment.mean();
  if (ybar == 0.0 || ybar == 1.0) {
    // one class only: a constant model at the observed rate
    Vector coef = Vector::Zero(x.cols());
    coef[0] = ybar == 0.0 ? -36.0 : 36.0;
    return std::make_shared<const LogisticModel>(std::move(map), std::move(coef), true);
  }

  IrlsResult fit = irls(x, treatment, 0.0, options);
  const Vector eta = x * fit.coef;
  const bool separated =
      !fit.converged || !fit.coef.allFinite() || eta.cwiseAbs().maxCoeff() > 30.0 ||
      fit.deviance < 1e-6 * static_cast<double>(x.rows());
  if (separated) {
    fit = irls(x, treatment, options.ridge * static_cast<double>(x.rows()), options);
    if (!fit.coef.allFinite()) throw Error(ErrorCode::SingularDesign, "logistic ridge fallback failed");
  }
  return std::make_shared<const LogisticModel>(std::move(map), std::move(fit.coef), separated);
}

}  // namespace gdid
