#include "gdid/inference.hpp"

#include "gdid/errors.hpp"
#include "internal.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace gdid {

std::string to_string(VarianceMethod m) {
  switch (m) {
    case VarianceMethod::Plugin: return "plugin";
    case VarianceMethod::MultiplierBootstrap: return "bootstrap";
    case VarianceMethod::Sandwich: return "sandwich";
  }
  return "unknown";
}

void BootstrapConfig::check() const {
  if (B < 100) throw Error(ErrorCode::InvalidArgument, "bootstrap needs B >= 100");
}

namespace {

void require_influence(const AttEstimate& e) {
  if (e.influence.size() == 0) throw Error(ErrorCode::EmptyInfluence, "estimate carries no influence values");
  if (!(e.denominator > 0.0)) throw Error(ErrorCode::EmptyInfluence, "estimate has a non-positive denominator");
}

const char* kScaleNote = "se^2 = sigma2_hat / denominator, sigma2_hat = mean over the denominator of squared centered contributions";

}  // namespace

VarianceEstimate plugin_variance(const AttEstimate& e) {
  require_influence(e);
  const Vector centered = e.offsets.size() == e.influence.size() ? Vector(e.influence - e.offsets)
                                                                  : Vector(e.influence.array() - e.tau_hat);
  VarianceEstimate v;
  v.method = VarianceMethod::Plugin;
  v.sigma2_hat = centered.squaredNorm() / e.denominator;
  v.se = std::sqrt(v.sigma2_hat / e.denominator);
  v.scale_note = kScaleNote;
  return v;
}

double weight_draw(WeightDist dist, std::mt19937_64& rng) {
  switch (dist) {
    case WeightDist::Exponential:
      return std::exponential_distribution<double>(1.0)(rng);
    case WeightDist::Mammen: {
      static const double s5 = std::sqrt(5.0);
      const double p = (s5 + 1.0) / (2.0 * s5);
      return 1.0 + (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p ? (1.0 - s5) / 2.0 : (1.0 + s5) / 2.0);
    }
    case WeightDist::Normal:
      return std::normal_distribution<double>(1.0, 1.0)(rng);
  }
  return 1.0;
}

double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty data");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult multiplier_bootstrap(const AttEstimate& e, const BootstrapConfig& config, double level) {
  require_influence(e);
  config.check();
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "level must lie in (0, 1)");
  BootstrapResult out;
  out.replicates.assign(static_cast<std::size_t>(config.B), 0.0);
  const auto n = e.influence.size();
  parallel_for(static_cast<std::size_t>(config.B), config.threads, [&](std::size_t b) {
    auto rng = make_rng(mix_seed(config.seed, b));
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = config.custom_weight ? config.custom_weight(rng) : weight_draw(config.weight_dist, rng);
      s += g * e.influence[i];
    }
    out.replicates[b] = s / e.denominator;
  });
  double mean = 0.0;
  for (double r : out.replicates) mean += r;
  mean /= static_cast<double>(config.B);
  double ss = 0.0;
  for (double r : out.replicates) ss += (r - mean) * (r - mean);
  const double var = ss / static_cast<double>(config.B - 1);
  out.variance.method = VarianceMethod::MultiplierBootstrap;
  out.variance.se = std::sqrt(var);
  out.variance.sigma2_hat = var * e.denominator;
  out.variance.scale_note = "se = replicate standard deviation; sigma2_hat = se^2 * denominator";
  const double alpha = 1.0 - level;
  out.ci.lower = quantile_type7(out.replicates, alpha / 2.0);
  out.ci.upper = quantile_type7(out.replicates, 1.0 - alpha / 2.0);
  out.ci.level = level;
  out.ci.method = VarianceMethod::MultiplierBootstrap;
  return out;
}

ConfidenceInterval confidence_interval(double tau_hat, const VarianceEstimate& variance, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "level must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - (1.0 - level) / 2.0);
  ConfidenceInterval ci;
  ci.lower = tau_hat - z * variance.se;
  ci.upper = tau_hat + z * variance.se;
  ci.level = level;
  ci.method = variance.method;
  return ci;
}

void attach(AttEstimate& e, const VarianceEstimate& v, const ConfidenceInterval& ci) {
  e.se = v.se;
  e.ci_lower = ci.lower;
  e.ci_upper = ci.upper;
  e.level = ci.level;
  e.inference_method = to_string(v.method);
}

namespace {

struct PeriodBlock {
  double sign = 0.0;
  Matrix xm, xp;        // designs of the outcome and propensity models
  Vector y, mu, pi_raw, pi;
  std::vector<char> clipped;
};

}  // namespace

VarianceEstimate sandwich_variance(const PanelDataset& dataset, const NuisanceFits& fits, const AttEstimate& e) {
  if (!fits.parametric || !fits.plan.no_split())
    throw Error(ErrorCode::NotParametricPath, "sandwich variance needs no-split linear/logistic fits");
  const auto& par = *fits.parametric;
  double s1 = 0.0, s0 = 0.0;
  switch (e.estimand) {
    case Estimand::Gdid:
    case Estimand::Cdid: s1 = 1.0; s0 = -1.0; break;
    case Estimand::IgnorabilityPost: s1 = 1.0; break;
    case Estimand::IgnorabilityPre: s0 = 1.0; break;
    default: throw Error(ErrorCode::InvalidArgument, "sandwich variance covers gdid, cdid and ignorability estimands");
  }
  const auto n = static_cast<Eigen::Index>(dataset.n_units());
  if (e.influence.size() != n) throw Error(ErrorCode::InvalidArgument, "estimate does not match the dataset");
  const double eps = e.trim_eps;

  std::vector<PeriodBlock> blocks;
  for (int t : {1, 0}) {
    const double s = t == 1 ? s1 : s0;
    if (s == 0.0) continue;
    const auto& mu_model = t == 1 ? par.mu1 : par.mu0;
    const auto& pi_model = t == 1 ? par.pi : par.pi0;
    if (!mu_model || !pi_model) throw Error(ErrorCode::NotParametricPath, "parametric internals are incomplete");
    const Matrix& cond = t == 1 ? par.cond0 : par.cond_m1;
    PeriodBlock b;
    b.sign = s;
    b.xm = mu_model->design_map().design(cond);
    b.xp = pi_model->design_map().design(cond);
    b.y = dataset.outcome_at(t);
    b.mu = b.xm * mu_model->coef();
    b.pi_raw = (b.xp * pi_model->coef()).unaryExpr([](double v) { return expit(v); });
    const Vector& trimmed = t == 1 ? fits.pi : fits.pi0;
    b.pi.resize(n);
    b.clipped.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      b.pi[i] = std::min(trimmed[i], 1.0 - eps);
      b.clipped[static_cast<std::size_t>(i)] = std::abs(b.pi[i] - b.pi_raw[i]) > 1e-12;
    }
    blocks.push_back(std::move(b));
  }

  Eigen::Index width = 1;
  for (const auto& b : blocks) width += b.xm.cols() + b.xp.cols();
  Matrix psi = Matrix::Zero(n, width);
  Matrix jac = Matrix::Zero(width, width);
  const Eigen::Index tau_col = width - 1;
  const double tau = e.tau_hat;

  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = dataset.treatment[static_cast<std::size_t>(i)];
    double bsum = 0.0;
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
      const auto q = b.xm.cols();
      const auto r = b.xp.cols();
      const double mu = b.mu[i], pi = b.pi[i], praw = b.pi_raw[i], y = b.y[i];
      const auto xm = b.xm.row(i).transpose();
      const auto xp = b.xp.row(i).transpose();
      psi.block(i, off, 1, q) = ((1 - a) * (y - mu)) * xm.transpose();
      psi.block(i, off + q, 1, r) = (a - praw) * xp.transpose();
      jac.block(off, off, q, q) -= (1.0 - a) * xm * xm.transpose();
      jac.block(off + q, off + q, r, r) -= praw * (1.0 - praw) * xp * xp.transpose();
      // derivatives of the estimator's equation with respect to the nuisance parameters
      jac.block(tau_col, off, 1, q) -= b.sign * (a - pi) / (1.0 - pi) * xm.transpose();
      if (!b.clipped[static_cast<std::size_t>(i)])
        jac.block(tau_col, off + q, 1, r) -=
            b.sign * (1 - a) * (y - mu) * praw * (1.0 - praw) / ((1.0 - pi) * (1.0 - pi)) * xp.transpose();
      bsum += b.sign * aipw_summand(y, a, pi, mu);
      off += q + r;
    }
    if (std::abs(bsum - e.influence[i]) > 1e-8 * (1.0 + std::abs(bsum)))
      throw Error(ErrorCode::InvalidArgument, "estimate was not computed from these parametric fits");
    psi(i, tau_col) = bsum - a * tau;
    jac(tau_col, tau_col) -= a;
  }
  jac /= static_cast<double>(n);
  const Matrix meat = psi.transpose() * psi / static_cast<double>(n);
  Eigen::FullPivLU<Matrix> lu(jac);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularJacobian, "stacked Jacobian is singular");
  const Matrix jinv = lu.inverse();
  const Matrix cov = jinv * meat * jinv.transpose() / static_cast<double>(n);
  const double var = std::max(0.0, cov(tau_col, tau_col));

  VarianceEstimate v;
  v.method = VarianceMethod::Sandwich;
  v.se = std::sqrt(var);
  v.sigma2_hat = var * e.denominator;
  v.scale_note = "se^2 = (A^-1 B A^-T / n)[tau, tau]; sigma2_hat = se^2 * denominator";
  return v;
}

}  // namespace gdid
