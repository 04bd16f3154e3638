#include "gdid/simulation.hpp"

#include "gdid/errors.hpp"
#include "internal.hpp"

#include <cmath>
#include <sstream>

namespace gdid {

namespace {

double f_reg(double w1, double w2, double w3, double w4) { return 205.0 + 27.4 * w1 + 13.7 * (w2 + w3 + w4); }

double f_ps(double w1, double w2, double w3, double w4) {
  return 0.75 * (-w1 + 0.5 * w2 - 0.5 * w3 - 0.25 * w4);
}

std::array<double, 4> z_raw(double x1, double x2, double x3, double x4) {
  return {std::exp(0.5 * x1), 10.0 + x2 / (1.0 + std::exp(x1)), std::pow(0.6 + x1 * x3 / 25.0, 3.0),
          std::pow(20.0 + x2 + x4, 2.0)};
}

std::string unit_label(std::size_t i) { return std::to_string(i + 1); }

PanelDataset empty_panel(std::size_t n, std::vector<int> times) {
  PanelDataset d;
  d.unit_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) d.unit_ids.push_back(unit_label(i));
  d.outcomes.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(times.size()));
  d.times = std::move(times);
  d.treatment.assign(n, 0);
  return d;
}

}  // namespace

void Dgp1Config::check() const {
  if (n < 10) throw Error(ErrorCode::InvalidArgument, "n must be at least 10");
  if (!(zeta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "zeta must be non-negative");
}

const ZMoments& dgp1_z_moments() {
  static const ZMoments moments = [] {
    auto rng = make_rng(0x5EEDD6F1ULL);
    std::normal_distribution<double> nd;
    constexpr int draws = 1000000;
    std::array<double, 4> sum{}, sum2{};
    for (int r = 0; r < draws; ++r) {
      const double x1 = nd(rng), x2 = nd(rng), x3 = nd(rng), x4 = nd(rng);
      const auto z = z_raw(x1, x2, x3, x4);
      for (int j = 0; j < 4; ++j) {
        sum[j] += z[j];
        sum2[j] += z[j] * z[j];
      }
    }
    ZMoments m;
    for (int j = 0; j < 4; ++j) {
      m.mean[j] = sum[j] / draws;
      m.sd[j] = std::sqrt((sum2[j] - draws * m.mean[j] * m.mean[j]) / (draws - 1));
    }
    return m;
  }();
  return moments;
}

PanelDataset simulate_dgp1(const Dgp1Config& config) {
  config.check();
  const auto& zm = config.observed == Observed::Nonlinear ? dgp1_z_moments() : ZMoments{};
  auto rng = make_rng(mix_seed(config.seed, 0xD1));
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;

  auto d = empty_panel(config.n, {-2, -1, 0, 1});
  d.covariates.resize(static_cast<Eigen::Index>(config.n), 3);
  d.covariate_names = config.observed == Observed::Linear ? std::vector<std::string>{"x2", "x3", "x4"}
                                                          : std::vector<std::string>{"z2", "z3", "z4"};
  for (std::size_t iu = 0; iu < config.n; ++iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    const double x1 = nd(rng), x2 = nd(rng), x3 = nd(rng), x4 = nd(rng);
    const double u = ud(rng);
    const int a = expit(f_ps(x1, x2, x3, x4)) >= u ? 1 : 0;
    const double reg = f_reg(x1, x2, x3, x4);
    const double v = reg * (1.0 + config.zeta * a) + nd(rng);
    for (int t = 1; t <= 4; ++t) d.outcomes(i, t - 1) = 0.1 * t * reg + v + nd(rng);
    d.treatment[iu] = a;
    if (config.observed == Observed::Linear) {
      d.covariates.row(i) << x2, x3, x4;
    } else {
      const auto z = z_raw(x1, x2, x3, x4);
      for (int j = 1; j < 4; ++j) d.covariates(i, j - 1) = (z[j] - zm.mean[j]) / zm.sd[j];
    }
  }
  return d;
}

double EffectSpec::at(int k) const {
  switch (kind) {
    case EffectPath::Zero: return 0.0;
    case EffectPath::Constant: return base;
    case EffectPath::LinearGrowth: return base + step * k;
    case EffectPath::RandomChanges: {
      double v = base;
      for (int m = 0; m < k; ++m) {
        if (static_cast<std::size_t>(m) >= changes.size())
          throw Error(ErrorCode::InvalidArgument, "random-change path needs one change per later period");
        v += changes[static_cast<std::size_t>(m)];
      }
      return v;
    }
  }
  return 0.0;
}

std::string EffectSpec::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case EffectPath::Zero: os << "zero"; break;
    case EffectPath::Constant: os << "constant(" << base << ")"; break;
    case EffectPath::LinearGrowth: os << "linear_growth(" << base << "," << step << ")"; break;
    case EffectPath::RandomChanges:
      os << "random_changes(" << base;
      for (double c : changes) os << "," << c;
      os << ")";
      break;
  }
  return os.str();
}

EffectSpec EffectSpec::random_changes(double base, std::uint64_t seed) {
  auto rng = make_rng(mix_seed(seed, 0xC4A9));
  std::uniform_real_distribution<double> mag(0.25, 0.75);
  std::bernoulli_distribution flip(0.5);
  EffectSpec s{EffectPath::RandomChanges, base, 0.0, {}};
  for (int m = 0; m < 2; ++m) {
    const double c = mag(rng);
    s.changes.push_back(flip(rng) ? -c : c);
  }
  return s;
}

void Dgp2Config::check() const {
  if (n < 10) throw Error(ErrorCode::InvalidArgument, "n must be at least 10");
  if (beta.kind == EffectPath::Zero) throw Error(ErrorCode::InvalidArgument, "beta_t = 0 is not a supported design");
  for (int k = 0; k < 3; ++k) {
    if (beta.at(k) == 0.0) throw Error(ErrorCode::InvalidArgument, "beta_t must be non-zero in every period");
    gamma.at(k);
  }
  if (form == Form::Nonlinear && (!custom_f || !custom_g))
    throw Error(ErrorCode::NotSpecified, "the nonlinear form needs user-supplied f and g");
}

double additive_f(double x) {
  if (std::abs(x) > 1.0) return (x > 0 ? 1.0 : -1.0) * std::exp(std::abs(std::sin(x)));
  return 0.9 * x + x * x * x;
}

double additive_g(double x) {
  if (std::abs(x) <= 1.5) return x - x * x;
  return 2.0 * (x > 0 ? 1.0 : -1.0) * std::log(std::abs(x));
}

PanelDataset simulate_dgp2(const Dgp2Config& config) {
  config.check();
  std::function<double(double)> f, g;
  switch (config.form) {
    case Form::Linear: f = g = [](double x) { return x; }; break;
    case Form::Additive: f = additive_f; g = additive_g; break;
    case Form::Nonlinear: f = config.custom_f; g = config.custom_g; break;
  }
  auto rng = make_rng(mix_seed(config.seed, 0xD2));
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;

  auto d = empty_panel(config.n, {-2, -1, 0, 1});
  d.covariates.resize(static_cast<Eigen::Index>(config.n), 0);
  for (std::size_t iu = 0; iu < config.n; ++iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    const double theta = nd(rng);
    const double ftheta = f(theta);
    d.treatment[iu] = expit(ftheta) > ud(rng) ? 1 : 0;
    double prev = nd(rng);
    d.outcomes(i, 0) = prev;
    for (int k = 0; k < 3; ++k) {
      const int t = k - 1;
      prev = config.beta.at(k) * ftheta + config.gamma.at(k) * g(prev) + (t - 1) + nd(rng);
      d.outcomes(i, k + 1) = prev;
    }
  }
  return d;
}

StaggeredPanel simulate_staggered(const StaggeredDgpConfig& config) {
  if (config.n < 10 || config.window < 1 || config.pre_periods < 1)
    throw Error(ErrorCode::InvalidArgument, "staggered design needs n >= 10, a window and a pre-period");
  if (!(config.switch_off >= 0.0 && config.switch_off <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "switch_off must be a probability");
  auto rng = make_rng(mix_seed(config.seed, 0x57A6));
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  std::uniform_int_distribution<int> cohort(1, config.window);

  const int t_min = 1 - config.pre_periods;
  const auto n = static_cast<Eigen::Index>(config.n);
  const int periods = config.window + config.pre_periods;
  StaggeredPanel p;
  for (std::size_t i = 0; i < config.n; ++i) p.unit_ids.push_back(unit_label(i));
  for (int t = t_min; t <= config.window; ++t) p.times.push_back(t);
  p.outcomes.resize(n, periods);
  p.covariates.resize(n, 0);
  p.treatment = Eigen::MatrixXi::Zero(n, periods);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = nd(rng);
    const bool adopts = expit(theta) > ud(rng);
    const int start = cohort(rng);
    if (adopts) {
      bool on = true;
      for (int t = start; t <= config.window; ++t) {
        if (t > start && on && ud(rng) < config.switch_off) on = false;
        p.treatment(i, t - t_min) = on ? 1 : 0;
      }
    }
    double prev = nd(rng);
    for (int k = 0; k < periods; ++k) {
      const int t = t_min + k;
      prev = config.beta * theta + config.gamma * prev + (t - 1) + nd(rng);
      p.outcomes(i, k) = prev;
    }
  }
  return p;
}

PanelDataset simulate_clustered(const ClusteredDgpConfig& config) {
  if (config.clusters < 2 || config.cluster_size < 1)
    throw Error(ErrorCode::InvalidArgument, "clustered design needs at least two clusters");
  if (!(config.icc >= 0.0 && config.icc <= 1.0)) throw Error(ErrorCode::InvalidArgument, "icc must lie in [0, 1]");
  auto rng = make_rng(mix_seed(config.seed, 0xC105));
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;

  const std::size_t n = config.clusters * config.cluster_size;
  auto d = empty_panel(n, {-1, 0, 1});
  d.covariates.resize(static_cast<Eigen::Index>(n), 1);
  d.covariate_names = {"x"};
  d.cluster_ids.resize(n);
  const double shared = std::sqrt(config.icc), own = std::sqrt(1.0 - config.icc);

  std::vector<int> arm(config.clusters);
  std::vector<double> alpha(config.clusters);
  for (std::size_t j = 0; j < config.clusters; ++j) {
    alpha[j] = nd(rng);
    arm[j] = expit(alpha[j]) > ud(rng) ? 1 : 0;
  }
  // Both arms must be present; flip the first cluster otherwise.
  int treated = 0;
  for (int a : arm) treated += a;
  if (treated == 0 || treated == static_cast<int>(config.clusters)) arm[0] = 1 - arm[0];

  std::size_t i = 0;
  for (std::size_t j = 0; j < config.clusters; ++j) {
    const double shock[3] = {nd(rng), nd(rng), nd(rng)};
    for (std::size_t m = 0; m < config.cluster_size; ++m, ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double x = 0.5 * alpha[j] + nd(rng);
      d.covariates(r, 0) = x;
      d.treatment[i] = arm[j];
      d.cluster_ids[i] = "c" + std::to_string(j + 1);
      for (int k = 0; k < 3; ++k) {
        const int t = k - 1;
        d.outcomes(r, k) = alpha[j] + x + t + shared * shock[k] + own * nd(rng);
      }
    }
  }
  return d;
}

}  // namespace gdid
