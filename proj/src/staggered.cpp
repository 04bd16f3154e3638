#include "gdid/staggered.hpp"

#include "gdid/errors.hpp"
#include "internal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace gdid {

Eigen::Index StaggeredPanel::column(int t) const {
  if (t < t_min() || t > t_max()) throw Error(ErrorCode::InvalidArgument, "time " + std::to_string(t) + " outside the panel");
  return static_cast<Eigen::Index>(t - t_min());
}

std::vector<int> StaggeredPanel::path(std::size_t unit, int t) const {
  std::vector<int> out;
  for (int s = 1; s <= t; ++s) out.push_back(treatment(static_cast<Eigen::Index>(unit), column(s)));
  return out;
}

StaggeredPanel load_staggered_csv(const std::string& path, const CsvSchema& schema) {
  const auto table = read_csv(path);
  const auto cu = table.col(schema.unit);
  const auto ct = table.col(schema.time);
  const auto cy = table.col(schema.outcome);
  const auto ca = table.col(schema.treatment);
  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty())
    for (const auto& h : table.header)
      if (!schema.covariate_prefix.empty() && h.rfind(schema.covariate_prefix, 0) == 0) cov_names.push_back(h);
  std::vector<std::size_t> cx;
  for (const auto& c : cov_names) cx.push_back(table.col(c));

  std::vector<std::string> units;
  std::unordered_map<std::string, std::size_t> unit_index;
  std::map<int, Eigen::Index> time_col;
  for (const auto& row : table.rows) {
    if (unit_index.emplace(row[cu], units.size()).second) units.push_back(row[cu]);
    time_col[parse_int(row[ct], "time")] = 0;
  }
  std::vector<int> labels;
  for (auto& [t, c] : time_col) {
    c = static_cast<Eigen::Index>(labels.size());
    labels.push_back(t);
  }
  for (std::size_t k = 1; k < labels.size(); ++k)
    if (labels[k] != labels[k - 1] + 1) throw Error(ErrorCode::InvalidArgument, "time labels are not consecutive");

  const auto n = static_cast<Eigen::Index>(units.size());
  const auto T = static_cast<Eigen::Index>(labels.size());
  StaggeredPanel p;
  p.unit_ids = units;
  p.outcomes = Matrix::Constant(n, T, std::numeric_limits<double>::quiet_NaN());
  p.covariates = Matrix::Zero(n, static_cast<Eigen::Index>(cx.size()));
  p.covariate_names = cov_names;
  p.treatment = Eigen::MatrixXi::Zero(n, T);
  for (const auto& row : table.rows) {
    const auto i = static_cast<Eigen::Index>(unit_index.at(row[cu]));
    const auto k = time_col.at(parse_int(row[ct], "time"));
    if (!std::isnan(p.outcomes(i, k)))
      throw Error(ErrorCode::DuplicateRow, "unit " + row[cu] + " time " + row[ct] + " appears twice");
    p.outcomes(i, k) = parse_real(row[cy], "outcome of unit " + row[cu]);
    p.treatment(i, k) = parse_treatment(row[ca], row[cu]);
    for (std::size_t j = 0; j < cx.size(); ++j)
      p.covariates(i, static_cast<Eigen::Index>(j)) = parse_real(row[cx[j]], cov_names[j] + " of unit " + row[cu]);
  }
  if (!p.outcomes.allFinite()) throw Error(ErrorCode::MissingCell, "unbalanced panel: some unit lacks a period");

  Eigen::Index first = -1;
  for (Eigen::Index k = 0; k < T && first < 0; ++k)
    if (p.treatment.col(k).maxCoeff() > 0) first = k;
  if (first < 0) throw Error(ErrorCode::InvalidArgument, "no unit is ever treated");
  p.times.resize(static_cast<std::size_t>(T));
  for (Eigen::Index k = 0; k < T; ++k) p.times[static_cast<std::size_t>(k)] = static_cast<int>(k - first + 1);
  return p;
}

std::optional<int> TreatmentHistory::adoption_time() const {
  for (std::size_t s = 0; s < path.size(); ++s)
    if (path[s] == 1) return static_cast<int>(s) + 1;
  return std::nullopt;
}

std::optional<int> TreatmentHistory::last_pre_period() const {
  const auto a = adoption_time();
  if (!a) return std::nullopt;
  return *a - 1;
}

std::string TreatmentHistory::label() const {
  std::string s;
  for (int a : path) s.push_back(a ? '1' : '0');
  return s;
}

namespace {

bool all_zero(const std::vector<int>& p) {
  return std::all_of(p.begin(), p.end(), [](int a) { return a == 0; });
}

void check_target(const StaggeredPanel& panel, int t) {
  if (t < 1 || t > panel.t_max())
    throw Error(ErrorCode::InvalidArgument, "target time " + std::to_string(t) + " outside the treatment window");
}

}  // namespace

HistorySet enumerate_histories(const StaggeredPanel& panel, int t, std::size_t min_group_size, int lag_depth) {
  check_target(panel, t);
  std::map<std::vector<int>, std::size_t> counts;
  HistorySet out;
  out.target_time = t;
  for (std::size_t i = 0; i < panel.n_units(); ++i) {
    auto p = panel.path(i, t);
    if (all_zero(p))
      ++out.never_treated;
    else
      ++counts[p];
  }
  if (out.never_treated == 0) throw Error(ErrorCode::NoNeverTreatedUnits, "no unit is untreated through t = " + std::to_string(t));
  for (const auto& [p, c] : counts) {
    TreatmentHistory h{p};
    const int anchor = *h.last_pre_period();
    if (c < min_group_size) {
      out.excluded.push_back({h, c, "group size " + std::to_string(c) + " below " + std::to_string(min_group_size)});
    } else if (anchor - lag_depth < panel.t_min()) {
      out.excluded.push_back({h, c, "not enough pre-periods for lag depth " + std::to_string(lag_depth)});
    } else {
      out.admissible.push_back(h);
      out.group_sizes.push_back(c);
    }
  }
  return out;
}

GroupTimePanel group_time_panel(const StaggeredPanel& panel, const TreatmentHistory& history, int t) {
  check_target(panel, t);
  if (history.length() != t)
    throw Error(ErrorCode::HistoryNotInXi, "history " + history.label() + " does not have length " + std::to_string(t));
  const auto anchor = history.last_pre_period();
  if (!anchor) throw Error(ErrorCode::HistoryNotInXi, "the all-zero history is the comparison pool");

  GroupTimePanel out;
  std::size_t treated = 0;
  for (std::size_t i = 0; i < panel.n_units(); ++i) {
    const auto p = panel.path(i, t);
    if (p == history.path) {
      out.units.push_back(i);
      ++treated;
    } else if (all_zero(p)) {
      out.units.push_back(i);
    }
  }
  if (treated == 0) throw Error(ErrorCode::HistoryNotInXi, "no unit follows history " + history.label());
  if (treated == out.units.size())
    throw Error(ErrorCode::NoNeverTreatedUnits, "no unit is untreated through t = " + std::to_string(t));

  auto& d = out.data;
  const int pre_periods = *anchor - panel.t_min() + 1;
  for (int s = panel.t_min(); s <= *anchor; ++s) d.times.push_back(s - *anchor);
  d.times.push_back(1);
  d.covariate_names = panel.covariate_names;
  const auto m = static_cast<Eigen::Index>(out.units.size());
  d.outcomes.resize(m, pre_periods + 1);
  d.covariates.resize(m, panel.covariates.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<Eigen::Index>(out.units[static_cast<std::size_t>(r)]);
    d.unit_ids.push_back(panel.unit_ids[static_cast<std::size_t>(i)]);
    d.treatment.push_back(panel.path(static_cast<std::size_t>(i), t) == history.path ? 1 : 0);
    d.outcomes.row(r).head(pre_periods) = panel.outcomes.row(i).head(pre_periods);
    d.outcomes(r, pre_periods) = panel.outcomes(i, panel.column(t));
    if (panel.covariates.cols() > 0) d.covariates.row(r) = panel.covariates.row(i);
  }
  return out;
}

GroupTimeEffect estimate_group_time(const StaggeredPanel& panel, const TreatmentHistory& history, int t,
                                    const NuisanceFits& fits, double trim_eps) {
  const auto gp = group_time_panel(panel, history, t);
  GroupTimeEffect out;
  out.history = history;
  out.target_time = t;
  out.estimate = estimate_gdid(gp.data, fits, trim_eps);
  out.estimate.estimand = Estimand::GroupTime;
  out.units = gp.units;
  out.n_units_total = panel.n_units();
  out.n_in_group = static_cast<std::size_t>(gp.data.n_treated());
  return out;
}

GroupTimeEffect fit_group_time(const StaggeredPanel& panel, const TreatmentHistory& history, int t,
                               const GroupTimeOptions& options) {
  const auto gp = group_time_panel(panel, history, t);
  const auto cond0 = build_conditioning(gp.data, 0, options.lag_depth);
  const auto cond_m1 = build_conditioning(gp.data, -1, options.lag_depth);
  const auto plan = options.folds >= 2 ? make_plan(gp.data.treatment, options.folds, options.seed) : CrossFitPlan::none();
  CrossFitOptions cf;
  cf.trim_eps = options.trim_eps;
  cf.threads = options.threads;
  const auto fits = cross_fit_nuisances(gp.data, cond0, cond_m1, options.spec, plan, cf);
  return estimate_group_time(panel, history, t, fits, options.trim_eps);
}

AggregationWeights preset_weights(WeightKind kind, const std::vector<TreatmentHistory>& histories, int t,
                                  std::optional<int> s, const std::vector<std::size_t>& group_sizes,
                                  bool by_group_size) {
  if (by_group_size && group_sizes.size() != histories.size())
    throw Error(ErrorCode::InvalidArgument, "group sizes must align with histories");
  if ((kind == WeightKind::AdoptedAtS || kind == WeightKind::AdoptedAtSAndTreatedAtT) && !s)
    throw Error(ErrorCode::InvalidArgument, "adoption-time presets need s");
  if (kind == WeightKind::Custom) throw Error(ErrorCode::InvalidArgument, "custom weights are supplied by the caller");
  AggregationWeights w;
  w.kind = kind;
  double total = 0.0;
  for (std::size_t h = 0; h < histories.size(); ++h) {
    const auto& hist = histories[h];
    if (hist.length() < t) throw Error(ErrorCode::InvalidArgument, "history shorter than t");
    const bool treated_at_t = hist.path[static_cast<std::size_t>(t - 1)] == 1;
    const bool adopted_at_s = s && hist.adoption_time() == *s;
    bool ind = false;
    switch (kind) {
      case WeightKind::TreatedAtT: ind = treated_at_t; break;
      case WeightKind::AdoptedAtS: ind = adopted_at_s; break;
      case WeightKind::AdoptedAtSAndTreatedAtT: ind = adopted_at_s && treated_at_t; break;
      case WeightKind::Custom: break;
    }
    const double v = ind ? (by_group_size ? static_cast<double>(group_sizes[h]) : 1.0) : 0.0;
    w.entries.emplace_back(hist, v);
    total += v;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptySelection, "no history satisfies the preset indicator");
  for (auto& e : w.entries) e.second /= total;
  return w;
}

AttEstimate aggregate_effects(const std::vector<GroupTimeEffect>& effects, const AggregationWeights& weights) {
  if (effects.empty()) throw Error(ErrorCode::WeightMismatch, "no effects to aggregate");
  if (weights.entries.size() != effects.size())
    throw Error(ErrorCode::WeightMismatch, "weights do not cover exactly the supplied effects");
  std::vector<double> omega(effects.size());
  std::vector<char> used(weights.entries.size(), 0);
  double total = 0.0;
  for (std::size_t h = 0; h < effects.size(); ++h) {
    bool found = false;
    for (std::size_t k = 0; k < weights.entries.size(); ++k) {
      if (used[k] || !(weights.entries[k].first == effects[h].history)) continue;
      if (weights.entries[k].second < 0.0) throw Error(ErrorCode::WeightMismatch, "negative weight");
      omega[h] = weights.entries[k].second;
      used[k] = 1;
      found = true;
      break;
    }
    if (!found) throw Error(ErrorCode::WeightMismatch, "no weight for history " + effects[h].history.label());
    total += omega[h];
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::WeightMismatch, "weights do not sum to one");

  const auto n = effects.front().n_units_total;
  double denom = 0.0;
  for (const auto& e : effects) {
    if (e.n_units_total != n) throw Error(ErrorCode::WeightMismatch, "effects come from different panels");
    denom += e.estimate.denominator;
  }
  AttEstimate out;
  out.estimand = Estimand::Aggregated;
  out.influence = Vector::Zero(static_cast<Eigen::Index>(n));
  out.offsets = Vector::Zero(static_cast<Eigen::Index>(n));
  out.denominator = denom;
  out.n = n;
  out.n_treated = static_cast<std::size_t>(denom);
  out.trim_eps = effects.front().estimate.trim_eps;
  out.lag_depth = effects.front().estimate.lag_depth;
  out.tau_hat = 0.0;
  for (std::size_t h = 0; h < effects.size(); ++h) {
    const auto& e = effects[h].estimate;
    // Rescale so that sum(influence) / denom reproduces omega_h * tau_h.
    const double scale = omega[h] * denom / e.denominator;
    for (std::size_t r = 0; r < effects[h].units.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(effects[h].units[r]);
      out.influence[i] += scale * e.influence[static_cast<Eigen::Index>(r)];
      const double off = e.offsets.size() ? e.offsets[static_cast<Eigen::Index>(r)] : e.tau_hat;
      out.offsets[i] += scale * off;
    }
    out.tau_hat += omega[h] * e.tau_hat;
    for (const auto& w : e.warnings) out.warnings.push_back(effects[h].history.label() + ": " + w);
  }
  return out;
}

}  // namespace gdid
