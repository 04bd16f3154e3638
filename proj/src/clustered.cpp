#include "gdid/clustered.hpp"

#include "gdid/errors.hpp"
#include "internal.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace gdid {

ClusterIndex index_clusters(const PanelDataset& dataset) {
  if (dataset.cluster_ids.size() != dataset.n_units())
    throw Error(ErrorCode::InvalidArgument, "dataset carries no cluster labels");
  ClusterIndex idx;
  std::unordered_map<std::string, std::size_t> pos;
  idx.cluster_of.resize(dataset.n_units());
  for (std::size_t i = 0; i < dataset.n_units(); ++i) {
    const auto& label = dataset.cluster_ids[i];
    if (label.empty()) throw Error(ErrorCode::EmptyCluster, "unit " + dataset.unit_ids[i] + " has an empty cluster label");
    auto [it, fresh] = pos.emplace(label, idx.labels.size());
    if (fresh) {
      idx.labels.push_back(label);
      idx.members.emplace_back();
      idx.treatment.push_back(dataset.treatment[i]);
    } else if (idx.treatment[it->second] != dataset.treatment[i]) {
      throw Error(ErrorCode::InvalidArgument, "treatment varies within cluster " + label);
    }
    idx.cluster_of[i] = it->second;
    idx.members[it->second].push_back(i);
  }
  const auto treated = std::count(idx.treatment.begin(), idx.treatment.end(), 1);
  if (treated == 0 || treated == static_cast<long>(idx.n_clusters()))
    throw Error(ErrorCode::InvalidArgument, "need at least one treated and one control cluster");
  return idx;
}

ClusterConditioningSet summarize_clusters(const PanelDataset& dataset, const ClusterIndex& clusters,
                                          const ConditioningSet& w, ClusterSummary summary) {
  const auto n = static_cast<Eigen::Index>(dataset.n_units());
  if (w.features.rows() != n) throw Error(ErrorCode::InvalidArgument, "conditioning set does not match the dataset");
  const auto width = w.features.cols();
  const auto extra = summary == ClusterSummary::MeanAndSize ? 1 : 0;
  const auto c = static_cast<Eigen::Index>(clusters.n_clusters());
  ClusterConditioningSet out;
  out.anchor_time = w.anchor_time;
  out.cluster_features = Matrix::Zero(c, width + extra);
  for (Eigen::Index j = 0; j < c; ++j) {
    const auto& m = clusters.members[static_cast<std::size_t>(j)];
    if (m.empty()) throw Error(ErrorCode::EmptyCluster, "cluster " + clusters.labels[static_cast<std::size_t>(j)] + " has no units");
    for (auto i : m) out.cluster_features.row(j).head(width) += w.features.row(static_cast<Eigen::Index>(i));
    out.cluster_features.row(j).head(width) /= static_cast<double>(m.size());
    if (extra) out.cluster_features(j, width) = static_cast<double>(m.size());
  }
  out.features.resize(n, 2 * width + extra);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.features.row(i).head(width) = w.features.row(i);
    out.features.row(i).tail(width + extra) =
        out.cluster_features.row(static_cast<Eigen::Index>(clusters.cluster_of[static_cast<std::size_t>(i)]));
  }
  out.names = w.names;
  for (const auto& name : w.names) out.names.push_back("mean(" + name + ")");
  if (extra) out.names.emplace_back("cluster_size");
  return out;
}

ClusterFits cross_fit_clustered(const PanelDataset& dataset, const ClusterIndex& clusters,
                                const ClusterConditioningSet& v0, const ClusterConditioningSet& v_m1,
                                const LearnerSpec& spec, const ClusterFitOptions& options) {
  spec.check();
  const auto n = static_cast<Eigen::Index>(dataset.n_units());
  const auto c = clusters.n_clusters();
  const bool split = options.folds >= 2;
  const auto plan = split ? make_plan(clusters.treatment, options.folds, options.seed) : CrossFitPlan::none();
  const int folds = split ? plan.folds : 1;
  const Vector y1 = dataset.outcome_at(1);
  const Vector y0 = dataset.outcome_at(0);
  Vector ac(static_cast<Eigen::Index>(c));
  for (std::size_t j = 0; j < c; ++j) ac[static_cast<Eigen::Index>(j)] = clusters.treatment[j];

  ClusterFits out;
  out.trim_eps = options.trim_eps;
  out.m1.resize(n);
  out.m0.resize(n);
  out.p.resize(n);
  out.p0.resize(n);
  const double lo = options.trim_eps, hi = 1.0 - options.trim_eps;

  struct FoldResult {
    std::vector<Eigen::Index> test_units;
    Vector m1, m0;
    std::vector<Eigen::Index> test_clusters;
    Vector p, p0;
    std::vector<std::string> warnings;
  };
  std::vector<FoldResult> results(static_cast<std::size_t>(folds));
  parallel_for(static_cast<std::size_t>(folds), options.threads, [&](std::size_t fs) {
    const int f = static_cast<int>(fs);
    auto in_test = [&](std::size_t j) { return split && plan.fold_of[j] == f; };
    std::vector<Eigen::Index> tr_clusters, te_clusters, tr_ctrl_units, te_units;
    for (std::size_t j = 0; j < c; ++j) {
      const bool test = !split || in_test(j);
      const bool train = !split || !in_test(j);
      if (train) {
        tr_clusters.push_back(static_cast<Eigen::Index>(j));
        if (!clusters.treatment[j])
          for (auto i : clusters.members[j]) tr_ctrl_units.push_back(static_cast<Eigen::Index>(i));
      }
      if (test) {
        te_clusters.push_back(static_cast<Eigen::Index>(j));
        for (auto i : clusters.members[j]) te_units.push_back(static_cast<Eigen::Index>(i));
      }
    }
    if (tr_ctrl_units.size() < 2)
      throw Error(ErrorCode::FoldWithoutControls, "training clusters of fold " + std::to_string(f) + " lack control units");
    const std::uint64_t s = mix_seed(options.seed, fs, 0xC1);
    auto& r = results[fs];
    auto m1 = fit_regression(v0.features(tr_ctrl_units, Eigen::all), y1(tr_ctrl_units), spec, mix_seed(s, 1));
    auto m0 = fit_regression(v_m1.features(tr_ctrl_units, Eigen::all), y0(tr_ctrl_units), spec, mix_seed(s, 2));
    auto p = fit_propensity(v0.cluster_features(tr_clusters, Eigen::all), ac(tr_clusters), spec, mix_seed(s, 3));
    auto p0 = fit_propensity(v_m1.cluster_features(tr_clusters, Eigen::all), ac(tr_clusters), spec, mix_seed(s, 4));
    r.test_units = te_units;
    r.test_clusters = te_clusters;
    r.m1 = m1.model->predict(v0.features(te_units, Eigen::all));
    r.m0 = m0.model->predict(v_m1.features(te_units, Eigen::all));
    r.p = p.model->predict(v0.cluster_features(te_clusters, Eigen::all)).cwiseMax(lo).cwiseMin(hi);
    r.p0 = p0.model->predict(v_m1.cluster_features(te_clusters, Eigen::all)).cwiseMax(lo).cwiseMin(hi);
    for (auto* fit : {&m1, &m0, &p, &p0})
      for (auto& w : fit->warnings) r.warnings.push_back("fold " + std::to_string(f) + ": " + w);
  });
  for (auto& r : results) {
    out.m1(r.test_units) = r.m1;
    out.m0(r.test_units) = r.m0;
    for (std::size_t k = 0; k < r.test_clusters.size(); ++k) {
      const auto j = static_cast<std::size_t>(r.test_clusters[k]);
      for (auto i : clusters.members[j]) {
        out.p[static_cast<Eigen::Index>(i)] = r.p[static_cast<Eigen::Index>(k)];
        out.p0[static_cast<Eigen::Index>(i)] = r.p0[static_cast<Eigen::Index>(k)];
      }
    }
    for (auto& w : r.warnings) out.warnings.push_back(std::move(w));
  }
  return out;
}

AttEstimate estimate_clustered_gdid(const PanelDataset& dataset, const ClusterIndex& clusters, const ClusterFits& fits,
                                    double trim_eps) {
  if (!(trim_eps > 0.0 && trim_eps < 0.5)) throw Error(ErrorCode::InvalidArgument, "trim_eps must lie in (0, 0.5)");
  const auto n = static_cast<Eigen::Index>(dataset.n_units());
  for (const Vector* v : {&fits.m1, &fits.m0, &fits.p, &fits.p0})
    if (v->size() != n) throw Error(ErrorCode::MissingFits, "cluster fits do not match the dataset");
  const Vector y1 = dataset.outcome_at(1);
  const Vector y0 = dataset.outcome_at(0);
  const auto c = static_cast<Eigen::Index>(clusters.n_clusters());

  AttEstimate est;
  est.estimand = Estimand::ClusteredGdid;
  est.influence = Vector::Zero(c);
  est.offsets = Vector::Zero(c);
  est.trim_eps = trim_eps;
  est.lag_depth = fits.lag_depth;
  est.n = static_cast<std::size_t>(c);
  std::size_t n1 = 0;
  for (Eigen::Index j = 0; j < c; ++j) {
    const auto& m = clusters.members[static_cast<std::size_t>(j)];
    const int a = clusters.treatment[static_cast<std::size_t>(j)];
    const auto first = static_cast<Eigen::Index>(m.front());
    double s = 0.0;
    for (auto iu : m) {
      const auto i = static_cast<Eigen::Index>(iu);
      if (fits.p[i] != fits.p[first] || fits.p0[i] != fits.p0[first])
        throw Error(ErrorCode::ClusterPropensityMismatch,
                    "propensity varies within cluster " + clusters.labels[static_cast<std::size_t>(j)]);
      const double p = std::min(fits.p[i], 1.0 - trim_eps);
      const double p0 = std::min(fits.p0[i], 1.0 - trim_eps);
      s += aipw_summand(y1[i], a, p, fits.m1[i]) - aipw_summand(y0[i], a, p0, fits.m0[i]);
    }
    est.influence[j] = s;
    if (a) n1 += m.size();
  }
  if (n1 == 0) throw Error(ErrorCode::InvalidArgument, "no treated units");
  est.n_treated = n1;
  est.denominator = static_cast<double>(n1);
  est.tau_hat = est.influence.sum() / est.denominator;
  for (Eigen::Index j = 0; j < c; ++j)
    est.offsets[j] = static_cast<double>(clusters.members[static_cast<std::size_t>(j)].size()) * est.tau_hat;
  est.warnings = fits.warnings;
  return est;
}

BootstrapResult cluster_multiplier_bootstrap(const AttEstimate& estimate, const BootstrapConfig& config, double level) {
  return multiplier_bootstrap(estimate, config, level);
}

PanelDataset cap_clusters(const PanelDataset& dataset, std::size_t treated_cap, std::size_t control_cap,
                          std::uint64_t seed) {
  const auto clusters = index_clusters(dataset);
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < clusters.n_clusters(); ++j) {
    auto m = clusters.members[j];
    const std::size_t cap = clusters.treatment[j] ? treated_cap : control_cap;
    if (cap > 0 && m.size() > cap) {
      auto rng = make_rng(mix_seed(seed, j, 0xCA9));
      std::shuffle(m.begin(), m.end(), rng);
      m.resize(cap);
    }
    keep.insert(keep.end(), m.begin(), m.end());
  }
  std::sort(keep.begin(), keep.end());
  return dataset.subset(keep);
}

}  // namespace gdid
