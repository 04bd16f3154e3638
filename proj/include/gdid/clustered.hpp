#pragma once

#include "gdid/estimators.hpp"
#include "gdid/inference.hpp"
#include "gdid/learners.hpp"
#include "gdid/panel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gdid {

// Cluster membership derived from PanelDataset::cluster_ids, in order of
// first appearance.
struct ClusterIndex {
  std::vector<std::string> labels;
  std::vector<std::size_t> cluster_of;            // per unit
  std::vector<std::vector<std::size_t>> members;  // per cluster
  std::vector<int> treatment;                     // per cluster

  std::size_t n_clusters() const { return labels.size(); }
};

// Errors: InvalidArgument (no cluster labels, treatment varying within a
// cluster, a single arm), EmptyCluster.
ClusterIndex index_clusters(const PanelDataset& dataset);

enum class ClusterSummary { Mean, MeanAndSize };

// V = (W, W~) per unit, W~ the cluster summary of W. cluster_features holds
// W~ once per cluster for the propensity models.
struct ClusterConditioningSet {
  int anchor_time = 0;
  Matrix features;
  Matrix cluster_features;
  std::vector<std::string> names;
};

ClusterConditioningSet summarize_clusters(const PanelDataset& dataset, const ClusterIndex& clusters,
                                          const ConditioningSet& conditioning,
                                          ClusterSummary summary = ClusterSummary::Mean);

// Unit-level predictions; p and p0 come from cluster-level models and are
// therefore constant within a cluster.
struct ClusterFits {
  Vector m1, m0, p, p0;
  double trim_eps = kDefaultTrimEps;
  int lag_depth = 0;
  std::vector<std::string> warnings;
};

struct ClusterFitOptions {
  int folds = 5;  // < 2 selects the no-split path
  std::uint64_t seed = 0;
  double trim_eps = kDefaultTrimEps;
  int threads = 1;
};

// Folds are formed over clusters. m1/m0 are trained on units of control
// clusters, p/p0 on cluster summaries. Errors: FoldWithoutControls.
ClusterFits cross_fit_clustered(const PanelDataset& dataset, const ClusterIndex& clusters,
                                const ClusterConditioningSet& v0, const ClusterConditioningSet& v_m1,
                                const LearnerSpec& spec, const ClusterFitOptions& options = {});

// N1^-1 double sum over clusters and members; one influence entry per
// cluster (the member sum), centered at n_j * tau_hat by the plug-in variance.
// Errors: ClusterPropensityMismatch, MissingFits.
AttEstimate estimate_clustered_gdid(const PanelDataset& dataset, const ClusterIndex& clusters, const ClusterFits& fits,
                                    double trim_eps = kDefaultTrimEps);

// One multiplier per cluster applied to the cluster influence entries.
BootstrapResult cluster_multiplier_bootstrap(const AttEstimate& estimate, const BootstrapConfig& config,
                                             double level = 0.95);

// Keeps at most treated_cap units per treated cluster and control_cap per
// control cluster (0 = no cap), sampled without replacement.
PanelDataset cap_clusters(const PanelDataset& dataset, std::size_t treated_cap, std::size_t control_cap,
                          std::uint64_t seed);

}  // namespace gdid
