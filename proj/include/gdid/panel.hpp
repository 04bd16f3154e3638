#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace gdid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Balanced panel with a single post period at t = 1 and pre periods t_min..0.
// Outcomes are units x times; covariates are time-invariant.
struct PanelDataset {
  std::vector<std::string> unit_ids;
  std::vector<int> times;  // consecutive, ascending, last entry == 1
  Matrix outcomes;
  Matrix covariates;
  std::vector<std::string> covariate_names;
  std::vector<int> treatment;
  // Optional cluster label per unit (empty when the data are not clustered).
  std::vector<std::string> cluster_ids;

  std::size_t n_units() const { return unit_ids.size(); }
  std::size_t n_covariates() const { return static_cast<std::size_t>(covariates.cols()); }
  int t_min() const { return times.empty() ? 1 : times.front(); }
  int n_treated() const;

  // Column of `outcomes` holding period t; throws InvalidArgument when absent.
  Eigen::Index column(int t) const;
  Vector outcome_at(int t) const { return outcomes.col(column(t)); }

  // Structural violations of the dataset invariants (empty when valid).
  std::vector<std::string> structural_errors() const;

  // Units in `order` (a permutation or a subset), keeping every column.
  PanelDataset subset(const std::vector<std::size_t>& order) const;
};

enum class Layout { Long, Wide };

// Column mapping for CSV ingestion. Covariates are either listed explicitly
// or picked up by prefix.
struct CsvSchema {
  Layout layout = Layout::Long;
  std::string unit = "unit";
  std::string time = "time";
  std::string outcome = "outcome";
  std::string treatment = "treatment";
  std::vector<std::string> covariates;
  std::string covariate_prefix = "cov_";
  // Wide layout: outcome columns are `<outcome_prefix><label>`; labels are
  // integers with an optional leading 'm' for negatives (y_m1, y_0, y_1).
  std::string outcome_prefix = "y_";
  std::string cluster;  // empty: no cluster column
};

// Reads a balanced panel. Calendar times are remapped so the last period is 1.
// Errors: Io, MissingCell, NonBinaryTreatment, DuplicateRow, InvalidArgument.
PanelDataset load_panel_csv(const std::string& path, const CsvSchema& schema);

// Features X_i followed by Y_{i,anchor}, Y_{i,anchor-1}, ... (lag_depth values).
struct ConditioningSet {
  int anchor_time = 0;
  int lag_depth = 0;
  Matrix features;
  std::vector<std::string> names;

  Eigen::Index width() const { return features.cols(); }
};

ConditioningSet build_conditioning(const PanelDataset& dataset, int anchor_time, int lag_depth);

struct ArmOverlap {
  int arm = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double fraction_above = 0.0;  // share with crude propensity > 1 - trim_eps
};

struct ValidationReport {
  std::vector<ArmOverlap> overlap_diagnostics;
  double fraction_above = 0.0;  // over all units
  bool separation = false;
  std::vector<std::string> structural_errors;
  std::vector<std::string> warnings;

  bool ok() const { return structural_errors.empty(); }
};

inline constexpr double kDefaultTrimEps = 0.01;

ValidationReport validate(const PanelDataset& dataset, const ConditioningSet& conditioning,
                          double trim_eps = kDefaultTrimEps);

}  // namespace gdid
