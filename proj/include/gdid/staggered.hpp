#pragma once

#include "gdid/estimators.hpp"
#include "gdid/learners.hpp"
#include "gdid/panel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gdid {

// Panel with a per-period treatment indicator. Periods t <= 0 precede the
// treatment window 1..T, where every unit is untreated.
struct StaggeredPanel {
  std::vector<std::string> unit_ids;
  std::vector<int> times;        // consecutive, t_min..T with T >= 1
  Matrix outcomes;               // units x times
  Matrix covariates;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXi treatment;     // units x times, zero for t <= 0

  std::size_t n_units() const { return unit_ids.size(); }
  int t_min() const { return times.front(); }
  int t_max() const { return times.back(); }
  Eigen::Index column(int t) const;

  // Treatment path (a_1, ..., a_t) of unit i.
  std::vector<int> path(std::size_t unit, int t) const;
};

// Long layout with a time-varying treatment column. Calendar times are
// shifted so the first period in which any unit is treated becomes 1.
StaggeredPanel load_staggered_csv(const std::string& path, const CsvSchema& schema);

struct TreatmentHistory {
  std::vector<int> path;  // a_1..a_t

  int length() const { return static_cast<int>(path.size()); }
  // First period with a_s = 1; empty for the all-zero path.
  std::optional<int> adoption_time() const;
  // adoption_time - 1, the anchor of the pre-period comparison.
  std::optional<int> last_pre_period() const;
  std::string label() const;  // e.g. "011"

  bool operator==(const TreatmentHistory& other) const { return path == other.path; }
  bool operator<(const TreatmentHistory& other) const { return path < other.path; }
};

struct ExcludedHistory {
  TreatmentHistory history;
  std::size_t group_size = 0;
  std::string reason;
};

struct HistorySet {
  int target_time = 1;
  std::vector<TreatmentHistory> admissible;  // the set Xi_t
  std::vector<std::size_t> group_sizes;      // aligned with admissible
  std::vector<ExcludedHistory> excluded;
  std::size_t never_treated = 0;             // units with a zero path through t
};

inline constexpr std::size_t kDefaultMinGroupSize = 5;

// Observed non-zero histories through t with enough units and enough
// pre-periods for lag_depth. Errors: NoNeverTreatedUnits.
HistorySet enumerate_histories(const StaggeredPanel& panel, int t, std::size_t min_group_size = kDefaultMinGroupSize,
                               int lag_depth = 0);

// Two-period view for one history: units with that history (treated) and
// never-treated-through-t units (control); the anchor period maps to 0 and
// period t maps to 1.
struct GroupTimePanel {
  PanelDataset data;
  std::vector<std::size_t> units;  // rows of `data` in the full panel
};

// Errors: HistoryNotInXi, InsufficientHistory.
GroupTimePanel group_time_panel(const StaggeredPanel& panel, const TreatmentHistory& history, int t);

struct GroupTimeEffect {
  TreatmentHistory history;
  int target_time = 1;
  AttEstimate estimate;            // indexed by GroupTimePanel::units
  std::vector<std::size_t> units;
  std::size_t n_units_total = 0;   // size of the full panel
  std::size_t n_in_group = 0;
};

// gDiD on the group-time panel with fits built for that panel.
GroupTimeEffect estimate_group_time(const StaggeredPanel& panel, const TreatmentHistory& history, int t,
                                    const NuisanceFits& fits, double trim_eps = kDefaultTrimEps);

struct GroupTimeOptions {
  LearnerSpec spec = LearnerSpec::linear();
  int lag_depth = 1;
  int folds = 5;  // < 2 selects the no-split path
  std::uint64_t seed = 0;
  double trim_eps = kDefaultTrimEps;
  int threads = 1;
};

// Builds the group-time panel, fits nuisances and estimates.
GroupTimeEffect fit_group_time(const StaggeredPanel& panel, const TreatmentHistory& history, int t,
                               const GroupTimeOptions& options);

enum class WeightKind { TreatedAtT, AdoptedAtS, AdoptedAtSAndTreatedAtT, Custom };

struct AggregationWeights {
  WeightKind kind = WeightKind::Custom;
  std::vector<std::pair<TreatmentHistory, double>> entries;
};

// Indicator weights normalized over the supplied histories. With
// by_group_size the indicators are multiplied by group sizes first.
// Errors: EmptySelection, InvalidArgument.
AggregationWeights preset_weights(WeightKind kind, const std::vector<TreatmentHistory>& histories, int t,
                                  std::optional<int> s = std::nullopt,
                                  const std::vector<std::size_t>& group_sizes = {}, bool by_group_size = false);

// Weighted combination of group-time effects; influence values are combined
// on the full panel's units. Errors: WeightMismatch.
AttEstimate aggregate_effects(const std::vector<GroupTimeEffect>& effects, const AggregationWeights& weights);

}  // namespace gdid
