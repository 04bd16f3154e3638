#include "gdid/panel.hpp"

#include "gdid/errors.hpp"
#include "gdid/learners.hpp"
#include "internal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace gdid {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t CsvTable::col(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::InvalidArgument, "column '" + name + "' not in header");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  CsvTable table;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    for (auto& c : cells) c = trim(c);
    if (table.header.empty()) {
      if (!cells.empty() && cells[0].size() >= 3 && cells[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
        cells[0] = cells[0].substr(3);
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(n) + ": expected " +
                                                  std::to_string(table.header.size()) + " fields");
    table.rows.push_back(std::move(cells));
    table.line_no.push_back(n);
  }
  if (table.header.empty()) throw Error(ErrorCode::InvalidArgument, path + ": missing header row");
  return table;
}

double parse_real(const std::string& cell, const std::string& what) {
  if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan")
    throw Error(ErrorCode::MissingCell, "missing value for " + what);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "not a number: '" + cell + "' (" + what + ")");
  }
  if (used != cell.size()) throw Error(ErrorCode::InvalidArgument, "not a number: '" + cell + "' (" + what + ")");
  if (!std::isfinite(v)) throw Error(ErrorCode::MissingCell, "non-finite value for " + what);
  return v;
}

int parse_int(const std::string& cell, const std::string& what) {
  int v = 0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw Error(ErrorCode::InvalidArgument, "not an integer: '" + cell + "' (" + what + ")");
  return v;
}

int parse_treatment(const std::string& cell, const std::string& unit) {
  if (cell == "0" || cell == "0.0") return 0;
  if (cell == "1" || cell == "1.0") return 1;
  throw Error(ErrorCode::NonBinaryTreatment, "unit " + unit + " has treatment '" + cell + "'");
}

namespace {

std::vector<std::string> covariate_columns(const CsvTable& table, const CsvSchema& schema) {
  if (!schema.covariates.empty()) return schema.covariates;
  std::vector<std::string> out;
  for (const auto& h : table.header)
    if (!schema.covariate_prefix.empty() && h.rfind(schema.covariate_prefix, 0) == 0) out.push_back(h);
  return out;
}

// Calendar labels must be consecutive; they are shifted so the last is 1.
std::vector<int> normalized_times(const std::vector<int>& labels) {
  for (std::size_t k = 1; k < labels.size(); ++k)
    if (labels[k] != labels[k - 1] + 1)
      throw Error(ErrorCode::InvalidArgument, "time labels are not consecutive integers");
  std::vector<int> out(labels.size());
  const int shift = 1 - labels.back();
  for (std::size_t k = 0; k < labels.size(); ++k) out[k] = labels[k] + shift;
  return out;
}

int parse_wide_label(const std::string& label) {
  if (!label.empty() && label[0] == 'm') return -parse_int(label.substr(1), "time label");
  return parse_int(label, "time label");
}

PanelDataset load_long(const CsvTable& table, const CsvSchema& schema) {
  const auto cu = table.col(schema.unit);
  const auto ct = table.col(schema.time);
  const auto cy = table.col(schema.outcome);
  const auto ca = table.col(schema.treatment);
  const auto cov_names = covariate_columns(table, schema);
  std::vector<std::size_t> cx;
  for (const auto& c : cov_names) cx.push_back(table.col(c));
  const bool has_cluster = !schema.cluster.empty();
  const std::size_t cc = has_cluster ? table.col(schema.cluster) : 0;

  std::vector<std::string> units;
  std::unordered_map<std::string, std::size_t> unit_index;
  std::map<int, int> time_set;
  for (const auto& row : table.rows) {
    if (unit_index.emplace(row[cu], units.size()).second) units.push_back(row[cu]);
    time_set[parse_int(row[ct], "time")] = 0;
  }
  std::vector<int> labels;
  for (auto& [t, idx] : time_set) {
    idx = static_cast<int>(labels.size());
    labels.push_back(t);
  }

  const auto n = units.size();
  const auto T = labels.size();
  PanelDataset d;
  d.unit_ids = units;
  d.times = normalized_times(labels);
  d.outcomes = Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(T),
                                std::numeric_limits<double>::quiet_NaN());
  d.covariates = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cx.size()));
  d.covariate_names = cov_names;
  d.treatment.assign(n, 0);
  if (has_cluster) d.cluster_ids.assign(n, "");
  std::vector<char> seen_cov(n, 0);

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto i = static_cast<Eigen::Index>(unit_index.at(row[cu]));
    const auto k = static_cast<Eigen::Index>(time_set.at(parse_int(row[ct], "time")));
    if (!std::isnan(d.outcomes(i, k)))
      throw Error(ErrorCode::DuplicateRow, "unit " + row[cu] + " time " + row[ct] + " appears twice");
    d.outcomes(i, k) = parse_real(row[cy], "outcome of unit " + row[cu]);
    const int a = parse_treatment(row[ca], row[cu]);
    // The single post period carries the arm label.
    if (k == static_cast<Eigen::Index>(T) - 1) d.treatment[static_cast<std::size_t>(i)] = a;
    for (std::size_t j = 0; j < cx.size(); ++j) {
      const double x = parse_real(row[cx[j]], cov_names[j] + " of unit " + row[cu]);
      const auto jj = static_cast<Eigen::Index>(j);
      if (seen_cov[static_cast<std::size_t>(i)] && d.covariates(i, jj) != x)
        throw Error(ErrorCode::InvalidArgument, "covariate " + cov_names[j] + " varies over time for unit " + row[cu]);
      d.covariates(i, jj) = x;
    }
    seen_cov[static_cast<std::size_t>(i)] = 1;
    if (has_cluster) {
      auto& c = d.cluster_ids[static_cast<std::size_t>(i)];
      if (!c.empty() && c != row[cc])
        throw Error(ErrorCode::InvalidArgument, "unit " + row[cu] + " changes cluster");
      c = row[cc];
    }
  }
  for (Eigen::Index i = 0; i < d.outcomes.rows(); ++i)
    for (Eigen::Index k = 0; k < d.outcomes.cols(); ++k)
      if (std::isnan(d.outcomes(i, k)))
        throw Error(ErrorCode::MissingCell, "unit " + units[static_cast<std::size_t>(i)] + " lacks time " +
                                                std::to_string(labels[static_cast<std::size_t>(k)]));
  return d;
}

PanelDataset load_wide(const CsvTable& table, const CsvSchema& schema) {
  const auto cu = table.col(schema.unit);
  const auto ca = table.col(schema.treatment);
  const auto cov_names = covariate_columns(table, schema);
  std::vector<std::size_t> cx;
  for (const auto& c : cov_names) cx.push_back(table.col(c));
  const bool has_cluster = !schema.cluster.empty();
  const std::size_t cc = has_cluster ? table.col(schema.cluster) : 0;

  std::vector<std::pair<int, std::size_t>> ycols;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const auto& h = table.header[j];
    if (h.rfind(schema.outcome_prefix, 0) == 0 &&
        std::find(cov_names.begin(), cov_names.end(), h) == cov_names.end())
      ycols.emplace_back(parse_wide_label(h.substr(schema.outcome_prefix.size())), j);
  }
  if (ycols.empty()) throw Error(ErrorCode::InvalidArgument, "no outcome columns with prefix " + schema.outcome_prefix);
  std::sort(ycols.begin(), ycols.end());
  std::vector<int> labels;
  for (const auto& [t, j] : ycols) {
    if (!labels.empty() && labels.back() == t) throw Error(ErrorCode::DuplicateRow, "time label repeated in header");
    labels.push_back(t);
  }

  PanelDataset d;
  d.times = normalized_times(labels);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  d.outcomes.resize(n, static_cast<Eigen::Index>(ycols.size()));
  d.covariates.resize(n, static_cast<Eigen::Index>(cx.size()));
  d.covariate_names = cov_names;
  std::unordered_map<std::string, int> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    if (!seen.emplace(row[cu], 1).second) throw Error(ErrorCode::DuplicateRow, "unit " + row[cu] + " appears twice");
    d.unit_ids.push_back(row[cu]);
    d.treatment.push_back(parse_treatment(row[ca], row[cu]));
    for (std::size_t k = 0; k < ycols.size(); ++k)
      d.outcomes(i, static_cast<Eigen::Index>(k)) =
          parse_real(row[ycols[k].second], "outcome of unit " + row[cu] + " at " + std::to_string(ycols[k].first));
    for (std::size_t j = 0; j < cx.size(); ++j)
      d.covariates(i, static_cast<Eigen::Index>(j)) = parse_real(row[cx[j]], cov_names[j] + " of unit " + row[cu]);
    if (has_cluster) d.cluster_ids.push_back(row[cc]);
  }
  return d;
}

}  // namespace

int PanelDataset::n_treated() const {
  int s = 0;
  for (int a : treatment) s += a;
  return s;
}

Eigen::Index PanelDataset::column(int t) const {
  if (times.empty() || t < times.front() || t > times.back())
    throw Error(ErrorCode::InvalidArgument, "time " + std::to_string(t) + " outside the panel");
  return static_cast<Eigen::Index>(t - times.front());
}

std::vector<std::string> PanelDataset::structural_errors() const {
  std::vector<std::string> errs;
  const auto n = static_cast<Eigen::Index>(unit_ids.size());
  if (n == 0) errs.emplace_back("dataset has no units");
  if (times.empty()) {
    errs.emplace_back("dataset has no time periods");
  } else {
    if (times.back() != 1) errs.emplace_back("last time index must be 1");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (times[k] != times[k - 1] + 1) {
        errs.emplace_back("time indices are not consecutive");
        break;
      }
  }
  if (outcomes.rows() != n || outcomes.cols() != static_cast<Eigen::Index>(times.size()))
    errs.emplace_back("outcome matrix shape does not match units x times");
  else if (!outcomes.allFinite())
    errs.emplace_back("outcome matrix has missing or non-finite cells");
  if (covariates.rows() != n && covariates.size() > 0) errs.emplace_back("covariate rows do not match units");
  if (!covariates.allFinite()) errs.emplace_back("covariates have missing or non-finite values");
  if (covariate_names.size() != static_cast<std::size_t>(covariates.cols()))
    errs.emplace_back("covariate names do not match covariate columns");
  if (treatment.size() != unit_ids.size()) {
    errs.emplace_back("treatment length does not match units");
  } else {
    int treated = 0;
    bool binary = true;
    for (int a : treatment) {
      if (a != 0 && a != 1) binary = false;
      treated += a == 1;
    }
    if (!binary) errs.emplace_back("treatment is not binary");
    if (treated == 0) errs.emplace_back("no treated units");
    if (treated == static_cast<int>(treatment.size())) errs.emplace_back("no control units");
  }
  if (!cluster_ids.empty() && cluster_ids.size() != unit_ids.size())
    errs.emplace_back("cluster labels do not match units");
  return errs;
}

PanelDataset PanelDataset::subset(const std::vector<std::size_t>& order) const {
  PanelDataset d;
  d.times = times;
  d.covariate_names = covariate_names;
  const auto m = static_cast<Eigen::Index>(order.size());
  d.outcomes.resize(m, outcomes.cols());
  d.covariates.resize(m, covariates.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = order[static_cast<std::size_t>(r)];
    if (i >= unit_ids.size()) throw Error(ErrorCode::InvalidArgument, "subset index out of range");
    d.unit_ids.push_back(unit_ids[i]);
    d.treatment.push_back(treatment[i]);
    if (!cluster_ids.empty()) d.cluster_ids.push_back(cluster_ids[i]);
    d.outcomes.row(r) = outcomes.row(static_cast<Eigen::Index>(i));
    if (covariates.cols() > 0) d.covariates.row(r) = covariates.row(static_cast<Eigen::Index>(i));
  }
  return d;
}

PanelDataset load_panel_csv(const std::string& path, const CsvSchema& schema) {
  const auto table = read_csv(path);
  auto d = schema.layout == Layout::Long ? load_long(table, schema) : load_wide(table, schema);
  if (d.n_units() == 0) throw Error(ErrorCode::InvalidArgument, path + ": no data rows");
  return d;
}

ConditioningSet build_conditioning(const PanelDataset& dataset, int anchor_time, int lag_depth) {
  if (anchor_time > 0) throw Error(ErrorCode::InvalidArgument, "anchor_time must be <= 0");
  if (lag_depth < 0) throw Error(ErrorCode::InvalidArgument, "lag_depth must be non-negative");
  if (lag_depth > 0 && anchor_time - lag_depth + 1 < dataset.t_min())
    throw Error(ErrorCode::InsufficientHistory, "lag " + std::to_string(lag_depth) + " at anchor " +
                                                    std::to_string(anchor_time) + " reaches before t_min = " +
                                                    std::to_string(dataset.t_min()));
  ConditioningSet c;
  c.anchor_time = anchor_time;
  c.lag_depth = lag_depth;
  const auto n = static_cast<Eigen::Index>(dataset.n_units());
  const auto p = dataset.covariates.cols();
  c.features.resize(n, p + lag_depth);
  if (p > 0) c.features.leftCols(p) = dataset.covariates;
  c.names = dataset.covariate_names;
  for (int l = 0; l < lag_depth; ++l) {
    const int t = anchor_time - l;
    c.features.col(p + l) = dataset.outcomes.col(dataset.column(t));
    c.names.push_back("y[" + std::to_string(t) + "]");
  }
  return c;
}

ValidationReport validate(const PanelDataset& dataset, const ConditioningSet& conditioning, double trim_eps) {
  ValidationReport report;
  report.structural_errors = dataset.structural_errors();
  if (!(trim_eps > 0.0 && trim_eps < 0.5)) {
    report.warnings.emplace_back("trim_eps outside (0, 0.5); diagnostics skipped");
    return report;
  }
  if (!report.ok()) return report;
  if (conditioning.features.rows() != static_cast<Eigen::Index>(dataset.n_units())) {
    report.structural_errors.emplace_back("conditioning set does not match the dataset");
    return report;
  }

  Vector a(static_cast<Eigen::Index>(dataset.n_units()));
  for (std::size_t i = 0; i < dataset.n_units(); ++i) a[static_cast<Eigen::Index>(i)] = dataset.treatment[i];
  const auto model = fit_logistic(conditioning.features, a);
  report.separation = model->separated();
  const Vector p = model->predict(conditioning.features);

  std::size_t above_total = 0;
  for (int arm : {1, 0}) {
    ArmOverlap o;
    o.arm = arm;
    o.min = 1.0;
    o.max = 0.0;
    std::size_t above = 0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (dataset.treatment[static_cast<std::size_t>(i)] != arm) continue;
      ++o.count;
      sum += p[i];
      o.min = std::min(o.min, p[i]);
      o.max = std::max(o.max, p[i]);
      if (p[i] > 1.0 - trim_eps) ++above;
    }
    o.mean = o.count ? sum / static_cast<double>(o.count) : 0.0;
    o.fraction_above = o.count ? static_cast<double>(above) / static_cast<double>(o.count) : 0.0;
    above_total += above;
    report.overlap_diagnostics.push_back(o);
  }
  report.fraction_above = static_cast<double>(above_total) / static_cast<double>(p.size());

  if (report.separation)
    report.warnings.emplace_back("complete separation in the crude propensity model");
  if (above_total > 0) {
    std::ostringstream msg;
    msg << "near overlap violation: " << above_total << " of " << p.size()
        << " units have crude propensity above " << 1.0 - trim_eps;
    report.warnings.push_back(msg.str());
  }
  return report;
}

}  // namespace gdid
