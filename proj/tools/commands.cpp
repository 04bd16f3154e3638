#include "commands.hpp"

#include "gdid/clustered.hpp"
#include "gdid/config.hpp"
#include "gdid/errors.hpp"
#include "gdid/estimators.hpp"
#include "gdid/inference.hpp"
#include "gdid/monte_carlo.hpp"
#include "gdid/panel.hpp"
#include "gdid/staggered.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gdid::cli {

using ojson = nlohmann::ordered_json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Io:
    case ErrorCode::Config:
    case ErrorCode::MissingCell:
    case ErrorCode::NonBinaryTreatment:
    case ErrorCode::DuplicateRow:
    case ErrorCode::InsufficientHistory:
    case ErrorCode::ValidationFailed:
    case ErrorCode::NotSpecified:
    case ErrorCode::EmptyCluster:
      return kInvalidInput;
    default:
      return kEstimationError;
  }
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

CsvSchema schema_of(const DataOptions& d) {
  CsvSchema s;
  if (d.layout == "long")
    s.layout = Layout::Long;
  else if (d.layout == "wide")
    s.layout = Layout::Wide;
  else
    throw Error(ErrorCode::InvalidArgument, "layout must be long or wide");
  s.unit = d.unit;
  s.time = d.time;
  s.outcome = d.outcome;
  s.treatment = d.treatment;
  s.covariates = d.covariates;
  s.covariate_prefix = d.covariate_prefix;
  s.outcome_prefix = d.outcome_prefix;
  return s;
}

void emit(const GlobalOptions& g, const std::string& stem, const std::string& text) {
  std::cout << text;
  if (g.output_dir.empty()) return;
  std::filesystem::create_directories(g.output_dir);
  const auto path = std::filesystem::path(g.output_dir) / (stem + "." + g.format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::string csv_value(const ojson& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ";") + csv_value(e);
    return "\"" + s + "\"";
  }
  return v.dump();
}

std::string as_csv(const std::vector<ojson>& rows) {
  std::ostringstream os;
  if (rows.empty()) return "";
  bool first = true;
  for (const auto& [k, v] : rows.front().items()) {
    (void)v;
    os << (first ? "" : ",") << k;
    first = false;
  }
  os << "\n";
  for (const auto& r : rows) {
    first = true;
    for (const auto& [k, v] : r.items()) {
      (void)k;
      os << (first ? "" : ",") << csv_value(v);
      first = false;
    }
    os << "\n";
  }
  return os.str();
}

WeightDist weight_dist_of(const std::string& w) {
  if (w == "exponential") return WeightDist::Exponential;
  if (w == "mammen") return WeightDist::Mammen;
  if (w == "normal") return WeightDist::Normal;
  throw Error(ErrorCode::InvalidArgument, "unknown bootstrap weights '" + w + "'");
}

NuisanceSettings nuisance_of(const EstimateOptions& o) {
  NuisanceSettings s;
  if (!o.config.empty()) s = load_nuisance_settings(o.config);
  else s.spec = parse_learner(o.learner);
  if (o.folds) s.folds = *o.folds;
  if (o.trim_eps) s.trim_eps = *o.trim_eps;
  return s;
}

std::string canonical(const GlobalOptions& g, const EstimateOptions& o, const NuisanceSettings& ns) {
  std::ostringstream os;
  os.precision(17);
  os << "estimand=" << o.estimand << ";lags=" << o.lags << ";learner=" << ns.spec.to_string() << ";folds=" << ns.folds
     << ";trim_eps=" << ns.trim_eps << ";infer=" << o.infer << ";B=" << o.B << ";weights=" << o.weights
     << ";level=" << o.level << ";seed=" << g.seed.value_or(0) << ";cluster=" << o.cluster_col
     << ";cap=" << o.cluster_cap << ";staggered=" << o.staggered << ";aggregate=" << o.aggregate;
  return os.str();
}

void infer(AttEstimate& est, const EstimateOptions& o, const GlobalOptions& g, const PanelDataset* d,
           const NuisanceFits* fits) {
  if (o.infer == "plugin") {
    const auto v = plugin_variance(est);
    attach(est, v, confidence_interval(est.tau_hat, v, o.level));
  } else if (o.infer == "bootstrap") {
    BootstrapConfig b;
    b.B = o.B;
    b.weight_dist = weight_dist_of(o.weights);
    b.seed = g.seed.value_or(0);
    b.threads = g.threads;
    const auto r = multiplier_bootstrap(est, b, o.level);
    attach(est, r.variance, r.ci);
  } else if (o.infer == "sandwich") {
    if (!d || !fits) throw Error(ErrorCode::NotParametricPath, "sandwich variance needs the no-split GLM path");
    const auto v = sandwich_variance(*d, *fits, est);
    attach(est, v, confidence_interval(est.tau_hat, v, o.level));
  } else {
    throw Error(ErrorCode::InvalidArgument, "infer must be plugin, bootstrap or sandwich");
  }
}

void write_influence(const std::string& path, const std::vector<std::string>& labels, const AttEstimate& est) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.precision(17);
  out << "unit,influence\n";
  for (Eigen::Index i = 0; i < est.influence.size(); ++i)
    out << labels[static_cast<std::size_t>(i)] << ',' << est.influence[i] << '\n';
}

std::pair<std::size_t, std::size_t> parse_cap(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--cluster-cap expects <treated>,<control>");
  try {
    return {std::stoul(s.substr(0, comma)), std::stoul(s.substr(comma + 1))};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, "--cluster-cap expects two integers");
  }
}

int estimate_iid(const GlobalOptions& g, const EstimateOptions& o) {
  const auto ns = nuisance_of(o);
  const auto seed = g.seed.value_or(0);
  const auto d = load_panel_csv(o.data.path, schema_of(o.data));
  AttEstimate est;
  std::optional<NuisanceFits> fits;
  if (o.estimand == "did") {
    est = estimate_did(d);
  } else {
    const int lag = o.estimand == "cdid" ? 0 : o.lags;
    const auto c0 = build_conditioning(d, 0, lag);
    const auto cm1 = build_conditioning(d, -1, lag);
    const auto plan = ns.folds >= 2 ? make_plan(d.treatment, ns.folds, seed) : CrossFitPlan::none();
    CrossFitOptions cf;
    cf.trim_eps = ns.trim_eps;
    cf.treated_arm = o.estimand == "ate";
    cf.threads = g.threads;
    fits = cross_fit_nuisances(d, c0, cm1, ns.spec, plan, cf);
    if (o.estimand == "gdid") est = estimate_gdid(d, *fits, ns.trim_eps);
    else if (o.estimand == "cdid") est = estimate_cdid(d, *fits, ns.trim_eps);
    else if (o.estimand == "ign") est = estimate_aipw_att(d, 1, *fits, ns.trim_eps);
    else if (o.estimand == "ign-pre") est = estimate_aipw_att(d, 0, *fits, ns.trim_eps);
    else if (o.estimand == "ate") est = estimate_ate_gdid(d, *fits, ns.trim_eps);
    else throw Error(ErrorCode::InvalidArgument, "unknown estimand '" + o.estimand + "'");
  }
  est.config_digest = digest(canonical(g, o, ns));
  infer(est, o, g, &d, fits ? &*fits : nullptr);
  if (!o.influence_csv.empty()) write_influence(o.influence_csv, d.unit_ids, est);
  const auto j = ojson::parse(to_json(est));
  emit(g, "estimate", g.format == "csv" ? as_csv({j}) : j.dump(2) + "\n");
  return kOk;
}

int estimate_clustered(const GlobalOptions& g, const EstimateOptions& o) {
  if (o.estimand != "gdid") throw Error(ErrorCode::InvalidArgument, "clustered data support --estimand gdid only");
  const auto ns = nuisance_of(o);
  const auto seed = g.seed.value_or(0);
  auto schema = schema_of(o.data);
  schema.cluster = o.cluster_col;
  auto d = load_panel_csv(o.data.path, schema);
  if (!o.cluster_cap.empty()) {
    const auto [tc, cc] = parse_cap(o.cluster_cap);
    d = cap_clusters(d, tc, cc, seed);
  }
  const auto clusters = index_clusters(d);
  ClusterSummary summary;
  if (o.cluster_summary == "mean") summary = ClusterSummary::Mean;
  else if (o.cluster_summary == "mean_and_size") summary = ClusterSummary::MeanAndSize;
  else throw Error(ErrorCode::InvalidArgument, "cluster summary must be mean or mean_and_size");
  const auto v0 = summarize_clusters(d, clusters, build_conditioning(d, 0, o.lags), summary);
  const auto vm1 = summarize_clusters(d, clusters, build_conditioning(d, -1, o.lags), summary);
  ClusterFitOptions cf;
  cf.folds = ns.folds;
  cf.seed = seed;
  cf.trim_eps = ns.trim_eps;
  cf.threads = g.threads;
  auto fits = cross_fit_clustered(d, clusters, v0, vm1, ns.spec, cf);
  fits.lag_depth = o.lags;
  auto est = estimate_clustered_gdid(d, clusters, fits, ns.trim_eps);
  est.config_digest = digest(canonical(g, o, ns));
  if (o.infer == "sandwich") throw Error(ErrorCode::InvalidArgument, "clustered data support plugin or bootstrap");
  infer(est, o, g, nullptr, nullptr);
  if (!o.influence_csv.empty()) write_influence(o.influence_csv, clusters.labels, est);
  auto j = ojson::parse(to_json(est));
  j["n_clusters"] = clusters.n_clusters();
  emit(g, "estimate", g.format == "csv" ? as_csv({j}) : j.dump(2) + "\n");
  return kOk;
}

AggregationWeights custom_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  AggregationWeights w;
  w.kind = WeightKind::Custom;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("history", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "custom weights need history,weight rows");
    TreatmentHistory h;
    for (char c : line.substr(0, comma)) {
      if (c != '0' && c != '1') throw Error(ErrorCode::InvalidArgument, "history labels use 0 and 1");
      h.path.push_back(c - '0');
    }
    try {
      w.entries.emplace_back(h, std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidArgument, "bad weight in " + path);
    }
  }
  return w;
}

int estimate_staggered(const GlobalOptions& g, const EstimateOptions& o) {
  if (o.estimand != "gdid") throw Error(ErrorCode::InvalidArgument, "staggered data support --estimand gdid only");
  const auto ns = nuisance_of(o);
  const auto panel = load_staggered_csv(o.data.path, schema_of(o.data));
  int t = o.target_time.value_or(panel.t_max());
  std::optional<int> s;
  WeightKind kind = WeightKind::Custom;
  std::string custom_path;
  const auto& a = o.aggregate;
  if (a == "treated-at-t") {
    kind = WeightKind::TreatedAtT;
  } else if (a.rfind("adopted-at-s=", 0) == 0) {
    kind = WeightKind::AdoptedAtS;
    s = std::stoi(a.substr(13));
  } else if (a.rfind("cohort-time=", 0) == 0) {
    kind = WeightKind::AdoptedAtSAndTreatedAtT;
    const auto rest = a.substr(12);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "cohort-time expects <s>,<t>");
    s = std::stoi(rest.substr(0, comma));
    t = std::stoi(rest.substr(comma + 1));
  } else if (a.rfind("custom=", 0) == 0) {
    custom_path = a.substr(7);
  } else if (!a.empty()) {
    throw Error(ErrorCode::InvalidArgument, "unknown aggregation '" + a + "'");
  }

  const auto hs = enumerate_histories(panel, t, o.min_group_size, o.lags);
  GroupTimeOptions go;
  go.spec = ns.spec;
  go.lag_depth = o.lags;
  go.folds = ns.folds;
  go.seed = g.seed.value_or(0);
  go.trim_eps = ns.trim_eps;
  go.threads = g.threads;
  std::vector<GroupTimeEffect> effects;
  std::vector<ojson> rows;
  for (const auto& h : hs.admissible) {
    auto e = fit_group_time(panel, h, t, go);
    infer(e.estimate, o, g, nullptr, nullptr);
    auto j = ojson::parse(to_json(e.estimate));
    ojson row;
    row["history"] = h.label();
    row["target_time"] = t;
    row["n_in_group"] = e.n_in_group;
    for (auto& [k, v] : j.items()) row[k] = v;
    rows.push_back(row);
    effects.push_back(std::move(e));
  }
  ojson out;
  out["target_time"] = t;
  out["group_time"] = rows;
  out["excluded"] = ojson::array();
  for (const auto& x : hs.excluded)
    out["excluded"].push_back({{"history", x.history.label()}, {"group_size", x.group_size}, {"reason", x.reason}});
  if (!a.empty()) {
    AggregationWeights w;
    if (kind == WeightKind::Custom) {
      w = custom_weights(custom_path);
    } else {
      w = preset_weights(kind, hs.admissible, t, s);
    }
    // Keep only effects with a weight entry; zero weights drop out.
    std::vector<GroupTimeEffect> chosen;
    AggregationWeights used;
    used.kind = w.kind;
    for (const auto& [h, wt] : w.entries) {
      if (wt == 0.0) continue;
      bool found = false;
      for (const auto& e : effects)
        if (e.history == h) {
          chosen.push_back(e);
          found = true;
        }
      if (!found) throw Error(ErrorCode::WeightMismatch, "history " + h.label() + " is not in the admissible set");
      used.entries.emplace_back(h, wt);
    }
    auto agg = aggregate_effects(chosen, used);
    agg.config_digest = digest(canonical(g, o, ns));
    infer(agg, o, g, nullptr, nullptr);
    out["aggregate"] = ojson::parse(to_json(agg));
    out["aggregate"]["weights"] = ojson::object();
    for (const auto& [h, wt] : used.entries) out["aggregate"]["weights"][h.label()] = wt;
  }
  if (g.format == "csv") {
    if (!a.empty()) {
      auto agg_row = out["aggregate"];
      agg_row.erase("weights");
      ojson r;
      r["history"] = "aggregate";
      r["target_time"] = t;
      r["n_in_group"] = agg_row["n_treated"];
      for (auto& [k, v] : agg_row.items()) r[k] = v;
      rows.push_back(r);
    }
    emit(g, "estimate", as_csv(rows));
  } else {
    emit(g, "estimate", out.dump(2) + "\n");
  }
  return kOk;
}

}  // namespace

int cmd_estimate(const GlobalOptions& global, const EstimateOptions& options) {
  return guarded([&] {
    if (options.staggered) return estimate_staggered(global, options);
    if (!options.cluster_col.empty()) return estimate_clustered(global, options);
    return estimate_iid(global, options);
  });
}

int cmd_simulate(const GlobalOptions& global, const SimulateOptions& options) {
  return guarded([&] {
    auto cfg = load_experiment(options.config);
    if (options.reps) cfg.reps = *options.reps;
    if (global.seed) cfg.seed = *global.seed;
    cfg.threads = global.threads;
    const auto report = run_monte_carlo(cfg);
    const auto csv = report_csv(report);
    const auto json = report_json(report);
    std::cout << (global.format == "csv" ? csv : json);
    const std::filesystem::path dir = global.output_dir.empty() ? "." : global.output_dir;
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : {std::pair{"report.csv", &csv}, std::pair{"report.json", &json}}) {
      std::ofstream out(dir / name, std::ios::binary);
      if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string());
      out << *text;
    }
    return kOk;
  });
}

int cmd_validate(const GlobalOptions& global, const ValidateOptions& options) {
  return guarded([&] {
    const auto d = load_panel_csv(options.data.path, schema_of(options.data));
    const auto report = validate(d, build_conditioning(d, 0, options.lags), options.trim_eps);
    ojson j;
    j["ok"] = report.ok();
    j["n"] = d.n_units();
    j["n_treated"] = d.n_treated();
    j["periods"] = d.times;
    j["fraction_above"] = report.fraction_above;
    j["separation"] = report.separation;
    j["overlap"] = ojson::array();
    for (const auto& a : report.overlap_diagnostics)
      j["overlap"].push_back({{"arm", a.arm},
                              {"count", a.count},
                              {"mean", a.mean},
                              {"min", a.min},
                              {"max", a.max},
                              {"fraction_above", a.fraction_above}});
    j["structural_errors"] = report.structural_errors;
    j["warnings"] = report.warnings;
    if (global.format == "csv") {
      ojson row;
      for (const auto& key : {"ok", "n", "n_treated", "fraction_above", "separation", "structural_errors", "warnings"})
        row[key] = j[key];
      emit(global, "validation", as_csv({row}));
    } else {
      emit(global, "validation", j.dump(2) + "\n");
    }
    return report.ok() ? kOk : kInvalidInput;
  });
}

}  // namespace gdid::cli
