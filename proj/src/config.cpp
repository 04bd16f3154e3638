#include "gdid/config.hpp"

#include "gdid/errors.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace gdid {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::Config, what); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) fail("bad number '" + s + "' for " + what);
    return v;
  } catch (const std::logic_error&) {
    fail("bad number '" + s + "' for " + what);
  }
}

int to_int(const std::string& s, const std::string& what) {
  const double v = to_double(s, what);
  if (v != static_cast<int>(v)) fail("expected an integer for " + what);
  return static_cast<int>(v);
}

void only_keys(const toml::table& t, const std::string& name, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : t) {
    (void)v;
    if (!ok.count(std::string(k.str()))) fail("unknown key '" + std::string(k.str()) + "' in [" + name + "]");
  }
}

const toml::table* table_or_null(const toml::table& root, const char* name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) fail(std::string("[") + name + "] must be a table");
  return node->as_table();
}

template <typename T>
T get(const toml::table& t, const char* key, T fallback) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) return *v;
  } else {
    if (node->is_integer()) return static_cast<T>(node->as_integer()->get());
  }
  fail(std::string("key '") + key + "' has the wrong type");
}

std::vector<std::string> get_strings(const toml::table& t, const char* key) {
  std::vector<std::string> out;
  const auto* node = t.get(key);
  if (!node) return out;
  const auto* arr = node->as_array();
  if (!arr) fail(std::string("key '") + key + "' must be an array of strings");
  for (const auto& e : *arr) {
    auto v = e.value<std::string>();
    if (!v) fail(std::string("key '") + key + "' must be an array of strings");
    out.push_back(*v);
  }
  return out;
}

std::vector<double> get_numbers(const toml::table& t, const char* key) {
  std::vector<double> out;
  const auto* node = t.get(key);
  if (!node) return out;
  const auto* arr = node->as_array();
  if (!arr) fail(std::string("key '") + key + "' must be an array of numbers");
  for (const auto& e : *arr) {
    auto v = e.value<double>();
    if (!v) fail(std::string("key '") + key + "' must be an array of numbers");
    out.push_back(*v);
  }
  return out;
}

NuisanceSettings nuisance_from(const toml::table* t) {
  NuisanceSettings s;
  if (!t) return s;
  only_keys(*t, "nuisance", {"learner", "k", "rounds", "shrinkage", "candidates", "ensemble_folds", "folds", "trim_eps"});
  s.spec = parse_learner(get<std::string>(*t, "learner", "glm"));
  if (s.spec.kind == LearnerKind::Knn) s.spec.k = get<int>(*t, "k", s.spec.k);
  if (s.spec.kind == LearnerKind::BoostedStumps) {
    s.spec.rounds = get<int>(*t, "rounds", s.spec.rounds);
    s.spec.shrinkage = get<double>(*t, "shrinkage", s.spec.shrinkage);
  }
  if (s.spec.kind == LearnerKind::Ensemble) {
    const auto names = get_strings(*t, "candidates");
    if (!names.empty()) {
      s.spec.candidates.clear();
      for (const auto& c : names) s.spec.candidates.push_back(parse_learner(c));
    }
    s.spec.ensemble_folds = get<int>(*t, "ensemble_folds", s.spec.ensemble_folds);
  }
  s.folds = get<int>(*t, "folds", s.folds);
  s.trim_eps = get<double>(*t, "trim_eps", s.trim_eps);
  try {
    s.spec.check();
  } catch (const Error& e) {
    fail(e.what());
  }
  return s;
}

EffectSpec effect_from(const toml::table& t, const std::string& prefix, double default_base, double default_step,
                       std::uint64_t seed) {
  const auto kind = get<std::string>(t, (prefix).c_str(), prefix == "gamma" ? "zero" : "constant");
  const double base = get<double>(t, (prefix + "_value").c_str(), default_base);
  const double step = get<double>(t, (prefix + "_step").c_str(), default_step);
  if (kind == "zero") return EffectSpec::zero();
  if (kind == "constant") return EffectSpec::constant(base);
  if (kind == "linear_growth") return EffectSpec::linear_growth(base, step);
  if (kind == "random_changes") {
    auto changes = get_numbers(t, (prefix + "_changes").c_str());
    if (changes.empty()) return EffectSpec::random_changes(base, seed);
    if (changes.size() != 2) fail(prefix + "_changes needs two entries");
    return {EffectPath::RandomChanges, base, 0.0, changes};
  }
  fail("unknown " + prefix + " path '" + kind + "'");
}

}  // namespace

LearnerSpec parse_learner(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) fail("empty learner name");
  const auto& name = parts[0];
  auto arity = [&](std::size_t max) {
    if (parts.size() > max + 1) fail("too many parameters for learner '" + text + "'");
  };
  LearnerSpec s;
  if (name == "glm" || name == "linear") {
    arity(0);
    s = LearnerSpec::linear();
  } else if (name == "logistic") {
    arity(0);
    s = LearnerSpec::logistic();
  } else if (name == "knn") {
    arity(1);
    s = LearnerSpec::knn(parts.size() > 1 ? to_int(parts[1], "knn k") : 15);
  } else if (name == "stumps" || name == "boosted_stumps") {
    arity(2);
    s = LearnerSpec::boosted_stumps(parts.size() > 1 ? to_int(parts[1], "stumps rounds") : 100,
                                    parts.size() > 2 ? to_double(parts[2], "stumps shrinkage") : 0.1);
  } else if (name == "ensemble") {
    arity(0);
    s = LearnerSpec::default_ensemble();
  } else {
    fail("unknown learner '" + name + "'");
  }
  try {
    s.check();
  } catch (const Error& e) {
    fail(e.what());
  }
  return s;
}

MonteCarloConfig parse_experiment(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
    fail(os.str());
  }
  for (const auto& [k, v] : root) {
    (void)v;
    const std::string key(k.str());
    if (key != "experiment" && key != "dgp" && key != "nuisance" && key != "bootstrap")
      fail("unknown table [" + key + "]");
  }
  MonteCarloConfig cfg;
  if (const auto* e = table_or_null(root, "experiment")) {
    only_keys(*e, "experiment", {"reps", "seed", "truth", "level", "estimators", "inference"});
    cfg.reps = get<int>(*e, "reps", cfg.reps);
    cfg.seed = get<std::uint64_t>(*e, "seed", cfg.seed);
    cfg.truth = get<double>(*e, "truth", cfg.truth);
    cfg.level = get<double>(*e, "level", cfg.level);
    const auto names = get_strings(*e, "estimators");
    if (!names.empty()) {
      cfg.estimators.clear();
      try {
        for (const auto& n : names) cfg.estimators.push_back(preset_by_name(n));
      } catch (const Error& err) {
        fail(err.what());
      }
    }
    const auto inf = get_strings(*e, "inference");
    if (!inf.empty()) {
      cfg.inference.clear();
      for (const auto& m : inf) {
        if (m == "plugin") cfg.inference.push_back(VarianceMethod::Plugin);
        else if (m == "bootstrap") cfg.inference.push_back(VarianceMethod::MultiplierBootstrap);
        else if (m == "sandwich") cfg.inference.push_back(VarianceMethod::Sandwich);
        else fail("unknown inference method '" + m + "'");
      }
    }
  }
  const auto* d = table_or_null(root, "dgp");
  if (!d) fail("missing [dgp] table");
  const auto design = get<std::string>(*d, "design", "");
  if (design == "dgp1") {
    only_keys(*d, "dgp", {"design", "n", "zeta", "observed"});
    Dgp1Config c;
    c.n = get<std::size_t>(*d, "n", c.n);
    c.zeta = get<double>(*d, "zeta", c.zeta);
    const auto obs = get<std::string>(*d, "observed", "linear");
    if (obs == "linear") c.observed = Observed::Linear;
    else if (obs == "nonlinear") c.observed = Observed::Nonlinear;
    else fail("observed must be linear or nonlinear");
    cfg.dgp = c;
  } else if (design == "dgp2") {
    only_keys(*d, "dgp", {"design", "n", "form", "gamma", "gamma_value", "gamma_step", "gamma_changes", "beta",
                          "beta_value", "beta_step", "beta_changes"});
    Dgp2Config c;
    c.n = get<std::size_t>(*d, "n", c.n);
    const auto form = get<std::string>(*d, "form", "linear");
    if (form == "linear") c.form = Form::Linear;
    else if (form == "additive") c.form = Form::Additive;
    else if (form == "nonlinear") c.form = Form::Nonlinear;
    else fail("form must be linear, additive or nonlinear");
    c.gamma = effect_from(*d, "gamma", kDefaultGamma, kDefaultGammaStep, cfg.seed ^ 0x6A);
    c.beta = effect_from(*d, "beta", kDefaultBeta, kDefaultBetaStep, cfg.seed ^ 0xBE);
    cfg.dgp = c;
  } else {
    fail("dgp.design must be dgp1 or dgp2");
  }
  const auto ns = nuisance_from(table_or_null(root, "nuisance"));
  cfg.spec = ns.spec;
  cfg.folds = ns.folds;
  cfg.trim_eps = ns.trim_eps;
  if (const auto* b = table_or_null(root, "bootstrap")) {
    only_keys(*b, "bootstrap", {"B", "weights"});
    cfg.bootstrap.B = get<int>(*b, "B", cfg.bootstrap.B);
    const auto w = get<std::string>(*b, "weights", "exponential");
    if (w == "exponential") cfg.bootstrap.weight_dist = WeightDist::Exponential;
    else if (w == "mammen") cfg.bootstrap.weight_dist = WeightDist::Mammen;
    else if (w == "normal") cfg.bootstrap.weight_dist = WeightDist::Normal;
    else fail("unknown bootstrap weights '" + w + "'");
  }
  try {
    cfg.check();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotSpecified) throw;
    fail(e.what());
  }
  return cfg;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

MonteCarloConfig load_experiment(const std::string& path) { return parse_experiment(slurp(path)); }

NuisanceSettings load_nuisance_settings(const std::string& path) {
  toml::table root;
  try {
    root = toml::parse(slurp(path));
  } catch (const toml::parse_error& e) {
    fail(std::string("TOML parse error: ") + std::string(e.description()));
  }
  return nuisance_from(table_or_null(root, "nuisance"));
}

}  // namespace gdid
