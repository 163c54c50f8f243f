#ifndef CONEFLOW_EXPERIMENTS_HPP
#define CONEFLOW_EXPERIMENTS_HPP

// Experiment runner behind the coneflow tool. Configs and reports are JSON; expected
// values come from a versioned expectations table with a provenance tag per entry.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coneflow/cocycle.hpp"
#include "coneflow/cone.hpp"
#include "coneflow/error.hpp"
#include "coneflow/fock.hpp"
#include "coneflow/gauge.hpp"
#include "coneflow/intertwiner.hpp"
#include "coneflow/isorep.hpp"
#include "coneflow/multiplier.hpp"
#include "coneflow/random.hpp"

namespace coneflow {

using Json = nlohmann::json;

/// Invalid configuration or usage; the tool maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct ExperimentInfo {
  const char* name;
  const char* statement;
};

inline const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog{
      {"ccr", "Weyl relations W(u)W(v) = e^{-i Im<u|v>} W(u+v), Weyl unitarity, Gamma(V) W(v) Gamma(V)^* = W(Vv)"},
      {"cocycles", "dimension of the additive cocycles h_{x+y} = h_x + V_x h_y, h_x in ker V_x^*"},
      {"units", "units T^{mu,h} of the CCR flow and twisted omega-units of Gamma(V) (x) U^M"},
      {"intertwiners", "dimension of the commutant of {V_x, V_x^*} or of an intertwiner space L(V, W)"},
      {"gauge", "gauge cocycles (lambda, h, u0): cocycle identity and the group law with its phase correction"},
      {"multiplier", "bilinear multipliers e^{i<Mx|y>}: cocycle identity, class representatives, twisted shifts"},
      {"nonconjugacy", "V_t^* V_s = V_s V_t^* holds on the orthant and fails on a staircase module"},
      {"purity", "least t with V_{ta}^* f = 0, checked against direct membership counting"},
      {"distinguish", "gauge profiles of Section(a1) (+) Section(a1) versus Section(a2) (+) Section(a1)"},
  };
  return catalog;
}

// ---------------------------------------------------------------------------
// Expectations table

struct Expectation {
  std::string id;
  std::string experiment;
  std::string module;
  std::string source;
  int k = 1;
  std::string quantity;
  Json value;
  std::string provenance;
};

class ExpectationTable {
 public:
  ExpectationTable() = default;

  static ExpectationTable parse(const Json& doc) {
    ExpectationTable t;
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
      throw ConfigError("expectations table needs an 'entries' array");
    t.version_ = doc.value("version", 0);
    for (const auto& e : doc["entries"]) {
      Expectation x;
      x.id = e.at("id").get<std::string>();
      x.experiment = e.at("experiment").get<std::string>();
      x.module = e.at("module").get<std::string>();
      x.source = e.value("source", std::string{});
      x.k = e.value("k", 1);
      x.quantity = e.at("quantity").get<std::string>();
      x.value = e.at("value");
      x.provenance = e.at("provenance").get<std::string>();
      t.entries_.push_back(std::move(x));
    }
    return t;
  }

  static ExpectationTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open expectations table " + path);
    try {
      return parse(Json::parse(in));
    } catch (const Json::exception& e) {
      throw ConfigError("bad expectations table " + path + ": " + e.what());
    }
  }

  const Expectation* find(const std::string& experiment, const std::string& module, const std::string& source, int k,
                          const std::string& quantity) const {
    for (const auto& e : entries_)
      if (e.experiment == experiment && e.module == module && e.source == source && e.k == k && e.quantity == quantity)
        return &e;
    return nullptr;
  }

  int version() const { return version_; }
  std::size_t size() const { return entries_.size(); }

 private:
  int version_ = 0;
  std::vector<Expectation> entries_;
};

// ---------------------------------------------------------------------------
// Per-experiment bookkeeping

struct Verdict {
  std::string check;
  double value = 0.0;
  std::string relation;  // "<=", ">", "=="
  double threshold = 0.0;
  bool pass = false;
  std::string provenance;
};

struct CsvRow {
  std::string experiment;
  std::string module;
  std::optional<int> k;
  std::optional<int> window;
  std::optional<int> dimension;
  std::optional<double> residual;
  bool pass = false;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  double tol_scale = 1.0;
};

class Experiment {
 public:
  Experiment(Json config, const ExpectationTable& table, std::uint64_t seed, double tol_scale)
      : config_(std::move(config)), table_(table), seed_(seed), tol_scale_(tol_scale), rng_(seed) {
    name_ = config_.at("experiment").get<std::string>();
  }

  const std::string& name() const { return name_; }
  Rng& rng() { return rng_; }
  const ExpectationTable& table() const { return table_; }
  Json& results() { return results_; }

  // Typed config access; the effective value is echoed into the report inputs.
  int integer(const std::string& key, int fallback, int min_value = 1) {
    int v = fallback;
    if (config_.contains(key)) {
      if (!config_[key].is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
      v = config_[key].get<int>();
    }
    if (v < min_value) throw ConfigError("'" + key + "' must be >= " + std::to_string(min_value));
    inputs_[key] = v;
    return v;
  }

  double real(const std::string& key, double fallback) {
    double v = fallback;
    if (config_.contains(key)) {
      if (!config_[key].is_number()) throw ConfigError("'" + key + "' must be a number");
      v = config_[key].get<double>();
    }
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("'" + key + "' must be positive");
    inputs_[key] = v;
    return v;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    std::string v = fallback;
    if (config_.contains(key)) {
      if (!config_[key].is_string()) throw ConfigError("'" + key + "' must be a string");
      v = config_[key].get<std::string>();
    }
    inputs_[key] = v;
    return v;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> fallback, std::optional<int> min_value = 1) {
    std::vector<int> v = std::move(fallback);
    if (config_.contains(key)) {
      const Json& j = config_[key];
      if (j.is_number_integer()) {
        v = {j.get<int>()};
      } else if (j.is_array() && !j.empty() && std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_number_integer(); })) {
        v = j.get<std::vector<int>>();
      } else {
        throw ConfigError("'" + key + "' must be an integer or a non-empty integer list");
      }
    }
    if (min_value)
      for (int x : v)
        if (x < *min_value) throw ConfigError("'" + key + "' entries must be >= " + std::to_string(*min_value));
    inputs_[key] = v;
    return v;
  }

  std::vector<std::string> texts(const std::string& key, std::vector<std::string> fallback) {
    std::vector<std::string> v = std::move(fallback);
    if (config_.contains(key)) {
      const Json& j = config_[key];
      if (!j.is_array() || j.empty() || !std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_string(); }))
        throw ConfigError("'" + key + "' must be a non-empty list of strings");
      v = j.get<std::vector<std::string>>();
    }
    inputs_[key] = v;
    return v;
  }

  /// Module list: "module" is one text form, "modules" a list forming a direct sum.
  std::vector<ModuleDescriptor> modules(const std::string& fallback) {
    std::vector<std::string> texts;
    if (config_.contains("modules")) {
      const Json& j = config_["modules"];
      if (!j.is_array() || j.empty()) throw ConfigError("'modules' must be a non-empty list of module strings");
      for (const auto& e : j) {
        if (!e.is_string()) throw ConfigError("'modules' must be a non-empty list of module strings");
        texts.push_back(e.get<std::string>());
      }
      inputs_["modules"] = texts;
    } else {
      texts.push_back(text("module", fallback));
    }
    std::vector<ModuleDescriptor> out;
    for (const auto& t : texts) out.push_back(parse_module(t));
    return out;
  }

  GridRep make_rep(const std::vector<ModuleDescriptor>& mods, int k, double delta) const {
    std::vector<Summand> summands;
    for (const auto& m : mods) summands.push_back({m, k});
    return GridRep(ConeSpec(mods.front().dim(), delta), std::move(summands));
  }

  /// Upper-bound tolerance, scaled by --tol-scale; config "tolerances" overrides the default.
  double tolerance(const std::string& name, double fallback) {
    double v = fallback;
    if (config_.contains("tolerances") && config_["tolerances"].contains(name)) {
      const Json& j = config_["tolerances"][name];
      if (!j.is_number() || !(j.get<double>() > 0.0)) throw ConfigError("tolerance '" + name + "' must be positive");
      v = j.get<double>();
    }
    v *= tol_scale_;
    tolerances_[name] = v;
    return v;
  }

  /// Lower bound for negative controls; not scaled.
  double control_margin(const std::string& name, double fallback) {
    double v = fallback;
    if (config_.contains("tolerances") && config_["tolerances"].contains(name)) {
      const Json& j = config_["tolerances"][name];
      if (!j.is_number() || !(j.get<double>() > 0.0)) throw ConfigError("tolerance '" + name + "' must be positive");
      v = j.get<double>();
    }
    tolerances_[name] = v;
    return v;
  }

  /// Expected value: config "expected" wins over the table.
  std::optional<std::pair<Json, std::string>> expected(const std::string& module, const std::string& source, int k,
                                                       const std::string& quantity) {
    if (config_.contains("expected")) {
      const Json& e = config_["expected"];
      if (e.is_object() && e.contains(quantity)) return std::make_pair(e[quantity], std::string("config"));
      if (!e.is_object()) return std::make_pair(e, std::string("config"));
    }
    if (const Expectation* x = table_.find(name_, module, source, k, quantity)) return std::make_pair(x->value, x->provenance);
    return std::nullopt;
  }

  bool at_most(const std::string& check, double value, double threshold, std::string provenance = "oracle") {
    return record({check, value, "<=", threshold, value <= threshold, std::move(provenance)});
  }
  bool above(const std::string& check, double value, double threshold, std::string provenance = "oracle") {
    return record({check, value, ">", threshold, value > threshold, std::move(provenance)});
  }
  bool equals(const std::string& check, double value, double target, std::string provenance) {
    return record({check, value, "==", target, value == target, std::move(provenance)});
  }

  void row(CsvRow r) {
    r.experiment = name_;
    rows_.push_back(std::move(r));
  }

  /// One CSV row per verdict, for experiments without a dimension table.
  void rows_from_verdicts(const std::string& module, std::optional<int> k) {
    for (const auto& v : verdicts_) row({name_, module + " [" + v.check + "]", k, std::nullopt, std::nullopt, v.value, v.pass});
  }

  bool pass() const {
    return std::all_of(verdicts_.begin(), verdicts_.end(), [](const Verdict& v) { return v.pass; });
  }

  const std::vector<Verdict>& verdicts() const { return verdicts_; }
  const std::vector<CsvRow>& rows() const { return rows_; }

  Json report() const {
    Json v = Json::array();
    for (const auto& x : verdicts_)
      v.push_back({{"check", x.check},
                   {"value", x.value},
                   {"relation", x.relation},
                   {"threshold", x.threshold},
                   {"pass", x.pass},
                   {"provenance", x.provenance}});
    return {{"experiment", name_}, {"seed", seed_},       {"inputs", inputs_}, {"tolerances", tolerances_},
            {"results", results_}, {"verdicts", v},       {"pass", pass()}};
  }

 private:
  bool record(Verdict v) {
    verdicts_.push_back(std::move(v));
    return verdicts_.back().pass;
  }

  Json config_;
  const ExpectationTable& table_;
  std::string name_;
  std::uint64_t seed_;
  double tol_scale_;
  Rng rng_;
  Json inputs_ = Json::object();
  Json tolerances_ = Json::object();
  Json results_ = Json::object();
  std::vector<Verdict> verdicts_;
  std::vector<CsvRow> rows_;
};

namespace detail {

inline Json to_json(const Cell& c) { return Json(std::vector<int>(c.begin(), c.end())); }

inline Json to_json(const Site& s) { return {{"summand", s.summand}, {"cell", to_json(s.cell)}, {"fiber", s.fiber}}; }

inline Json to_json(const GaugeProfile& p) {
  return {{"d", p.d}, {"cocycle_dim", p.cocycle_dim}, {"commutant_dim", p.commutant_dim}};
}

inline std::string rep_text(const std::vector<ModuleDescriptor>& mods) {
  std::string s;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (i) s += " (+) ";
    s += mods[i].to_text();
  }
  return s;
}

inline Cell random_step(Rng& rng, int d, int max_coord) {
  Cell c(d);
  for (int& v : c) v = rng.integer(0, max_coord);
  return c;
}

inline std::vector<std::pair<Cell, Cell>> random_pairs(Rng& rng, int d, int count, int max_coord) {
  std::vector<std::pair<Cell, Cell>> out;
  for (int i = 0; i < count; ++i) {
    Cell x = random_step(rng, d, max_coord);
    Cell y = random_step(rng, d, max_coord);
    out.emplace_back(std::move(x), std::move(y));
  }
  return out;
}

inline std::vector<Box> default_boxes(const GridRep& rep, int extent) {
  std::vector<Box> boxes;
  for (const auto& s : rep.summands()) boxes.push_back(default_box(s.module, extent));
  return boxes;
}

inline Box union_box(const GridRep& rep, int extent) {
  Box b = default_box(rep.summand(0).module, extent);
  for (const auto& s : rep.summands()) {
    const Box o = default_box(s.module, extent);
    for (int i = 0; i < rep.d(); ++i) {
      b.lo[i] = std::min(b.lo[i], o.lo[i]);
      b.hi[i] = std::max(b.hi[i], o.hi[i]);
    }
  }
  return b;
}

inline RealMatrix random_real_matrix(Rng& rng, int d) {
  RealMatrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(-2.0, 2.0);
  return m;
}

inline RealPoint random_point(Rng& rng, int d, double radius) {
  RealPoint p(d);
  for (double& v : p) v = rng.uniform(-radius, radius);
  return p;
}

inline AdditiveCocycle random_combination(Rng& rng, const GridRep& rep, const std::vector<AdditiveCocycle>& basis) {
  AdditiveCocycle h(rep);
  for (const auto& b : basis) {
    AdditiveCocycle t = b;
    t *= rng.complex();
    h += t;
  }
  return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiments

inline void run_ccr(Experiment& ex) {
  const auto mods = ex.modules("staircase:-1,1");
  const int k = ex.integer("k", 1);
  const double delta = ex.real("delta", 1.0);
  const int window = ex.integer("window", 5);
  const int pairs = ex.integer("pairs", 50);
  const int vectors = ex.integer("vectors", 10);
  const double max_norm = ex.real("max_norm", 2.0);
  const double tol_ccr = ex.tolerance("ccr", 1e-9);
  const double tol_unitary = ex.tolerance("weyl_unitarity", 1e-9);
  const double tol_gamma = ex.tolerance("gamma_conjugation", 1e-9);

  const GridRep rep = ex.make_rep(mods, k, delta);
  const Box box = detail::union_box(rep, window);
  Rng& rng = ex.rng();
  std::vector<GridFockVector> tests;
  for (int i = 0; i < vectors; ++i) tests.push_back(random_fock_vector(rng, rep, box));

  double ccr = 0.0;
  double unitary = 0.0;
  double gamma = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const SparseState u = random_argument(rng, rep, box, 4, max_norm);
    const SparseState v = random_argument(rng, rep, box, 4, max_norm);
    ccr = std::max(ccr, ccr_residual(u, v, tests));
    // <W(u) psi, phi> = <psi, W(-u) phi> and ||W(u) psi|| = ||psi||
    const GridFockVector& psi = tests[p % tests.size()];
    const GridFockVector& phi = tests[(p + 1) % tests.size()];
    const double scale = std::max(1.0, fock_norm(psi) * fock_norm(phi));
    unitary = std::max(unitary, std::abs(fock_inner(weyl_apply(u, psi), phi) - fock_inner(psi, weyl_apply(-u, phi))) / scale);
    unitary = std::max(unitary, std::abs(fock_norm(weyl_apply(u, psi)) - fock_norm(psi)) / std::max(1.0, fock_norm(psi)));
    const Cell x = detail::random_step(rng, rep.d(), 3);
    const auto shift = [&](const SparseState& w) { return shift_apply(rep, x, w); };
    const GridFockVector lhs = gamma_apply(shift, weyl_apply(v, psi));
    const GridFockVector rhs = weyl_apply(shift(v), gamma_apply(shift, psi));
    gamma = std::max(gamma, fock_distance(lhs, rhs) / std::max(1.0, fock_norm(psi)));
  }
  ex.results() = {{"representation", rep.label()}, {"ccr_residual", ccr}, {"weyl_unitarity_residual", unitary},
                  {"gamma_conjugation_residual", gamma}};
  ex.at_most("ccr_residual", ccr, tol_ccr, "theory-consistent");
  ex.at_most("weyl_unitarity_residual", unitary, tol_unitary, "theory-consistent");
  ex.at_most("gamma_conjugation_residual", gamma, tol_gamma, "theory-consistent");
  ex.rows_from_verdicts(detail::rep_text(mods), k);
}

inline void run_cocycles(Experiment& ex) {
  const auto mods = ex.modules("orthant:2");
  const int k = ex.integer("k", 1);
  const double delta = ex.real("delta", 1.0);
  const std::vector<int> windows = ex.integers("windows", {8, 10});
  const int margin = ex.integer("margin", 1);
  const double tol = ex.tolerance("basis_residual", 1e-10);
  const GridRep rep = ex.make_rep(mods, k, delta);
  const std::string subject = detail::rep_text(mods);
  const auto expected = ex.expected(subject, "", k, "dimension");

  Json per_window = Json::array();
  std::set<int> dims;
  for (int w : windows) {
    const CocycleSolution sol = solve_cocycles(rep, SolveRegion::natural(rep, w, margin));
    const double residual = std::max(sol.kernel_residual, sol.flatness_residual);
    dims.insert(sol.dimension);
    per_window.push_back({{"window", w},
                          {"dimension", sol.dimension},
                          {"unknowns", sol.unknowns},
                          {"equations", sol.equations},
                          {"kernel_residual", sol.kernel_residual},
                          {"flatness_residual", sol.flatness_residual}});
    const bool dim_ok = !expected || sol.dimension == expected->first.get<int>();
    ex.at_most("basis_residual@" + std::to_string(w), residual, tol);
    ex.row({"", subject, k, w, sol.dimension, residual, dim_ok && residual <= tol});
  }
  ex.results() = {{"representation", rep.label()}, {"windows", per_window}, {"dimension", *dims.begin()}};
  ex.equals("window_stability", static_cast<double>(dims.size()), 1.0, "oracle");
  if (expected) {
    ex.results()["expected"] = expected->first;
    for (const auto& w : per_window)
      ex.equals("dimension@" + std::to_string(w["window"].get<int>()), w["dimension"].get<int>(),
                expected->first.get<int>(), expected->second);
  }
}

inline void run_intertwiners(Experiment& ex) {
  const auto mods = ex.modules("section:-1");
  const int k = ex.integer("k", 1);
  const double delta = ex.real("delta", 1.0);
  const std::vector<int> windows = ex.integers("windows", {8, 10});
  const std::string source_text = ex.text("source", "");
  const double tol = ex.tolerance("basis_residual", 1e-10);
  const GridRep target = ex.make_rep(mods, k, delta);
  const std::string subject = detail::rep_text(mods);
  std::optional<GridRep> source;
  if (!source_text.empty()) source = ex.make_rep({parse_module(source_text)}, k, delta);
  const auto expected = ex.expected(subject, source_text, k, "dimension");

  Json per_window = Json::array();
  std::set<int> dims;
  bool identity_ok = true;
  for (int w : windows) {
    const CompressedRep ct = compress(target, detail::default_boxes(target, w));
    IntertwinerSpace space;
    if (source) {
      space = solve_intertwiners(ct, compress(*source, detail::default_boxes(*source, w)));
    } else {
      space = commutant_dim(ct);
      identity_ok = identity_ok && space.identity_in_span;
    }
    dims.insert(space.dimension);
    Json entry{{"window", w}, {"dimension", space.dimension}, {"residual", space.residual}, {"rows", space.rows}, {"cols", space.cols}};
    if (!source) {
      entry["identity_in_span"] = space.identity_in_span;
      entry["identity_residual"] = space.identity_residual;
    }
    per_window.push_back(entry);
    const bool dim_ok = !expected || space.dimension == expected->first.get<int>();
    ex.at_most("basis_residual@" + std::to_string(w), space.residual, tol);
    ex.row({"", source ? subject + " <- " + source_text : subject, k, w, space.dimension, space.residual,
            dim_ok && space.residual <= tol});
  }
  ex.results() = {{"target", target.label()}, {"windows", per_window}, {"dimension", *dims.begin()}};
  if (source) ex.results()["source"] = source->label();
  ex.equals("window_stability", static_cast<double>(dims.size()), 1.0, "oracle");
  if (!source) ex.equals("identity_in_commutant", identity_ok ? 1.0 : 0.0, 1.0, "theory-consistent");
  if (expected) {
    ex.results()["expected"] = expected->first;
    for (const auto& w : per_window)
      ex.equals("dimension@" + std::to_string(w["window"].get<int>()), w["dimension"].get<int>(),
                expected->first.get<int>(), expected->second);
  }
}

inline void run_units(Experiment& ex) {
  const auto mods = ex.modules("orthant:1");
  const int k = ex.integer("k", 2);
  const double delta = ex.real("delta", 1.0);
  const int core = ex.integer("core", 8);
  const int pairs = ex.integer("pairs", 10);
  const int vectors = ex.integer("vectors", 10);
  const double tol_unit = ex.tolerance("unit", 1e-9);
  const double tol_omega = ex.tolerance("omega_unit", 1e-12);
  const double tol_state = ex.tolerance("invariant_state", 1e-12);
  const double margin = ex.control_margin("omega_control_min", 1e-3);
  Rng& rng = ex.rng();

  const GridRep rep = ex.make_rep(mods, k, delta);
  const Box box = detail::union_box(rep, std::max(core - 2, 3));
  const CocycleSolution sol = solve_cocycles(rep, SolveRegion::natural(rep, core));
  std::vector<Complex> mu(rep.d());
  for (auto& m : mu) m = {rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 1.0)};
  const Unit unit{mu, detail::random_combination(rng, rep, sol.basis)};
  std::vector<UnitTestVector> tests;
  for (int i = 0; i < vectors; ++i) tests.push_back({random_argument(rng, rep, box, 3, 1.0), random_fock_vector(rng, rep, box)});
  const auto xy = detail::random_pairs(rng, rep.d(), pairs, 3);
  UnitResiduals canonical;
  UnitResiduals general;
  for (const auto& [x, y] : xy) {
    const UnitResiduals c = unit_residuals(Unit::canonical(rep), x, y, tests);
    const UnitResiduals g = unit_residuals(unit, x, y, tests);
    canonical.semigroup = std::max(canonical.semigroup, c.semigroup);
    canonical.intertwine = std::max(canonical.intertwine, c.intertwine);
    general.semigroup = std::max(general.semigroup, g.semigroup);
    general.intertwine = std::max(general.intertwine, g.intertwine);
  }

  // Twisted units Gamma(V_x) (x) U^M_x on the orthant of dimension omega_d.
  const int omega_d = ex.integer("omega_d", 2, 2);
  RealMatrix m = RealMatrix::Zero(omega_d, omega_d);
  m(0, 1) = 1.0;
  const GridRep orth(ConeSpec(omega_d, delta), ModuleDescriptor::orthant(omega_d), 1);
  const Box obox = default_box(orth.summand(0).module, 4);
  const SpacePtr lattice = lattice_space(orth.cone());
  std::vector<OmegaUnitTestVector> otests;
  for (int i = 0; i < vectors; ++i) {
    LatticeState f(lattice);
    for (int n = 0; n < 3; ++n) {
      Cell c(omega_d);
      for (int& v : c) v = rng.integer(-3, 3);
      f.add(c, rng.complex());
    }
    otests.push_back({random_fock_vector(rng, orth, obox), f});
  }
  double omega = 0.0;
  double control = 0.0;
  for (const auto& [x, y] : detail::random_pairs(rng, omega_d, pairs, 3)) {
    omega = std::max(omega, omega_unit_residual(orth, m, x, y, otests));
    control = std::max(control, omega_unit_residual(orth, m, x, y, otests, false));
  }

  std::vector<WeylWord> words{{}};
  for (int i = 0; i < vectors; ++i) {
    WeylWord w;
    for (int n = 0; n < 3; ++n) w.push_back(random_argument(rng, rep, box, 3, 1.0));
    words.push_back(std::move(w));
  }
  std::vector<Cell> xs;
  for (const auto& [x, y] : xy) xs.push_back(x);
  const double state = invariant_state_residual(rep, words, xs);

  Json mu_json = Json::array();
  for (const auto& z : mu) mu_json.push_back({z.real(), z.imag()});
  ex.results() = {{"representation", rep.label()},
                  {"cocycle_dim", sol.dimension},
                  {"mu", mu_json},
                  {"canonical", {{"semigroup", canonical.semigroup}, {"intertwine", canonical.intertwine}}},
                  {"general", {{"semigroup", general.semigroup}, {"intertwine", general.intertwine}}},
                  {"omega_matrix", "E_12"},
                  {"omega_unit_residual", omega},
                  {"omega_control_residual", control},
                  {"invariant_state_residual", state}};
  ex.at_most("canonical_semigroup", canonical.semigroup, tol_unit, "theory-consistent");
  ex.at_most("canonical_intertwine", canonical.intertwine, tol_unit, "theory-consistent");
  ex.at_most("unit_semigroup", general.semigroup, tol_unit, "theory-consistent");
  ex.at_most("unit_intertwine", general.intertwine, tol_unit, "theory-consistent");
  ex.at_most("omega_unit", omega, tol_omega, "theory-consistent");
  ex.above("omega_control", control, margin, "oracle");
  ex.at_most("invariant_state", state, tol_state, "theory-consistent");
  ex.rows_from_verdicts(detail::rep_text(mods), k);
}

inline void run_gauge(Experiment& ex) {
  const auto mods = ex.modules("orthant:1");
  const int k = ex.integer("k", 2);
  const double delta = ex.real("delta", 1.0);
  const int core = ex.integer("core", 8);
  const int pairs = ex.integer("pairs", 10);
  const int vectors = ex.integer("vectors", 6);
  const int elements = ex.integer("elements", 3);
  const double tol_relation = ex.tolerance("cocycle_relation", 1e-9);
  const double tol_group = ex.tolerance("group_law", 1e-9);
  const double tol_params = ex.tolerance("parameters", 1e-10);
  const double margin = ex.control_margin("phase_control_min", 1e-3);
  Rng& rng = ex.rng();

  const GridRep rep = ex.make_rep(mods, k, delta);
  const Box box = detail::union_box(rep, std::max(core - 2, 3));
  const CocycleSolution sol = solve_cocycles(rep, SolveRegion::natural(rep, core));
  std::vector<GridFockVector> tests;
  for (int i = 0; i < vectors; ++i) tests.push_back(random_fock_vector(rng, rep, box));
  std::vector<GaugeElement> gs;
  for (int i = 0; i < elements; ++i) {
    std::vector<double> lambda(rep.d());
    for (double& l : lambda) l = rng.uniform(-1.0, 1.0);
    gs.emplace_back(lambda, detail::random_combination(rng, rep, sol.basis), random_unitary(rng, k));
  }
  const auto xy = detail::random_pairs(rng, rep.d(), pairs, 3);

  double relation = 0.0;
  for (const auto& g : gs)
    for (const auto& [x, y] : xy) relation = std::max(relation, cocycle_relation_residual(g, x, y, tests));

  const auto composed = [&](const GaugeElement& a, const GaugeElement& b, const GaugeElement& c) {
    double worst = 0.0;
    for (const auto& [x, y] : xy)
      for (const auto& psi : tests)
        worst = std::max(worst, fock_distance(gauge_apply(a, x, gauge_apply(b, x, psi)), gauge_apply(c, x, psi)));
    return worst;
  };
  double group = 0.0;
  double params = 0.0;
  const GaugeElement e = GaugeElement::identity(rep);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const GaugeElement& a = gs[i];
    const GaugeElement& b = gs[(i + 1) % gs.size()];
    const GaugeElement& c = gs[(i + 2) % gs.size()];
    group = std::max(group, composed(a, b, gauge_product(a, b)));
    params = std::max(params, parameter_distance(gauge_product(a, gauge_inverse(a)), e));
    params = std::max(params, parameter_distance(gauge_product(gauge_product(a, b), c), gauge_product(a, gauge_product(b, c))));
  }

  ex.results() = {{"representation", rep.label()}, {"cocycle_dim", sol.dimension}, {"elements", elements},
                  {"cocycle_relation_residual", relation}, {"group_law_residual", group}, {"parameter_residual", params}};
  ex.at_most("cocycle_relation", relation, tol_relation, "theory-consistent");
  ex.at_most("group_law", group, tol_group, "theory-consistent");
  ex.at_most("inverse_and_associativity", params, tol_params, "oracle");
  if (sol.dimension > 0) {
    // (0, h, 1)(0, ih, 1) needs the -Im c(h, ih) phase; dropping it must show.
    AdditiveCocycle ih = sol.basis[0];
    ih *= Complex(0.0, 1.0);
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(k, k);
    const GaugeElement a(std::vector<double>(rep.d(), 0.0), sol.basis[0], id);
    const GaugeElement b(std::vector<double>(rep.d(), 0.0), ih, id);
    const double control = composed(a, b, gauge_product(a, b, PhaseCorrection::Omit));
    ex.results()["phase_control_residual"] = control;
    ex.above("phase_control", control, margin, "oracle");
  } else {
    ex.results()["phase_control_residual"] = nullptr;
  }
  ex.rows_from_verdicts(detail::rep_text(mods), k);
}

inline void run_multiplier(Experiment& ex) {
  const int d = ex.integer("d", 3, 2);
  const int triples = ex.integer("triples", 100);
  const int matrices = ex.integer("matrices", 20);
  const double delta = ex.real("delta", 1.0);
  const double tol_cocycle = ex.tolerance("cocycle", 1e-12);
  const double tol_round = ex.tolerance("round_trip", 1e-12);
  const double tol_shift = ex.tolerance("twisted_shift", 1e-12);
  Rng& rng = ex.rng();

  double cocycle = 0.0;
  for (int i = 0; i < triples; ++i) {
    const RealMatrix m = detail::random_real_matrix(rng, d);
    cocycle = std::max(cocycle, cocycle_residual(m, detail::random_point(rng, d, 3.0), detail::random_point(rng, d, 3.0),
                                                 detail::random_point(rng, d, 3.0)));
  }
  double round_trip = 0.0;
  int mismatches = 0;
  for (int i = 0; i < matrices; ++i) {
    RealMatrix m = detail::random_real_matrix(rng, d);
    const bool symmetric = i % 2 == 0;
    if (symmetric) m = (0.5 * (m + m.transpose())).eval();
    const ClassRepresentative r = class_rep(m);
    if (r.t.isZero(0.0) != symmetric) ++mismatches;
    round_trip = std::max(round_trip, (class_rep(r.t).t - r.t).cwiseAbs().maxCoeff());
    for (int n = 0; n < 5; ++n)
      round_trip = std::max(round_trip, coboundary_residual(m, r.t, r.witness.q, detail::random_point(rng, d, 3.0),
                                                            detail::random_point(rng, d, 3.0)));
  }
  const GridRep orth(ConeSpec(d, delta), ModuleDescriptor::orthant(d), 1);
  const Box box = default_box(orth.summand(0).module, 4);
  double shift = 0.0;
  for (int i = 0; i < matrices; ++i) {
    const RealMatrix m = detail::random_real_matrix(rng, d);
    const Cell x = detail::random_step(rng, d, 3);
    const Cell y = detail::random_step(rng, d, 3);
    const SparseState f = random_state(rng, orth, box, 4, 1.0);
    const SparseState lhs = twisted_shift_apply(orth, m, x, twisted_shift_apply(orth, m, y, f));
    const SparseState rhs = omega_eval(m, orth.cone().embed(x), orth.cone().embed(y)) * twisted_shift_apply(orth, m, add(x, y), f);
    shift = std::max(shift, norm(lhs - rhs));
  }
  ex.results() = {{"d", d}, {"cocycle_residual", cocycle}, {"round_trip_residual", round_trip},
                  {"symmetry_mismatches", mismatches}, {"twisted_shift_residual", shift}};
  ex.at_most("cocycle", cocycle, tol_cocycle, "theory-consistent");
  ex.at_most("round_trip", round_trip, tol_round, "theory-consistent");
  ex.equals("trivial_iff_symmetric_mismatches", mismatches, 0.0, "theory-consistent");
  ex.at_most("twisted_shift", shift, tol_shift, "theory-consistent");
  ex.rows_from_verdicts("orthant:" + std::to_string(d), 1);
}

inline void run_nonconjugacy(Experiment& ex) {
  const auto mods = ex.modules("staircase:-1,1");
  const std::string control_text = ex.text("control", "orthant:2");
  const int window = ex.integer("window", 8);
  const double defect_min = ex.control_margin("defect_min", 1e-9);
  const GridRep rep = ex.make_rep(mods, 1, 1.0);
  const GridRep control = ex.make_rep({parse_module(control_text)}, 1, 1.0);
  if (rep.d() != 2 || control.d() != 2) throw ConfigError("nonconjugacy compares two-dimensional modules");
  const std::string subject = detail::rep_text(mods);

  const auto search = [&](const GridRep& r) -> Json {
    const auto w = defect_witness_search(r, detail::union_box(r, window));
    if (!w) return "none found";
    return {{"s", detail::to_json(w->s)}, {"t", detail::to_json(w->t)}, {"f", detail::to_json(w->site)}, {"defect", w->defect}};
  };
  const Json found = search(rep);
  const Json ctrl = search(control);
  ex.results() = {{"module", subject}, {"witness", found}, {"control", control_text}, {"control_witness", ctrl}};
  const auto expect_module = ex.expected(subject, "", 1, "witness");
  const auto expect_control = ex.expected(control_text, "", 1, "witness");
  const double defect = found.is_object() ? found["defect"].get<double>() : 0.0;
  const double control_defect = ctrl.is_object() ? ctrl["defect"].get<double>() : 0.0;
  const bool want_module = expect_module ? expect_module->first.get<bool>() : true;
  const bool want_control = expect_control ? expect_control->first.get<bool>() : false;
  const std::string prov_module = expect_module ? expect_module->second : "oracle";
  const std::string prov_control = expect_control ? expect_control->second : "oracle";
  if (want_module) ex.above("defect:" + subject, defect, defect_min, prov_module);
  else ex.equals("defect:" + subject, defect, 0.0, prov_module);
  if (want_control) ex.above("defect:" + control_text, control_defect, defect_min, prov_control);
  else ex.equals("defect:" + control_text, control_defect, 0.0, prov_control);
  for (const auto& v : ex.verdicts())
    ex.row({"", v.check.substr(7), 1, window, std::nullopt, v.value, v.pass});
}

inline void run_purity(Experiment& ex) {
  // Each listed module is tested on its own.
  const std::vector<std::string> texts =
      ex.texts("modules", {"orthant:2", "axis:-,+", "staircase:-1,1", "staircase:-2,1", "section:-1", "section:-2",
                           "translate(staircase:-1,1;1,1)"});
  const int k = ex.integer("k", 1);
  const int window = ex.integer("window", 6);
  const int samples = ex.integer("samples", 20);
  const int tmax = ex.integer("tmax", 64);
  const std::vector<int> a = ex.integers("direction", {}, std::nullopt);
  Rng& rng = ex.rng();

  Json table = Json::array();
  int infinite = 0;
  int mismatches = 0;
  for (const auto& text : texts) {
    const GridRep rep = ex.make_rep({parse_module(text)}, k, 1.0);
    const Cell dir = a.empty() ? Cell(rep.d(), 1) : Cell(a.begin(), a.end());
    const Box box = default_box(rep.summand(0).module, window);
    Json entries = Json::array();
    for (int n = 0; n < samples; ++n) {
      const SparseState f = random_state(rng, rep, box, 3, 1.0);
      const std::optional<int> t0 = purity_t0(rep, f, dir, tmax);
      // Recount from membership alone: the least t for which every support cell leaves A + t a.
      std::optional<int> oracle;
      for (int t = 1; t <= tmax && !oracle; ++t) {
        bool inside = false;
        for (const auto& [site, value] : f.entries()) {
          Cell c = site.cell;
          for (int i = 0; i < rep.d(); ++i) c[i] -= t * dir[i];
          inside = inside || rep.summand(0).module.contains(c);
        }
        if (!inside) oracle = t;
      }
      if (!t0) ++infinite;
      if (t0 != oracle) ++mismatches;
      Json support = Json::array();
      for (const auto& [site, value] : f.entries()) support.push_back(detail::to_json(site.cell));
      entries.push_back({{"support", support}, {"t0", t0 ? Json(*t0) : Json(nullptr)}, {"oracle", oracle ? Json(*oracle) : Json(nullptr)}});
    }
    table.push_back({{"module", text}, {"direction", detail::to_json(dir)}, {"samples", entries}});
  }
  ex.results() = {{"table", table}, {"infinite", infinite}, {"mismatches", mismatches}};
  ex.equals("infinite_t0_count", infinite, 0.0, "theory-consistent");
  ex.equals("oracle_mismatches", mismatches, 0.0, "oracle");
  ex.rows_from_verdicts("purity", k);
}

inline void run_distinguish(Experiment& ex) {
  const std::vector<int> as = ex.integers("a_values", {-1, -2, -3}, std::nullopt);
  const int k = ex.integer("k", 1);
  const int box = ex.integer("window", 10);
  const int core = ex.integer("core", 6);
  if (as.size() < 2) throw ConfigError("'a_values' needs at least two values");
  for (int a : as)
    if (a >= 0) throw ConfigError("'a_values' entries must be negative");

  std::map<std::pair<int, int>, GaugeProfile> cache;
  const auto profile = [&](int a1, int a2) {
    auto it = cache.find({a1, a2});
    if (it != cache.end()) return it->second;
    const GridRep rep = ex.make_rep({ModuleDescriptor::section(a1), ModuleDescriptor::section(a2)}, k, 1.0);
    const GaugeProfile p = gauge_profile(rep, box, core);
    cache.emplace(std::make_pair(a1, a2), p);
    ex.row({"", rep.label(), k, box, p.commutant_dim, std::nullopt, true});
    return p;
  };
  const auto same = ex.expected("section (+) section", "", k, "commutant_dim");
  const auto mixed = ex.expected("section (+) other section", "", k, "commutant_dim");

  Json comparisons = Json::array();
  for (std::size_t i = 0; i < as.size(); ++i)
    for (std::size_t j = i + 1; j < as.size(); ++j) {
      const int a1 = as[i];
      const int a2 = as[j];
      if (a1 == a2) throw ConfigError("'a_values' entries must be distinct");
      const GaugeProfile p = profile(a1, a1);
      const GaugeProfile q = profile(a2, a1);
      const bool distinguished = !(p == q);
      comparisons.push_back({{"a1", a1},
                             {"a2", a2},
                             {"profile_same", detail::to_json(p)},
                             {"profile_mixed", detail::to_json(q)},
                             {"verdict", distinguished ? "distinguished" : "not distinguished"}});
      const std::string tag = "(" + std::to_string(a1) + "," + std::to_string(a2) + ")";
      ex.equals("distinguished" + tag, distinguished ? 1.0 : 0.0, 1.0, "theory-consistent");
      if (same) ex.equals("commutant_same" + tag, p.commutant_dim, same->first.get<int>(), same->second);
      if (mixed) ex.equals("commutant_mixed" + tag, q.commutant_dim, mixed->first.get<int>(), mixed->second);
    }
  ex.results() = {{"comparisons", comparisons}};
}

// ---------------------------------------------------------------------------
// Dispatch, batches and output

inline const std::map<std::string, std::function<void(Experiment&)>>& experiment_table() {
  static const std::map<std::string, std::function<void(Experiment&)>> table{
      {"ccr", run_ccr},           {"cocycles", run_cocycles},     {"units", run_units},
      {"intertwiners", run_intertwiners}, {"gauge", run_gauge},   {"multiplier", run_multiplier},
      {"nonconjugacy", run_nonconjugacy}, {"purity", run_purity}, {"distinguish", run_distinguish},
  };
  return table;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "experiment", "label",  "module", "modules", "source",  "k",       "delta",    "windows",   "window",
      "core",       "margin", "seed",   "tolerances", "expected", "pairs", "vectors", "elements", "max_norm",
      "omega_d",    "d",      "triples", "matrices", "control", "samples", "tmax",    "direction", "a_values",
      "output"};
  return keys;
}

struct ExperimentOutcome {
  Json report;
  std::vector<CsvRow> rows;
  bool pass = false;
};

/// Runs one experiment config. Throws ConfigError (or a library Error) on invalid input.
inline ExperimentOutcome run_experiment(const Json& config, const ExpectationTable& table, std::uint64_t seed,
                                        double tol_scale) {
  if (!config.is_object()) throw ConfigError("experiment config must be a JSON object");
  if (!config.contains("experiment") || !config["experiment"].is_string())
    throw ConfigError("config needs an 'experiment' name");
  const std::string name = config["experiment"].get<std::string>();
  const auto& dispatch = experiment_table();
  const auto it = dispatch.find(name);
  if (it == dispatch.end()) throw ConfigError("unknown experiment '" + name + "'");
  for (const auto& [key, value] : config.items())
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  Experiment ex(config, table, seed, tol_scale);
  it->second(ex);
  ExperimentOutcome out;
  out.report = ex.report();
  if (config.contains("label")) out.report["label"] = config["label"];
  out.rows = ex.rows();
  out.pass = ex.pass();
  return out;
}

struct RunResult {
  Json report;
  std::vector<CsvRow> rows;
  bool pass = false;
};

/// A config is one experiment object, or {"seed": N, "experiments": [...]} for a batch.
/// Experiment i of a batch uses seed + i unless it sets its own seed and --seed is absent.
/// The report is byte-identical across runs except for "wall_clock_seconds".
inline RunResult run(const Json& config, const ExpectationTable& table, const RunOptions& options = {}) {
  if (!(options.tol_scale > 0.0) || !std::isfinite(options.tol_scale)) throw ConfigError("--tol-scale must be positive");
  const auto start = std::chrono::steady_clock::now();
  std::vector<Json> items;
  std::uint64_t base = kDefaultSeed;
  const auto read_seed = [](const Json& j) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ConfigError("'seed' must be a non-negative integer");
    return j.get<std::uint64_t>();
  };
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  if (config.contains("experiments")) {
    if (!config["experiments"].is_array() || config["experiments"].empty())
      throw ConfigError("'experiments' must be a non-empty list");
    for (const auto& [key, value] : config.items())
      if (key != "experiments" && key != "seed") throw ConfigError("unknown batch key '" + key + "'");
    if (config.contains("seed")) base = read_seed(config["seed"]);
    for (const auto& e : config["experiments"]) items.push_back(e);
  } else {
    if (config.contains("seed")) base = read_seed(config["seed"]);
    items.push_back(config);
  }
  if (options.seed) base = *options.seed;

  RunResult out;
  out.pass = true;
  Json reports = Json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::uint64_t seed = base + i;
    if (!options.seed && items[i].is_object() && items[i].contains("seed") && config.contains("experiments"))
      seed = read_seed(items[i]["seed"]);
    ExperimentOutcome o = run_experiment(items[i], table, seed, options.tol_scale);
    out.pass = out.pass && o.pass;
    reports.push_back(std::move(o.report));
    out.rows.insert(out.rows.end(), o.rows.begin(), o.rows.end());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.report = {{"tool", "coneflow"},
                {"report_version", 1},
                {"expectations_version", table.version()},
                {"seed", base},
                {"tol_scale", options.tol_scale},
                {"experiments", reports},
                {"pass", out.pass},
                {"wall_clock_seconds", seconds}};
  return out;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace detail

inline std::string to_csv(const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  out << "experiment,module,k,window,dimension,residual,verdict\n";
  for (const auto& r : rows) {
    char residual[32] = "";
    if (r.residual) std::snprintf(residual, sizeof residual, "%.6e", *r.residual);
    out << detail::csv_field(r.experiment) << ',' << detail::csv_field(r.module) << ','
        << (r.k ? std::to_string(*r.k) : "") << ',' << (r.window ? std::to_string(*r.window) : "") << ','
        << (r.dimension ? std::to_string(*r.dimension) : "") << ',' << residual << ',' << (r.pass ? "pass" : "fail")
        << '\n';
  }
  return out.str();
}

/// Report without the wall-clock field, for comparing runs.
inline Json without_timing(Json report) {
  report.erase("wall_clock_seconds");
  return report;
}

}  // namespace coneflow

#endif  // CONEFLOW_EXPERIMENTS_HPP
