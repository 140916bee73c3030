#ifndef CKDV_APP_HPP
#define CKDV_APP_HPP

// Command implementations behind the ckdv executable: configuration,
// CSV/JSON output and the simulate / soliton-check / bracket-check /
// stability / convergence commands.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
// 3 an asserted inequality failed.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ckdv/dynamics.hpp"
#include "ckdv/error.hpp"
#include "ckdv/grid.hpp"
#include "ckdv/integrator.hpp"
#include "ckdv/invariants.hpp"
#include "ckdv/solitons.hpp"
#include "ckdv/stability.hpp"
#include "ckdv/state.hpp"

namespace ckdv::app {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalError = 2, kAssertionFailed = 3 };

inline constexpr double kDefaultLength = 40.0 * std::numbers::pi;

// --- configuration -----------------------------------------------------------

struct PerturbationSpec {
  double delta = 0.0;
  PerturbationMode mode = PerturbationMode::mixed;
  bool v_rescale = false;
  /// Translation applied to the perturbation, as a fraction of L.
  double offset = 0.0;
};

struct InitialCondition {
  std::string type = "soliton";  // soliton | soliton-pair | random | file
  double C = 1.0;
  double x0 = 0.0;
  double C2 = 0.5;
  double x02 = 20.0;
  double amplitude = 0.1;
  PerturbationMode random_mode = PerturbationMode::xi_only;
  BumpShape shape{4, 1.0 / 8.0, 1.0 / 16.0, 1.4 / 16.0, 1.0 / 16.0};
  std::string path;
  PerturbationSpec perturbation;
};

struct ExperimentSpec {
  std::string tag = "soliton";  // soliton | ground
  double C = 1.0;
  double delta = 1e-2;
  std::size_t seeds = 20;
  PerturbationMode mode = PerturbationMode::mixed;
  bool v_rescale = true;
  bool translate_xi = false;
};

struct RunConfig {
  double L = kDefaultLength;
  std::size_t N = 512;
  std::size_t components = 2;
  std::optional<double> dt = 1e-3;  // nullopt means "auto"
  double t_end = 10.0;
  std::size_t sample_every = 100;
  std::size_t snapshot_every = 10;  // in samples; 0 disables snapshots
  std::uint64_t seed = 1;
  bool dealias = true;
  bool allow_large_dt = false;
  bool nonlocal = true;
  double decay_tol = 1e-6;
  std::size_t threads = 0;
  InitialCondition initial;
  ExperimentSpec experiment;
};

namespace detail {

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline void read_mode(const json& j, const char* key, PerturbationMode& out, const std::string& where) {
  std::string s;
  read(j, key, s, where);
  if (!s.empty()) {
    try {
      out = parse_perturbation_mode(s);
    } catch (const ConfigError& e) {
      throw ConfigError(where + "." + key + ": " + e.what());
    }
  }
}

}  // namespace detail

/// Parses and validates a RunConfig. Every check happens here, before any
/// computation starts.
inline RunConfig parse_config(const json& j) {
  using detail::read;
  RunConfig c;
  detail::reject_unknown(j, "config",
                         {"domain", "components", "dt", "t_end", "sample_every", "snapshot_every", "seed", "dealias",
                          "allow_large_dt", "nonlocal", "decay_tol", "threads", "initial", "experiment"});
  if (j.contains("domain")) {
    const json& d = j.at("domain");
    detail::reject_unknown(d, "domain", {"L", "N"});
    read(d, "L", c.L, "domain");
    read(d, "N", c.N, "domain");
  }
  read(j, "components", c.components, "config");
  if (j.contains("dt")) {
    const json& dt = j.at("dt");
    if (dt.is_string()) {
      if (dt.get<std::string>() != "auto") throw ConfigError("config.dt: expected a number or \"auto\"");
      c.dt.reset();
    } else if (dt.is_number()) {
      c.dt = dt.get<double>();
    } else {
      throw ConfigError("config.dt: expected a number or \"auto\"");
    }
  }
  read(j, "t_end", c.t_end, "config");
  read(j, "sample_every", c.sample_every, "config");
  read(j, "snapshot_every", c.snapshot_every, "config");
  read(j, "seed", c.seed, "config");
  read(j, "dealias", c.dealias, "config");
  read(j, "allow_large_dt", c.allow_large_dt, "config");
  read(j, "nonlocal", c.nonlocal, "config");
  read(j, "decay_tol", c.decay_tol, "config");
  read(j, "threads", c.threads, "config");

  if (j.contains("initial")) {
    const json& ic = j.at("initial");
    detail::reject_unknown(ic, "initial",
                           {"type", "C", "x0", "C2", "x02", "amplitude", "mode", "bumps", "width_min", "width_max",
                            "path", "perturbation"});
    auto& i = c.initial;
    read(ic, "type", i.type, "initial");
    read(ic, "C", i.C, "initial");
    read(ic, "x0", i.x0, "initial");
    read(ic, "C2", i.C2, "initial");
    read(ic, "x02", i.x02, "initial");
    read(ic, "amplitude", i.amplitude, "initial");
    detail::read_mode(ic, "mode", i.random_mode, "initial");
    read(ic, "bumps", i.shape.count, "initial");
    read(ic, "width_min", i.shape.min_width, "initial");
    read(ic, "width_max", i.shape.max_width, "initial");
    read(ic, "path", i.path, "initial");
    if (ic.contains("perturbation")) {
      const json& p = ic.at("perturbation");
      detail::reject_unknown(p, "initial.perturbation", {"delta", "mode", "v_rescale", "offset"});
      read(p, "delta", i.perturbation.delta, "initial.perturbation");
      detail::read_mode(p, "mode", i.perturbation.mode, "initial.perturbation");
      read(p, "v_rescale", i.perturbation.v_rescale, "initial.perturbation");
      read(p, "offset", i.perturbation.offset, "initial.perturbation");
    }
  }
  if (j.contains("experiment")) {
    const json& ex = j.at("experiment");
    detail::reject_unknown(ex, "experiment", {"tag", "C", "delta", "seeds", "mode", "v_rescale", "translate_xi"});
    auto& e = c.experiment;
    read(ex, "tag", e.tag, "experiment");
    read(ex, "C", e.C, "experiment");
    read(ex, "delta", e.delta, "experiment");
    read(ex, "seeds", e.seeds, "experiment");
    detail::read_mode(ex, "mode", e.mode, "experiment");
    read(ex, "v_rescale", e.v_rescale, "experiment");
    read(ex, "translate_xi", e.translate_xi, "experiment");
  }

  // Field-level validation.
  if (!(c.L > 0.0) || !std::isfinite(c.L)) throw ConfigError("domain.L: must be positive");
  if (c.N < 16 || (c.N & (c.N - 1)) != 0) throw ConfigError("domain.N: must be a power of two >= 16");
  if (c.components < 1 || c.components > kMaxComponents) throw ConfigError("components: must be in 1..16");
  if (c.dt && (!std::isfinite(*c.dt) || *c.dt <= 0.0)) throw ConfigError("dt: must be positive or \"auto\"");
  if (!std::isfinite(c.t_end) || c.t_end < 0.0) throw ConfigError("t_end: must be >= 0");
  if (c.sample_every < 1) throw ConfigError("sample_every: must be >= 1");
  if (!(c.decay_tol > 0.0)) throw ConfigError("decay_tol: must be positive");
  const auto& i = c.initial;
  if (i.type != "soliton" && i.type != "soliton-pair" && i.type != "random" && i.type != "file") {
    throw ConfigError("initial.type: expected soliton, soliton-pair, random or file");
  }
  if ((i.type == "soliton" || i.type == "soliton-pair") && !(i.C > 0.0)) throw ConfigError("initial.C: must be > 0");
  if (i.type == "soliton-pair" && !(i.C2 > 0.0)) throw ConfigError("initial.C2: must be > 0");
  if (i.type == "file" && i.path.empty()) throw ConfigError("initial.path: required for type file");
  if (i.type == "random" && !(i.amplitude >= 0.0)) throw ConfigError("initial.amplitude: must be >= 0");
  if (i.type == "random" && (!(i.shape.min_width > 0.0) || i.shape.max_width < i.shape.min_width)) {
    throw ConfigError("initial.width_min/width_max: need 0 < width_min <= width_max");
  }
  if (!(i.perturbation.delta >= 0.0)) throw ConfigError("initial.perturbation.delta: must be >= 0");
  const auto& e = c.experiment;
  if (e.tag != "soliton" && e.tag != "ground") throw ConfigError("experiment.tag: expected soliton or ground");
  if (!(e.C > 0.0)) throw ConfigError("experiment.C: must be > 0");
  if (!(e.delta >= 0.0)) throw ConfigError("experiment.delta: must be >= 0");
  if (e.seeds < 1) throw ConfigError("experiment.seeds: must be >= 1");
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

inline json to_json(const RunConfig& c) {
  json j;
  j["domain"] = {{"L", c.L}, {"N", c.N}};
  j["components"] = c.components;
  j["dt"] = c.dt ? json(*c.dt) : json("auto");
  j["t_end"] = c.t_end;
  j["sample_every"] = c.sample_every;
  j["snapshot_every"] = c.snapshot_every;
  j["seed"] = c.seed;
  j["dealias"] = c.dealias;
  j["allow_large_dt"] = c.allow_large_dt;
  j["nonlocal"] = c.nonlocal;
  j["decay_tol"] = c.decay_tol;
  j["threads"] = c.threads;
  const auto& i = c.initial;
  j["initial"] = {{"type", i.type},
                  {"C", i.C},
                  {"x0", i.x0},
                  {"C2", i.C2},
                  {"x02", i.x02},
                  {"amplitude", i.amplitude},
                  {"mode", to_string(i.random_mode)},
                  {"bumps", i.shape.count},
                  {"width_min", i.shape.min_width},
                  {"width_max", i.shape.max_width},
                  {"path", i.path},
                  {"perturbation",
                   {{"delta", i.perturbation.delta},
                    {"mode", to_string(i.perturbation.mode)},
                    {"v_rescale", i.perturbation.v_rescale},
                    {"offset", i.perturbation.offset}}}};
  const auto& e = c.experiment;
  j["experiment"] = {{"tag", e.tag},           {"C", e.C},
                     {"delta", e.delta},       {"seeds", e.seeds},
                     {"mode", to_string(e.mode)}, {"v_rescale", e.v_rescale},
                     {"translate_xi", e.translate_xi}};
  return j;
}

// --- output ------------------------------------------------------------------

/// Round-trip exact, locale independent.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row_strings(header);
  }

  void row(const std::vector<double>& values) {
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) line += ',';
      line += fmt_double(values[i]);
    }
    out_ << line << '\n';
  }

  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline std::string index_pair(std::size_t i, std::size_t j, std::size_t n) {
  // Plain concatenation is unambiguous only below ten components.
  return n < 10 ? std::to_string(i) + std::to_string(j) : std::to_string(i) + "_" + std::to_string(j);
}

inline std::vector<std::string> invariants_header(std::size_t nc) {
  std::vector<std::string> h{"t", "H", "V", "H1"};
  for (std::size_t i = 1; i <= nc; ++i) h.push_back("Hhalf_" + std::to_string(i));
  for (std::size_t i = 1; i <= nc; ++i)
    for (std::size_t j = 1; j <= nc; ++j) h.push_back("M_" + index_pair(i, j, nc));
  h.push_back("sobolev");
  h.push_back("apriori_bound");
  return h;
}

inline std::vector<double> invariants_row(const InvariantReport& r, std::size_t nc) {
  std::vector<double> v{r.t, r.H, r.V, r.H1};
  for (double h : r.H_half) v.push_back(h);
  for (std::size_t k = 0; k < nc * nc; ++k) v.push_back(r.M ? r.M->data[k] : std::nan(""));
  v.push_back(std::sqrt(r.sobolev_sq));
  v.push_back(r.apriori_bound);
  return v;
}

inline std::vector<std::string> fields_header(std::size_t nc) {
  std::vector<std::string> h{"x", "u"};
  for (std::size_t i = 1; i <= nc; ++i) h.push_back("phi_" + std::to_string(i));
  return h;
}

inline void write_fields(const fs::path& path, const CoupledState& s) {
  CsvWriter w(path, fields_header(s.components()));
  for (std::size_t j = 0; j < s.grid().size(); ++j) {
    std::vector<double> row{s.grid().node(j), s.u[j]};
    for (const auto& p : s.phi) row.push_back(p[j]);
    w.row(row);
  }
}

inline std::string snapshot_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "fields_t%010.3f.csv", t);
  return buf;
}

inline const std::vector<std::string>& stability_header() {
  static const std::vector<std::string> h{"t", "dI", "dII", "tau_star", "sobolev"};
  return h;
}

inline void write_stability_csv(const fs::path& path, const std::vector<StabilitySample>& series) {
  CsvWriter w(path, stability_header());
  for (const auto& s : series) w.row({s.t, s.dI, s.dII, s.tau_star, s.sobolev});
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json to_json(const InvariantDrift& d) {
  return {{"H", d.H}, {"V", d.V}, {"H1", d.H1}, {"Hhalf_max", d.Hhalf_max}, {"M_max", d.M_max}};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- initial data ------------------------------------------------------------

inline CoupledState read_fields_csv(const fs::path& path, const Grid1D& g, std::size_t nc) {
  std::ifstream in(path);
  if (!in) throw ConfigError("initial.path: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> cols(nc + 1);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != nc + 2) {
      throw ConfigError("initial.path: row " + std::to_string(rows + 1) + " has " + std::to_string(vals.size()) +
                        " columns, expected x,u,phi_1..phi_" + std::to_string(nc));
    }
    for (std::size_t c = 0; c <= nc; ++c) cols[c].push_back(vals[c + 1]);
    ++rows;
  }
  if (rows != g.size()) {
    throw ConfigError("initial.path: " + std::to_string(rows) + " rows but domain.N = " + std::to_string(g.size()));
  }
  std::vector<RealField> phi;
  for (std::size_t c = 1; c <= nc; ++c) phi.emplace_back(g, std::move(cols[c]));
  return CoupledState(RealField(g, std::move(cols[0])), std::move(phi));
}

inline CoupledState build_initial(const RunConfig& c, const Grid1D& g) {
  const auto& i = c.initial;
  CoupledState s(g, c.components);
  if (i.type == "soliton") {
    s = soliton_state({i.C, i.x0}, g, c.components);
  } else if (i.type == "soliton-pair") {
    s = soliton_state({i.C, i.x0}, g, c.components);
    s.u += soliton_profile({i.C2, i.x02}, g);
  } else if (i.type == "random") {
    std::mt19937_64 rng(c.seed);
    if (i.random_mode != PerturbationMode::xi_only) s.u = i.amplitude * random_bumps(g, rng, i.shape);
    if (i.random_mode != PerturbationMode::u_only) {
      for (auto& p : s.phi) p = i.amplitude * random_bumps(g, rng, i.shape);
    }
  } else {
    s = read_fields_csv(i.path, g, c.components);
  }
  if (i.perturbation.delta > 0.0 && i.type != "random") {
    CoupledState dir = make_perturbation(g, c.components, 1.0, c.seed, i.perturbation.mode);
    if (i.perturbation.offset != 0.0) dir = translate_state(dir, i.perturbation.offset * g.length());
    s = perturb(s, dir, i.perturbation.delta, i.perturbation.v_rescale).state;
  }
  if (!s.all_finite()) throw ConfigError("initial state has non-finite values");
  return s;
}

// --- commands ----------------------------------------------------------------

inline std::ostream& log_stream() { return std::cerr; }

/// Runs one evolution with invariant monitoring and field snapshots.
inline int cmd_simulate(const RunConfig& c, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  json summary;
  summary["command"] = "simulate";
  summary["config"] = to_json(c);

  const Grid1D g(c.L, c.N);
  CoupledState initial = build_initial(c, g);
  SolverConfig solver{c.dt.value_or(suggest_dt(g, initial)), c.t_end, c.sample_every, c.dealias,
                      c.allow_large_dt};
  if (!c.dt) {
    // Round "auto" down so that t_end is a whole number of steps.
    const double n = std::ceil(c.t_end / solver.dt - 1e-9);
    solver.dt = n > 0 ? c.t_end / n : solver.dt;
  }
  solver.validate(initial);
  summary["dt_used"] = solver.dt;

  InvariantMonitor monitor(InvariantOptions{c.nonlocal, c.decay_tol});
  std::size_t sample_index = 0;
  std::vector<Observer> observers{std::ref(monitor), [&](double t, const CoupledState& s) {
                                    if (c.snapshot_every > 0 && sample_index % c.snapshot_every == 0) {
                                      write_fields(out_dir / snapshot_name(t), s);
                                    }
                                    ++sample_index;
                                  }};

  int exit_code = kOk;
  try {
    evolve(initial, solver, observers);
  } catch (const NumericalError& e) {
    exit_code = kNumericalError;
    summary["failure"] = {{"message", e.what()}, {"t", e.time()}, {"step", e.step()}};
    log_stream() << "simulate: " << e.what() << '\n';
  } catch (const PreconditionError& e) {
    exit_code = kNumericalError;
    summary["failure"] = {{"message", e.what()}};
    log_stream() << "simulate: " << e.what() << '\n';
  }

  const auto& records = monitor.records();
  {
    CsvWriter w(out_dir / "invariants.csv", invariants_header(c.components));
    for (const auto& r : records) w.row(invariants_row(r, c.components));
  }
  summary["drifts"] = records.size() > 1 ? to_json(invariant_drift(records)) : json::object();
  if (!records.empty() && monitor.bound()) {
    const auto chk = check_apriori(records, *monitor.bound());
    const auto& b = *monitor.bound();
    summary["apriori"] = {{"d", b.d}, {"e", b.e}, {"bound", b.bound}, {"ok", chk.ok}, {"worst_margin", chk.worst_margin}};
    double sup_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : records) sup_margin = std::min(sup_margin, sup_norm_margin(r.sup_u, r.sobolev_sq));
    summary["sup_norm"] = {{"ok", sup_margin >= 0.0}, {"worst_margin", sup_margin}};
  }
  summary["samples"] = records.size();
  summary["stability"] = nullptr;
  summary["wall_seconds"] = seconds_since(t0);
  summary["exit_code"] = exit_code;
  write_json(out_dir / "summary.json", summary);
  return exit_code;
}

struct SolitonCheckRow {
  double C = 0.0;
  double residual = std::nan("");
  double propagation_error = std::nan("");
  std::string status;
};

inline constexpr double kResidualTolerance = 1e-10;
inline constexpr double kPropagationTolerance = 1e-6;

inline SolitonCheckRow soliton_check_one(double C, const Grid1D& g, double t_end, double dt) {
  SolitonCheckRow row;
  row.C = C;
  const SolitonSpec spec{C, 0.0};
  try {
    const RealField f = soliton_profile(spec, g);
    row.residual = tw_residual(f, C);
    if (t_end > 0.0) {
      SolverConfig cfg{dt, t_end, 1000, true, false};
      const auto res = evolve(soliton_state(spec, g, 1), cfg);
      row.propagation_error = max_abs_diff(res.final_state.u, soliton_profile(spec, g, t_end));
    } else {
      row.propagation_error = 0.0;
    }
    const bool ok = row.residual < kResidualTolerance && row.propagation_error < kPropagationTolerance;
    row.status = ok ? "ok" : "fail";
  } catch (const PreconditionError& e) {
    row.status = "domain-fit";
  } catch (const NumericalError& e) {
    row.status = "numerical";
  } catch (const ConfigError& e) {
    row.status = "config";
  }
  return row;
}

/// Closed-form residual and propagation error per C.
inline int cmd_soliton_check(const std::vector<double>& Cs, const fs::path& out_dir, double L = kDefaultLength,
                             std::size_t N = 512, double t_end = 10.0, double dt = 1e-3, std::size_t threads = 0) {
  for (double C : Cs) {
    if (!(C > 0.0) || !std::isfinite(C)) {
      log_stream() << "soliton-check: C must be positive, got " << C << '\n';
      return kConfigError;
    }
  }
  const Grid1D g(L, N);
  std::vector<SolitonCheckRow> rows(Cs.size());
  parallel_for(Cs.size(), worker_count(threads), [&](std::size_t i) { rows[i] = soliton_check_one(Cs[i], g, t_end, dt); });

  fs::create_directories(out_dir);
  CsvWriter w(out_dir / "soliton_check.csv", {"C", "residual", "propagation_error", "status"});
  bool all_ok = true;
  std::cout << "      C        residual   prop. error  status\n";
  for (const auto& r : rows) {
    w.row_strings({fmt_double(r.C), fmt_double(r.residual), fmt_double(r.propagation_error), r.status});
    char line[128];
    std::snprintf(line, sizeof line, "%8.4g  %12.3e  %12.3e  %s\n", r.C, r.residual, r.propagation_error,
                  r.status.c_str());
    std::cout << line;
    all_ok = all_ok && r.status == "ok";
  }
  return all_ok ? kOk : kAssertionFailed;
}

struct BracketRow {
  std::string name;
  BracketReport report;
};

/// The battery: soliton (C = 1), u = sin x with phi_1 = cos x on [-pi, pi),
/// and `n_random` random band-limited states.
inline std::vector<BracketRow> bracket_battery(std::size_t n_random = 10, std::uint64_t seed = 1) {
  std::vector<BracketRow> rows;
  const Grid1D g(kDefaultLength, 512);
  rows.push_back({"soliton", bracket_consistency(soliton_state({1.0, 0.0}, g, 2))});

  const Grid1D trig(2.0 * std::numbers::pi, 64);
  CoupledState s(trig, 2);
  s.u = RealField::sample(trig, [](double x) { return std::sin(x); });
  s.phi[0] = RealField::sample(trig, [](double x) { return std::cos(x); });
  rows.push_back({"trig", bracket_consistency(s)});

  for (std::size_t k = 0; k < n_random; ++k) {
    std::mt19937_64 rng(seed + k);
    CoupledState r(g, 2);
    r.u = random_bumps(g, rng);
    for (auto& p : r.phi) p = random_bumps(g, rng);
    rows.push_back({"random_" + std::to_string(k + 1), bracket_consistency(r)});
  }
  return rows;
}

inline constexpr double kBracketTolerance = 1e-8;

inline int cmd_bracket_check(const fs::path& out_dir, std::size_t n_random = 10) {
  const auto rows = bracket_battery(n_random);
  fs::create_directories(out_dir);
  CsvWriter w(out_dir / "bracket_check.csv", {"state", "residual_half", "residual_one", "inferred_scale"});
  bool ok = true;
  std::cout << "state         residual(H/2)  residual(H)  inferred scale\n";
  for (const auto& r : rows) {
    w.row_strings({r.name, fmt_double(r.report.residual_half), fmt_double(r.report.residual_one),
                   fmt_double(r.report.inferred_scale)});
    char line[160];
    std::snprintf(line, sizeof line, "%-12s  %12.3e  %11.3e  %g\n", r.name.c_str(), r.report.residual_half,
                  r.report.residual_one, r.report.inferred_scale);
    std::cout << line;
    ok = ok && r.report.inferred_scale == 0.5 && r.report.residual_half < kBracketTolerance;
  }
  return ok ? kOk : kAssertionFailed;
}

/// Which inequalities a stability run asserts (the others are reported only).
struct AssertionPolicy {
  bool upper = false;
  bool lower = false;
  bool tracking = false;
};

inline AssertionPolicy assertion_policy(const ExperimentSpec& e) {
  AssertionPolicy p;
  p.upper = e.v_rescale && e.delta <= 1e-2;
  p.lower = e.v_rescale && e.delta <= 1e-3;
  p.tracking = e.v_rescale && e.delta <= 1e-2;
  return p;
}

inline std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t k = 0; k < count; ++k) s[k] = first + k;
  return s;
}

inline int cmd_stability(const RunConfig& c, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  const Grid1D g(c.L, c.N);
  const auto& e = c.experiment;
  StabilityOptions opts;
  opts.solver = SolverConfig{c.dt.value_or(1e-3), c.t_end, c.sample_every, c.dealias, c.allow_large_dt};
  opts.n_components = c.components;
  opts.mode = e.mode;
  opts.v_rescale = e.v_rescale;
  opts.translate_xi = e.translate_xi;
  opts.threads = c.threads;
  const auto seeds = seed_list(c.seed, e.seeds);

  json summary;
  summary["command"] = "stability";
  summary["config"] = to_json(c);
  int exit_code = kOk;
  try {
    if (e.tag == "soliton") {
      const auto reports = run_soliton_stability(g, e.C, e.delta, seeds, opts);
      const AssertionPolicy policy = assertion_policy(e);
      bool up = true, low = true, track = true, sup = true;
      json runs = json::array();
      for (const auto& r : reports) {
        write_stability_csv(out_dir / ("stability_seed_" + std::to_string(r.seed) + ".csv"), r.series);
        up = up && r.ok_upper;
        low = low && r.ok_lower;
        track = track && r.ok_tracking;
        sup = sup && r.worst_sup_margin >= 0.0;
        runs.push_back({{"seed", r.seed},
                        {"delta", r.delta},
                        {"dH", r.dH},
                        {"upper_coeff", r.upper_coeff},
                        {"lower_coeff", r.lower_coeff},
                        {"upper_margin", r.upper_margin},
                        {"lower_margin", r.lower_margin},
                        {"tracking_bound", r.tracking_bound},
                        {"tracking_margin", r.worst_tracking_margin},
                        {"drift", r.drift},
                        {"upper_ok", r.ok_upper},
                        {"lower_ok", r.ok_lower},
                        {"tracking_ok", r.ok_tracking}});
      }
      write_stability_csv(out_dir / "stability.csv", reports.front().series);
      summary["stability"] = {{"experiment", "soliton"},
                              {"C", e.C},
                              {"dH", reports.front().dH},
                              {"tracking_bound", reports.front().tracking_bound},
                              {"lower_coeff", reports.front().lower_coeff},
                              {"upper_ok", up},
                              {"lower_ok", low},
                              {"tracking_ok", track},
                              {"asserted", {{"upper", policy.upper}, {"lower", policy.lower}, {"tracking", policy.tracking}}},
                              {"runs", runs}};
      summary["sup_norm"] = {{"ok", sup}};
      const bool failed = (policy.upper && !up) || (policy.lower && !low) || (policy.tracking && !track) || !sup;
      if (failed) exit_code = kAssertionFailed;
    } else {
      const auto reports = run_ground_state_stability(g, e.delta, seeds, opts);
      bool ok = true, sup = true;
      json runs = json::array();
      for (const auto& r : reports) {
        write_stability_csv(out_dir / ("stability_seed_" + std::to_string(r.seed) + ".csv"), r.series);
        ok = ok && r.ok;
        sup = sup && r.worst_sup_margin >= 0.0;
        runs.push_back({{"seed", r.seed},
                        {"delta", r.delta},
                        {"d", r.bound.d},
                        {"e", r.bound.e},
                        {"bound", r.bound.bound},
                        {"max_norm", r.max_norm},
                        {"worst_margin", r.worst_margin},
                        {"ok", r.ok}});
      }
      write_stability_csv(out_dir / "stability.csv", reports.front().series);
      const auto& b = reports.front().bound;
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& r : reports) worst = std::min(worst, r.worst_margin);
      summary["apriori"] = {{"d", b.d}, {"e", b.e}, {"bound", b.bound}, {"ok", ok}, {"worst_margin", worst}};
      summary["stability"] = {{"experiment", "ground"}, {"bound_ok", ok}, {"runs", runs}};
      summary["sup_norm"] = {{"ok", sup}};
      if (!ok || !sup) exit_code = kAssertionFailed;
    }
  } catch (const NumericalError& err) {
    exit_code = kNumericalError;
    summary["failure"] = {{"message", err.what()}, {"t", err.time()}, {"step", err.step()}};
    log_stream() << "stability: " << err.what() << '\n';
  }
  summary["wall_seconds"] = seconds_since(t0);
  summary["exit_code"] = exit_code;
  write_json(out_dir / "summary.json", summary);
  return exit_code;
}

// --- convergence -------------------------------------------------------------

struct ConvergenceStudy {
  std::vector<double> dts;
  std::vector<double> dt_errors;
  std::vector<double> dt_orders;  // log2 of successive error ratios
  std::vector<std::size_t> Ns;
  std::vector<double> N_errors;
  double linear_mode_error = 0.0;
};

/// Error of the soliton at T = 1 against a fine-step reference (temporal)
/// and against the closed form (spatial, dt = 1e-3).
inline ConvergenceStudy convergence_study(std::size_t threads = 0) {
  ConvergenceStudy st;
  const Grid1D g(kDefaultLength, 512);
  const SolitonSpec spec{1.0, 0.0};
  const CoupledState sol = soliton_state(spec, g, 1);
  st.dts = {0.01, 0.005, 0.0025, 0.00125};
  const double ref_dt = st.dts.back() / 8.0;

  std::vector<double> runs_dt = st.dts;
  runs_dt.push_back(ref_dt);
  std::vector<CoupledState> finals(runs_dt.size(), sol);
  st.Ns = {32, 64, 128, 256, 512};
  st.N_errors.resize(st.Ns.size());
  const std::size_t n_jobs = runs_dt.size() + st.Ns.size();
  parallel_for(n_jobs, worker_count(threads), [&](std::size_t i) {
    if (i < runs_dt.size()) {
      finals[i] = evolve(sol, SolverConfig{runs_dt[i], 1.0, 1000000, true, false}).final_state;
    } else {
      const std::size_t k = i - runs_dt.size();
      const Grid1D gn(kDefaultLength, st.Ns[k]);
      const auto res = evolve(soliton_state(spec, gn, 1), SolverConfig{1e-3, 1.0, 1000000, true, true});
      st.N_errors[k] = max_abs_diff(res.final_state.u, soliton_profile(spec, gn, 1.0));
    }
  });
  for (std::size_t k = 0; k < st.dts.size(); ++k) {
    st.dt_errors.push_back(max_abs_diff(finals[k].u, finals.back().u));
  }
  for (std::size_t k = 0; k + 1 < st.dt_errors.size(); ++k) {
    st.dt_orders.push_back(std::log2(st.dt_errors[k] / st.dt_errors[k + 1]));
  }

  // Linear Airy mode: the integrating factor makes it exact.
  const Grid1D small(2.0 * std::numbers::pi, 16);
  CoupledState lin(small, 1);
  const double eps = 1e-12;
  lin.u = RealField::sample(small, [&](double x) { return eps * std::sin(x); });
  const auto res = evolve(lin, SolverConfig{0.01, 1.0, 1000000, true, false});
  const RealField exact = RealField::sample(small, [&](double x) { return eps * std::sin(x + 1.0); });
  st.linear_mode_error = max_abs_diff(res.final_state.u, exact) / eps;
  return st;
}

/// Successive error ratios increase (faster than any fixed power) until the
/// error reaches `floor`.
inline bool super_algebraic(const std::vector<double>& errors, double floor = 1e-9) {
  double prev_ratio = 1.0;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (!(errors[k + 1] < errors[k])) return false;
    if (errors[k + 1] < floor) break;
    const double ratio = errors[k] / errors[k + 1];
    if (!(ratio > prev_ratio)) return false;
    prev_ratio = ratio;
  }
  return true;
}

inline int cmd_convergence(const fs::path& out_dir, std::size_t threads = 0) {
  const auto st = convergence_study(threads);
  fs::create_directories(out_dir);
  CsvWriter w(out_dir / "convergence.csv", {"study", "parameter", "error", "observed_order"});
  bool temporal_ok = !st.dt_orders.empty();
  std::cout << "temporal (soliton, T = 1, vs dt = " << st.dts.back() / 8.0 << " reference)\n";
  for (std::size_t k = 0; k < st.dts.size(); ++k) {
    const double order = k == 0 ? std::nan("") : st.dt_orders[k - 1];
    w.row_strings({"dt", fmt_double(st.dts[k]), fmt_double(st.dt_errors[k]), fmt_double(order)});
    char line[128];
    std::snprintf(line, sizeof line, "  dt = %-9g error = %.3e  order = %.3f\n", st.dts[k], st.dt_errors[k], order);
    std::cout << line;
    if (k > 0) temporal_ok = temporal_ok && order >= 3.5 && order <= 4.5;
  }
  std::cout << "spatial (soliton, T = 1, dt = 1e-3, vs closed form)\n";
  for (std::size_t k = 0; k < st.Ns.size(); ++k) {
    const double order = k == 0 ? std::nan("") : std::log2(st.N_errors[k - 1] / st.N_errors[k]);
    w.row_strings({"N", std::to_string(st.Ns[k]), fmt_double(st.N_errors[k]), fmt_double(order)});
    char line[128];
    std::snprintf(line, sizeof line, "  N = %-5zu error = %.3e\n", st.Ns[k], st.N_errors[k]);
    std::cout << line;
  }
  w.row_strings({"linear_mode", "0.01", fmt_double(st.linear_mode_error), "nan"});
  const bool spatial_ok = super_algebraic(st.N_errors);
  const bool linear_ok = st.linear_mode_error < 1e-12;
  std::cout << "linear Airy mode relative error = " << st.linear_mode_error << '\n';
  std::cout << "temporal " << (temporal_ok ? "ok" : "FAIL") << ", spatial " << (spatial_ok ? "ok" : "FAIL")
            << ", linear " << (linear_ok ? "ok" : "FAIL") << '\n';
  return temporal_ok && spatial_ok && linear_ok ? kOk : kAssertionFailed;
}

}  // namespace ckdv::app

#endif  // CKDV_APP_HPP
