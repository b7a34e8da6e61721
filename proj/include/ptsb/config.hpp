#pragma once

// Run configuration: flat `section.key = value` settings, layered as
// mode defaults < preset < file < environment < command line.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ptsb/ed.hpp"
#include "ptsb/errors.hpp"
#include "ptsb/io.hpp"
#include "ptsb/model.hpp"
#include "ptsb/projection.hpp"
#include "ptsb/tdvp.hpp"

namespace ptsb {

enum class RunMode { bath, spectrum, dynamics, validate };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::bath: return "bath";
    case RunMode::spectrum: return "spectrum";
    case RunMode::dynamics: return "dynamics";
    case RunMode::validate: return "validate";
  }
  return "?";
}

struct RunConfig {
  RunMode mode = RunMode::spectrum;
  std::string preset;

  ModelParams model;
  Scheme scheme = Scheme::wilson;
  WilsonSpec wilson;
  UniformSpec uniform;
  LinearSpec linear;
  SingleModeSpec single;

  SweepAxis axis = SweepAxis::lambda;
  double x_min = 0.0;
  double x_max = 1.0;
  int count = 41;
  int branches = 1;
  SolverOptions solver;
  EpOptions ep;

  double t_end = 200.0;
  StepControl step;
  double floor = 1e-8;

  int n_max = 0;       // 0: per-bath default
  int n_increment = 0;  // 0: per-bath default
  double ed_tol = 1e-8;
  DiagonalizeOptions diag;
  std::size_t dimension_cap = 2'000'000;

  std::vector<int> scan_M;
  std::vector<double> scan_eps;
  std::vector<double> scan_lambda;
  std::vector<double> scan_delta;

  std::string output_dir = ".";
  std::string prefix;
  int workers = 1;

  BathSpec bath_spec() const {
    switch (scheme) {
      case Scheme::wilson: return wilson;
      case Scheme::uniform: return uniform;
      case Scheme::linear_finite: return linear;
      case Scheme::single_mode: return single;
    }
    return wilson;
  }

  std::vector<double> grid() const {
    std::vector<double> g;
    for (int i = 0; i < count; ++i) g.push_back(count == 1 ? x_min : x_min + (x_max - x_min) * i / (count - 1));
    return g;
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double out = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || p != t.data() + t.size() || t.empty() || !std::isfinite(out))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

inline long to_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long out = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || p != t.data() + t.size() || t.empty())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class E>
E to_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> opts) {
  const std::string t = trim(v);
  std::string names;
  for (const auto& [name, val] : opts) {
    if (t == name) return val;
    names += std::string(names.empty() ? "" : ", ") + name;
  }
  throw ConfigError(key, "expected one of {" + names + "}, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

inline nlohmann::json list_json(const std::vector<double>& v) { return v; }
inline nlohmann::json list_json(const std::vector<int>& v) { return v; }

inline const std::map<std::string, Field>& fields() {
  using nlohmann::json;
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    auto num = [&f](const std::string& key, auto member) {
      f[key] = {[key, member](RunConfig& c, const std::string& v) { member(c) = to_double(key, v); },
                [member](const RunConfig& c) { return json(member(c)); }};
    };
    auto integer = [&f](const std::string& key, auto member) {
      f[key] = {[key, member](RunConfig& c, const std::string& v) {
                  member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_int(key, v));
                },
                [member](const RunConfig& c) { return json(member(c)); }};
    };

    num("model.delta", [](auto& c) -> auto& { return c.model.delta; });
    num("model.eps", [](auto& c) -> auto& { return c.model.eps; });
    num("model.s", [](auto& c) -> auto& { return c.model.s; });
    num("model.omega_c", [](auto& c) -> auto& { return c.model.omega_c; });
    num("model.lambda", [](auto& c) -> auto& { return c.model.lambda; });
    f["model.bias"] = {[](RunConfig& c, const std::string& v) {
                         c.model.bias = to_enum<BiasKind>("model.bias", v,
                                                          {{"imaginary", BiasKind::imaginary}, {"real", BiasKind::real}});
                       },
                       [](const RunConfig& c) { return json(to_string(c.model.bias)); }};

    f["bath.scheme"] = {[](RunConfig& c, const std::string& v) {
                          c.scheme = to_enum<Scheme>("bath.scheme", v,
                                                     {{"wilson", Scheme::wilson},
                                                      {"uniform", Scheme::uniform},
                                                      {"linear_finite", Scheme::linear_finite},
                                                      {"single_mode", Scheme::single_mode}});
                        },
                        [](const RunConfig& c) { return json(to_string(c.scheme)); }};
    num("bath.Lambda", [](auto& c) -> auto& { return c.wilson.Lambda; });
    integer("bath.first_index", [](auto& c) -> auto& { return c.wilson.first_index; });
    // bath.M applies to whichever scheme is active.
    f["bath.M"] = {[](RunConfig& c, const std::string& v) {
                     const int m = static_cast<int>(to_int("bath.M", v));
                     c.wilson.M = c.uniform.M = c.linear.M = m;
                   },
                   [](const RunConfig& c) {
                     switch (c.scheme) {
                       case Scheme::wilson: return json(c.wilson.M);
                       case Scheme::uniform: return json(c.uniform.M);
                       case Scheme::linear_finite: return json(c.linear.M);
                       case Scheme::single_mode: return json(1);
                     }
                     return json(nullptr);
                   }};
    num("bath.omega_max", [](auto& c) -> auto& { return c.uniform.omega_max; });
    f["bath.cutoff"] = {[](RunConfig& c, const std::string& v) {
                          c.uniform.cutoff = to_enum<Cutoff>("bath.cutoff", v,
                                                             {{"hard", Cutoff::hard}, {"exponential", Cutoff::exponential}});
                        },
                        [](const RunConfig& c) { return json(to_string(c.uniform.cutoff)); }};
    num("bath.omega_1", [](auto& c) -> auto& { return c.linear.omega_1; });
    num("bath.omega_M", [](auto& c) -> auto& { return c.linear.omega_M; });
    num("bath.omega_0", [](auto& c) -> auto& { return c.single.omega_0; });

    f["sweep.axis"] = {[](RunConfig& c, const std::string& v) {
                         c.axis = to_enum<SweepAxis>("sweep.axis", v,
                                                     {{"lambda", SweepAxis::lambda}, {"eps", SweepAxis::eps}});
                       },
                       [](const RunConfig& c) { return json(to_string(c.axis)); }};
    num("sweep.min", [](auto& c) -> auto& { return c.x_min; });
    num("sweep.max", [](auto& c) -> auto& { return c.x_max; });
    integer("sweep.count", [](auto& c) -> auto& { return c.count; });
    integer("sweep.branches", [](auto& c) -> auto& { return c.branches; });
    num("sweep.tol", [](auto& c) -> auto& { return c.solver.tol; });
    integer("sweep.max_iterations", [](auto& c) -> auto& { return c.solver.max_iterations; });
    num("sweep.fd_step", [](auto& c) -> auto& { return c.solver.fd_step; });
    num("sweep.delta_ep", [](auto& c) -> auto& { return c.ep.delta_ep; });
    num("sweep.ep_width", [](auto& c) -> auto& { return c.ep.relative_width; });

    num("dynamics.t_end", [](auto& c) -> auto& { return c.t_end; });
    num("dynamics.rtol", [](auto& c) -> auto& { return c.step.rtol; });
    num("dynamics.atol", [](auto& c) -> auto& { return c.step.atol; });
    num("dynamics.dt_min", [](auto& c) -> auto& { return c.step.dt_min; });
    num("dynamics.dt_max", [](auto& c) -> auto& { return c.step.dt_max; });
    num("dynamics.stride", [](auto& c) -> auto& { return c.step.sample_dt; });
    num("dynamics.floor", [](auto& c) -> auto& { return c.floor; });

    integer("ed.n_max", [](auto& c) -> auto& { return c.n_max; });
    integer("ed.increment", [](auto& c) -> auto& { return c.n_increment; });
    num("ed.tol", [](auto& c) -> auto& { return c.ed_tol; });
    integer("ed.dense_limit", [](auto& c) -> auto& { return c.diag.dense_limit; });
    integer("ed.dimension_cap", [](auto& c) -> auto& { return c.dimension_cap; });

    f["scan.M"] = {[](RunConfig& c, const std::string& v) {
                     c.scan_M.clear();
                     for (const auto& s : split_list(v)) c.scan_M.push_back(static_cast<int>(to_int("scan.M", s)));
                   },
                   [](const RunConfig& c) { return list_json(c.scan_M); }};
    auto dlist = [&f](const std::string& key, std::vector<double> RunConfig::*member) {
      f[key] = {[key, member](RunConfig& c, const std::string& v) {
                  (c.*member).clear();
                  for (const auto& s : split_list(v)) (c.*member).push_back(to_double(key, s));
                },
                [member](const RunConfig& c) { return list_json(c.*member); }};
    };
    dlist("scan.eps", &RunConfig::scan_eps);
    dlist("scan.lambda", &RunConfig::scan_lambda);
    dlist("scan.delta", &RunConfig::scan_delta);

    f["output.dir"] = {[](RunConfig& c, const std::string& v) { c.output_dir = trim(v); },
                       [](const RunConfig& c) { return json(c.output_dir); }};
    f["output.prefix"] = {[](RunConfig& c, const std::string& v) { c.prefix = trim(v); },
                          [](const RunConfig& c) { return json(c.prefix); }};
    integer("run.workers", [](auto& c) -> auto& { return c.workers; });
    return f;
  }();
  return table;
}

}  // namespace config_detail

/// Applies one `section.key = value` assignment.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& f = config_detail::fields();
  auto it = f.find(key);
  if (it == f.end()) throw ConfigError(key, "unknown configuration key");
  it->second.set(cfg, value);
}

/// Parses `key=value` (as given to --set).
inline void apply_assignment(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "expected key=value");
  apply_setting(cfg, config_detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// Ordered (key, value) pairs from a config text with [section] headers.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.resize(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "malformed section header");
      section = config_detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    std::string key = config_detail::trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    out.emplace_back(key, line.substr(eq + 1));
  }
  return out;
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  for (const auto& [k, v] : parse_config_text(ss.str())) apply_setting(cfg, k, v);
}

/// Defaults for each run mode.
inline RunConfig mode_defaults(RunMode mode) {
  RunConfig c;
  c.mode = mode;
  switch (mode) {
    case RunMode::bath:
      c.model.lambda = 0.1;
      break;
    case RunMode::spectrum:
      c.model.delta = 0.3;
      c.model.eps = 0.1;
      c.model.lambda = 0.1;
      break;
    case RunMode::dynamics:
      c.model.delta = 0.1;
      c.model.eps = 0.05;
      c.model.lambda = 0.01;
      c.scheme = Scheme::uniform;
      break;
    case RunMode::validate:
      c.model.delta = 0.5;
      c.model.eps = 0.1;
      c.scheme = Scheme::single_mode;
      c.x_max = 1.2;
      c.count = 50;
      c.branches = 2;
      break;
  }
  return c;
}

struct Preset {
  RunMode mode;
  std::vector<std::pair<std::string, std::string>> settings;
};

inline const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> table = {
      {"fig1a", {RunMode::spectrum, {{"model.delta", "0.3"}, {"model.eps", "0.1"}, {"bath.scheme", "wilson"},
                                     {"sweep.axis", "lambda"}, {"sweep.min", "0"}, {"sweep.max", "1"},
                                     {"sweep.count", "41"}}}},
      {"fig1b", {RunMode::spectrum, {{"model.delta", "0.3"}, {"model.eps", "0.1"}, {"bath.scheme", "single_mode"},
                                     {"bath.omega_0", "1"}, {"sweep.axis", "lambda"}, {"sweep.min", "0"},
                                     {"sweep.max", "1.2"}, {"sweep.count", "49"}, {"sweep.branches", "2"}}}},
      {"fig2a", {RunMode::spectrum, {{"model.delta", "0.1"}, {"model.lambda", "0.01"}, {"sweep.axis", "eps"},
                                     {"sweep.min", "0"}, {"sweep.max", "0.2"}, {"sweep.count", "41"}}}},
      {"fig2b", {RunMode::spectrum, {{"model.delta", "0.1"}, {"model.lambda", "0.1"}, {"sweep.axis", "eps"},
                                     {"sweep.min", "0"}, {"sweep.max", "0.2"}, {"sweep.count", "41"}}}},
      {"fig2c", {RunMode::spectrum, {{"model.delta", "0.3"}, {"model.lambda", "0.1"}, {"sweep.axis", "eps"},
                                     {"sweep.min", "0"}, {"sweep.max", "0.5"}, {"sweep.count", "51"}}}},
      {"fig2d", {RunMode::spectrum, {{"model.delta", "0.3"}, {"model.lambda", "0.3"}, {"sweep.axis", "eps"},
                                     {"sweep.min", "0"}, {"sweep.max", "0.5"}, {"sweep.count", "51"}}}},
      {"fig3a", {RunMode::dynamics, {{"model.delta", "0.1"}, {"model.lambda", "0.01"}, {"scan.eps", "0.05,0.1"}}}},
      {"fig3b", {RunMode::dynamics, {{"model.delta", "0.1"}, {"model.lambda", "0.1"}, {"scan.eps", "0.05,0.1"}}}},
      {"fig3c", {RunMode::dynamics, {{"model.delta", "0.3"}, {"model.lambda", "0.1"}, {"scan.eps", "0.1,0.3"}}}},
      {"fig3d", {RunMode::dynamics, {{"model.delta", "0.3"}, {"model.lambda", "0.3"}, {"scan.eps", "0.1,0.3"}}}},
      {"fig4a", {RunMode::dynamics, {{"model.delta", "0.1"}, {"model.lambda", "0.01"}, {"scan.eps", "0.05,0.1"}}}},
      {"fig4b", {RunMode::dynamics, {{"model.delta", "0.3"}, {"model.lambda", "0.1"}, {"scan.eps", "0.1,0.3"}}}},
      {"fig5", {RunMode::validate, {{"model.delta", "0.5"}, {"model.eps", "0.1"}, {"bath.scheme", "single_mode"},
                                    {"bath.omega_0", "1"}, {"sweep.min", "0"}, {"sweep.max", "1.2"},
                                    {"sweep.count", "50"}, {"sweep.branches", "2"}}}},
      {"fig6", {RunMode::validate, {{"model.delta", "0.3"}, {"model.eps", "0.1"}, {"bath.scheme", "linear_finite"},
                                    {"bath.omega_1", "1"}, {"bath.omega_M", "1.4"}, {"scan.M", "3,5"},
                                    {"sweep.min", "0"}, {"sweep.max", "0.8"}, {"sweep.count", "50"},
                                    {"sweep.branches", "2"}}}},
      {"fig7a", {RunMode::spectrum, {{"model.delta", "0.3"}, {"model.eps", "0.1"}, {"model.bias", "real"},
                                     {"sweep.axis", "lambda"}, {"sweep.min", "0"}, {"sweep.max", "1"},
                                     {"sweep.count", "41"}}}},
      {"fig7b", {RunMode::dynamics, {{"model.delta", "0.1"}, {"model.lambda", "0.01"}, {"model.bias", "real"},
                                     {"scan.eps", "0.05,0.1"}}}},
  };
  return table;
}

/// Range checks on the resolved configuration; errors name the offending key.
inline void validate_config(const RunConfig& c) {
  auto need = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  need(c.model.delta >= 0.0, "model.delta", "must be >= 0");
  need(c.model.eps >= 0.0, "model.eps", "must be >= 0");
  need(c.model.s > 0.0, "model.s", "must be > 0");
  need(c.model.omega_c > 0.0, "model.omega_c", "must be > 0");
  need(c.model.lambda >= 0.0, "model.lambda", "must be >= 0");
  need(c.wilson.Lambda > 1.0, "bath.Lambda", "must be > 1");
  need(c.wilson.first_index >= 0, "bath.first_index", "must be >= 0");
  need(c.wilson.M >= 1 && c.uniform.M >= 1, "bath.M", "must be >= 1");
  need(c.scheme != Scheme::linear_finite || c.linear.M >= 2, "bath.M", "linear_finite needs M >= 2");
  need(c.uniform.omega_max > 0.0, "bath.omega_max", "must be > 0");
  need(c.linear.omega_1 > 0.0, "bath.omega_1", "must be > 0");
  need(c.linear.omega_M > c.linear.omega_1, "bath.omega_M", "must be > bath.omega_1");
  need(c.single.omega_0 > 0.0, "bath.omega_0", "must be > 0");
  need(c.count >= 1, "sweep.count", "must be >= 1");
  need(c.x_max >= c.x_min, "sweep.max", "must be >= sweep.min");
  need(c.x_min >= 0.0, "sweep.min", "must be >= 0");
  need(c.branches == 1 || c.branches == 2, "sweep.branches", "must be 1 or 2");
  need(c.solver.tol > 0.0, "sweep.tol", "must be > 0");
  need(c.solver.max_iterations >= 1, "sweep.max_iterations", "must be >= 1");
  need(c.solver.fd_step > 0.0, "sweep.fd_step", "must be > 0");
  need(c.ep.delta_ep > 0.0, "sweep.delta_ep", "must be > 0");
  need(c.ep.relative_width > 0.0, "sweep.ep_width", "must be > 0");
  need(c.t_end >= 0.0, "dynamics.t_end", "must be >= 0");
  need(c.step.rtol > 0.0, "dynamics.rtol", "must be > 0");
  need(c.step.atol > 0.0, "dynamics.atol", "must be > 0");
  need(c.step.dt_min > 0.0, "dynamics.dt_min", "must be > 0");
  need(c.step.dt_max > 0.0, "dynamics.dt_max", "must be > 0");
  need(c.step.sample_dt > 0.0, "dynamics.stride", "must be > 0");
  need(c.floor > 0.0, "dynamics.floor", "must be > 0");
  need(c.n_max >= 0, "ed.n_max", "must be >= 0");
  need(c.n_increment >= 0, "ed.increment", "must be >= 0");
  need(c.ed_tol > 0.0, "ed.tol", "must be > 0");
  need(c.workers >= 1, "run.workers", "must be >= 1");
  for (int m : c.scan_M) need(m >= 1, "scan.M", "entries must be >= 1");
  for (double e : c.scan_eps) need(e >= 0.0, "scan.eps", "entries must be >= 0");
  for (double l : c.scan_lambda) need(l >= 0.0, "scan.lambda", "entries must be >= 0");
  for (double d : c.scan_delta) need(d >= 0.0, "scan.delta", "entries must be >= 0");
  need(c.mode != RunMode::validate || c.scheme == Scheme::single_mode || c.scheme == Scheme::linear_finite,
       "bath.scheme", "validate needs single_mode or linear_finite");
}

/// Fully resolved configuration as JSON (every key, including defaults).
inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.mode);
  j["preset"] = c.preset;
  for (const auto& [key, field] : config_detail::fields()) j[key] = field.get(c);
  return j;
}

struct ConfigSources {
  RunMode mode = RunMode::spectrum;
  std::string preset;
  std::string file;
  std::vector<std::pair<std::string, std::string>> environment;  // already mapped to keys
  std::vector<std::string> overrides;                             // key=value from the command line
};

/// Maps PTSB_WORKERS and PTSB_OUTPUT_DIR to configuration keys.
inline std::vector<std::pair<std::string, std::string>> environment_settings() {
  std::vector<std::pair<std::string, std::string>> out;
  if (const char* w = std::getenv("PTSB_WORKERS"); w && *w) out.emplace_back("run.workers", w);
  if (const char* d = std::getenv("PTSB_OUTPUT_DIR"); d && *d) out.emplace_back("output.dir", d);
  return out;
}

inline RunConfig load_config(const ConfigSources& src) {
  RunConfig cfg = mode_defaults(src.mode);
  if (!src.preset.empty()) {
    auto it = presets().find(src.preset);
    if (it == presets().end()) throw ConfigError("preset", "unknown preset '" + src.preset + "'");
    if (it->second.mode != src.mode)
      throw ConfigError("preset", "preset '" + src.preset + "' belongs to mode " + to_string(it->second.mode));
    for (const auto& [k, v] : it->second.settings) apply_setting(cfg, k, v);
    cfg.preset = src.preset;
  }
  if (!src.file.empty()) apply_config_file(cfg, src.file);
  for (const auto& [k, v] : src.environment) apply_setting(cfg, k, v);
  for (const auto& a : src.overrides) apply_assignment(cfg, a);
  if (cfg.prefix.empty()) cfg.prefix = cfg.preset.empty() ? to_string(cfg.mode) : cfg.preset;
  validate_config(cfg);
  return cfg;
}

}  // namespace ptsb
