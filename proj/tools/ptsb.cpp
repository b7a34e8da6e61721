// Command-line front end: ptsb bath|spectrum|dynamics|validate [options]

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ptsb/config.hpp"
#include "ptsb/runner.hpp"

namespace {

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

// Shorthand flags; each expands to a --set assignment.
const Flag kFlags[] = {
    {"--delta", "model.delta", "tunneling amplitude"},
    {"--eps", "model.eps", "bias magnitude"},
    {"--lambda", "model.lambda", "dimensionless coupling"},
    {"--bias", "model.bias", "imaginary | real"},
    {"--s", "model.s", "bath exponent"},
    {"--scheme", "bath.scheme", "wilson | uniform | linear_finite | single_mode"},
    {"--Lambda", "bath.Lambda", "Wilson discretization parameter"},
    {"--M", "bath.M", "number of bath modes"},
    {"--omega-max", "bath.omega_max", "uniform grid upper frequency"},
    {"--omega0", "bath.omega_0", "single-mode frequency"},
    {"--axis", "sweep.axis", "lambda | eps"},
    {"--min", "sweep.min", "grid start"},
    {"--max", "sweep.max", "grid end"},
    {"--count", "sweep.count", "grid points"},
    {"--branches", "sweep.branches", "1 or 2"},
    {"--tol", "sweep.tol", "projection residual tolerance"},
    {"--t-end", "dynamics.t_end", "final time"},
    {"--rtol", "dynamics.rtol", "relative step tolerance"},
    {"--atol", "dynamics.atol", "absolute step tolerance"},
    {"--stride", "dynamics.stride", "sampling interval"},
    {"--n-max", "ed.n_max", "Fock cutoff per mode (0 = default)"},
    {"--workers", "run.workers", "worker threads"},
    {"--output-dir", "output.dir", "output directory"},
    {"--prefix", "output.prefix", "output file stem"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PT-symmetric spin-boson toolkit"};
  app.require_subcommand(1, 1);
  std::string config_path, preset;
  std::vector<std::string> sets;
  bool print_config = false;
  std::vector<std::string> flag_values(std::size(kFlags));

  for (const char* mode : {"bath", "spectrum", "dynamics", "validate"}) {
    auto* sub = app.add_subcommand(mode);
    sub->add_option("--config,-c", config_path, "key=value config file");
    sub->add_option("--preset,-p", preset, "named parameter set");
    sub->add_option("--set", sets, "override, as section.key=value (repeatable)");
    sub->add_flag("--print-config", print_config, "print the resolved configuration and exit");
    for (std::size_t i = 0; i < std::size(kFlags); ++i)
      sub->add_option(kFlags[i].name, flag_values[i], std::string(kFlags[i].help) + " (" + kFlags[i].key + ")");
  }
  app.add_flag_callback("--list-presets", [] {
    for (const auto& [name, p] : ptsb::presets()) std::cout << name << "  " << ptsb::to_string(p.mode) << "\n";
    std::exit(0);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ptsb::exit_config;
  }

  ptsb::ConfigSources src;
  const std::string mode = app.get_subcommands().front()->get_name();
  src.mode = mode == "bath"       ? ptsb::RunMode::bath
             : mode == "spectrum" ? ptsb::RunMode::spectrum
             : mode == "dynamics" ? ptsb::RunMode::dynamics
                                  : ptsb::RunMode::validate;
  src.preset = preset;
  src.file = config_path;
  src.environment = ptsb::environment_settings();
  src.overrides = sets;
  for (std::size_t i = 0; i < std::size(kFlags); ++i)
    if (!flag_values[i].empty()) src.overrides.push_back(std::string(kFlags[i].key) + "=" + flag_values[i]);

  ptsb::RunConfig cfg;
  try {
    cfg = ptsb::load_config(src);
  } catch (const ptsb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ptsb::exit_config;
  } catch (const ptsb::ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ptsb::exit_config;
  }
  if (print_config) {
    std::cout << ptsb::config_json(cfg).dump(2) << "\n";
    return 0;
  }
  try {
    return ptsb::run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
