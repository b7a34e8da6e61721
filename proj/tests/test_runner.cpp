#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "ptsb/config.hpp"
#include "ptsb/runner.hpp"

using namespace ptsb;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("ptsb_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string config_error_key(const ConfigSources& src) {
  try {
    load_config(src);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PTSB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, MinimalSpectrumFileGetsWilsonDefaults) {
  const auto dir = scratch_dir("minimal");
  write_file(dir / "run.cfg", "[model]\ndelta = 0.3\neps = 0.1\n[sweep]\naxis = lambda\n");
  ConfigSources src;
  src.mode = RunMode::spectrum;
  src.file = (dir / "run.cfg").string();
  const auto cfg = load_config(src);
  EXPECT_EQ(cfg.scheme, Scheme::wilson);
  EXPECT_EQ(cfg.wilson.Lambda, 1.2);
  EXPECT_EQ(cfg.wilson.M, 80);
  EXPECT_EQ(cfg.model.delta, 0.3);
  EXPECT_EQ(cfg.axis, SweepAxis::lambda);
}

TEST(Config, EmptyDynamicsConfigDefaults) {
  const auto dir = scratch_dir("empty");
  write_file(dir / "empty.cfg", "# nothing here\n\n");
  ConfigSources src;
  src.mode = RunMode::dynamics;
  src.file = (dir / "empty.cfg").string();
  const auto cfg = load_config(src);
  EXPECT_EQ(cfg.model.delta, 0.1);
  EXPECT_EQ(cfg.model.lambda, 0.01);
  EXPECT_EQ(cfg.model.eps, 0.05);
  EXPECT_EQ(cfg.scheme, Scheme::uniform);
  EXPECT_EQ(cfg.uniform.M, 2000);
  EXPECT_EQ(cfg.uniform.omega_max, 4.0);
  EXPECT_EQ(cfg.uniform.cutoff, Cutoff::exponential);
  EXPECT_EQ(cfg.t_end, 200.0);
}

TEST(Config, RangeErrorsNameTheKey) {
  ConfigSources src;
  src.overrides = {"model.lambda=-0.1"};
  EXPECT_EQ(config_error_key(src), "model.lambda");
  src.overrides = {"bath.Lambda=1"};
  EXPECT_EQ(config_error_key(src), "bath.Lambda");
  src.overrides = {"sweep.branches=3"};
  EXPECT_EQ(config_error_key(src), "sweep.branches");
}

TEST(Config, UnknownKeyAndTypeMismatch) {
  ConfigSources src;
  src.overrides = {"model.gamma=1"};
  EXPECT_EQ(config_error_key(src), "model.gamma");
  src.overrides = {"model.delta=abc"};
  EXPECT_EQ(config_error_key(src), "model.delta");
  src.overrides = {"sweep.count=2.5"};
  EXPECT_EQ(config_error_key(src), "sweep.count");
  src.overrides = {"model.bias=complex"};
  EXPECT_EQ(config_error_key(src), "model.bias");
}

TEST(Config, UnknownKeyInFile) {
  const auto dir = scratch_dir("unknown");
  write_file(dir / "bad.cfg", "[model]\ndelta = 0.3\ncoupling = 0.2\n");
  ConfigSources src;
  src.file = (dir / "bad.cfg").string();
  EXPECT_EQ(config_error_key(src), "model.coupling");
}

TEST(Config, ParsesSectionsAndComments) {
  const auto kv = parse_config_text("top.key = 1 ; trailing\n[model]\n  delta=0.25 # note\n\n[bath]\nM = 12\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0].first, "top.key");
  EXPECT_EQ(kv[1].first, "model.delta");
  EXPECT_EQ(config_detail::trim(kv[1].second), "0.25");
  EXPECT_EQ(kv[2].first, "bath.M");
  EXPECT_THROW(parse_config_text("[model\n"), ConfigError);
  EXPECT_THROW(parse_config_text("delta 0.3\n"), ConfigError);
}

TEST(Config, LayeringOrder) {
  const auto dir = scratch_dir("layers");
  write_file(dir / "f.cfg", "[model]\neps = 0.2\nlambda = 0.4\n[run]\nworkers = 3\n");
  ConfigSources src;
  src.mode = RunMode::spectrum;
  src.preset = "fig2b";
  src.file = (dir / "f.cfg").string();
  src.environment = {{"run.workers", "5"}, {"output.dir", "/tmp/x"}};
  src.overrides = {"model.lambda=0.6"};
  const auto cfg = load_config(src);
  EXPECT_EQ(cfg.model.delta, 0.1);   // preset
  EXPECT_EQ(cfg.model.eps, 0.2);     // file
  EXPECT_EQ(cfg.workers, 5);         // environment over file
  EXPECT_EQ(cfg.output_dir, "/tmp/x");
  EXPECT_EQ(cfg.model.lambda, 0.6);  // command line over everything
  EXPECT_EQ(cfg.prefix, "fig2b");
}

TEST(Config, EnvironmentVariables) {
  ::setenv("PTSB_WORKERS", "4", 1);
  ::setenv("PTSB_OUTPUT_DIR", "/tmp/ptsb_env", 1);
  const auto env = environment_settings();
  ::unsetenv("PTSB_WORKERS");
  ::unsetenv("PTSB_OUTPUT_DIR");
  ASSERT_EQ(env.size(), 2u);
  EXPECT_EQ(env[0], (std::pair<std::string, std::string>{"run.workers", "4"}));
  EXPECT_EQ(env[1], (std::pair<std::string, std::string>{"output.dir", "/tmp/ptsb_env"}));
}

TEST(Config, PresetsResolve) {
  for (const auto& [name, preset] : presets()) {
    ConfigSources src;
    src.mode = preset.mode;
    src.preset = name;
    EXPECT_NO_THROW(load_config(src)) << name;
  }
  ConfigSources src;
  src.mode = RunMode::validate;
  src.preset = "fig5";
  auto cfg = load_config(src);
  EXPECT_EQ(cfg.model.delta, 0.5);
  EXPECT_EQ(cfg.model.eps, 0.1);
  EXPECT_EQ(cfg.scheme, Scheme::single_mode);
  EXPECT_EQ(cfg.single.omega_0, 1.0);
  EXPECT_EQ(cfg.count, 50);
  src.preset = "fig6";
  cfg = load_config(src);
  EXPECT_EQ(cfg.scan_M, (std::vector<int>{3, 5}));
  EXPECT_EQ(cfg.scheme, Scheme::linear_finite);
  EXPECT_EQ(cfg.linear.omega_1, 1.0);
  EXPECT_EQ(cfg.linear.omega_M, 1.4);
  src.mode = RunMode::spectrum;
  src.preset = "fig2a";
  cfg = load_config(src);
  EXPECT_EQ(cfg.model.delta, 0.1);
  EXPECT_EQ(cfg.model.lambda, 0.01);
  EXPECT_EQ(cfg.axis, SweepAxis::eps);
}

TEST(Config, PresetModeMismatchAndUnknown) {
  ConfigSources src;
  src.mode = RunMode::dynamics;
  src.preset = "fig5";
  EXPECT_EQ(config_error_key(src), "preset");
  src.preset = "nope";
  EXPECT_EQ(config_error_key(src), "preset");
}

TEST(Config, ResolvedConfigEchoesEveryKey) {
  const auto j = config_json(load_config({}));
  for (const auto& [key, field] : config_detail::fields()) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["mode"], "spectrum");
}

TEST(Runner, ExpandJobsCartesian) {
  RunConfig c = mode_defaults(RunMode::dynamics);
  c.scan_M = {100, 200};
  c.scan_eps = {0.05, 0.1};
  const auto jobs = expand_jobs(c);
  ASSERT_EQ(jobs.size(), 4u);
  EXPECT_EQ(jobs[0].tag, "M100_eps0.05");
  EXPECT_EQ(jobs[3].tag, "M200_eps0.1");
  EXPECT_EQ(jobs[3].cfg.uniform.M, 200);
  EXPECT_EQ(jobs[3].cfg.model.eps, 0.1);
  EXPECT_EQ(expand_jobs(mode_defaults(RunMode::spectrum)).size(), 1u);
}

TEST(Runner, ParallelForRethrowsLowestIndex) {
  std::vector<int> hits(20, 0);
  try {
    parallel_for(20, 4, [&](std::size_t i) {
      hits[i] = 1;
      if (i == 7 || i == 13) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 7");
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Runner, SpectrumOutputIsDeterministic) {
  const auto dir = scratch_dir("determinism");
  ConfigSources src;
  src.preset = "fig2a";
  src.overrides = {"output.dir=" + dir.string(), "output.prefix=a"};
  std::ostringstream log;
  ASSERT_EQ(run(load_config(src), log), exit_ok);
  src.overrides = {"output.dir=" + dir.string(), "output.prefix=b", "run.workers=2"};
  ASSERT_EQ(run(load_config(src), log), exit_ok);
  const std::string a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), "x,re_E,im_E,branch,residual,converged");
  const auto meta = nlohmann::json::parse(slurp(dir / "a.json"));
  EXPECT_TRUE(meta["ep"]["found"].get<bool>());
  EXPECT_EQ(meta["config"]["model.delta"], 0.1);
}

TEST(Runner, ScanDeterministicAcrossWorkerCounts) {
  const auto dir = scratch_dir("scan");
  ConfigSources src;
  src.mode = RunMode::dynamics;
  src.overrides = {"output.dir=" + dir.string(), "output.prefix=w1", "bath.M=100", "dynamics.t_end=20",
                   "scan.eps=0.05,0.3"};
  std::ostringstream log;
  ASSERT_EQ(run(load_config(src), log), exit_ok);
  src.overrides[1] = "output.prefix=w2";
  src.overrides.push_back("run.workers=2");
  ASSERT_EQ(run(load_config(src), log), exit_ok);
  for (const char* tag : {"_eps0.05.csv", "_eps0.3.csv"})
    EXPECT_EQ(slurp(dir / (std::string("w1") + tag)), slurp(dir / (std::string("w2") + tag)));
  const auto meta = nlohmann::json::parse(slurp(dir / "w1_eps0.05.json"));
  EXPECT_EQ(meta["spectral_cutoff"], "exponential");
  EXPECT_EQ(meta["regularization_floor"], 1e-8);
  EXPECT_EQ(meta["integrator"]["status"], "ok");
}

TEST(Runner, BathDumpFullPrecision) {
  const auto dir = scratch_dir("bath");
  ConfigSources src;
  src.mode = RunMode::bath;
  src.overrides = {"output.dir=" + dir.string(), "bath.M=80"};
  std::ostringstream log;
  ASSERT_EQ(run(load_config(src), log), exit_ok);
  std::istringstream csv(slurp(dir / "bath.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "n,omega,g");
  std::getline(csv, line);
  std::vector<std::string> cells;
  for (std::stringstream ss(line); std::getline(ss, line, ',');) cells.push_back(line);
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_EQ(cells[0], "80");
  const auto bath = discretize_wilson(load_config(src).model, 1.2, 80);
  EXPECT_EQ(std::stod(cells[1]), bath.modes[0].omega);
  EXPECT_EQ(std::stod(cells[2]), bath.modes[0].g);
}

TEST(Runner, UnconvergedSpectrumReportsNumericalFailure) {
  const auto dir = scratch_dir("unconverged");
  ConfigSources src;
  src.overrides = {"output.dir=" + dir.string(), "sweep.max_iterations=1", "sweep.count=5", "sweep.max=0.5"};
  std::ostringstream log;
  EXPECT_EQ(run(load_config(src), log), exit_numerical);
  EXPECT_TRUE(fs::exists(dir / "spectrum.csv"));
}

TEST(Io, ShortestRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) EXPECT_EQ(std::stod(io::shortest(v)), v);
  EXPECT_EQ(io::shortest(0.1), "0.1");
  EXPECT_EQ(io::shortest(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(io::g17(0.1), "0.10000000000000001");
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
  const auto dir = scratch_dir("atomic");
  io::atomic_write(dir / "sub" / "out.csv", "a,b\n1,2\n");
  EXPECT_EQ(slurp(dir / "sub" / "out.csv"), "a,b\n1,2\n");
  io::atomic_write(dir / "sub" / "out.csv", "replaced\n");
  EXPECT_EQ(slurp(dir / "sub" / "out.csv"), "replaced\n");
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir / "sub")) n += e.is_regular_file() ? 1 : 0;
  EXPECT_EQ(n, 1u);
}

TEST(Io, FailedRenameKeepsTargetIntact) {
  const auto dir = scratch_dir("atomic_fail");
  fs::create_directories(dir / "target.csv" / "child");
  EXPECT_THROW(io::atomic_write(dir / "target.csv", "data"), std::runtime_error);
  EXPECT_TRUE(fs::is_directory(dir / "target.csv"));
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file() ? 1 : 0;
  EXPECT_EQ(n, 0u);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  const std::string out = " --output-dir " + dir.string();
  EXPECT_EQ(run_cli("bath --M 10" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "bath.csv"));
  EXPECT_EQ(run_cli("spectrum --set model.gamma=1" + out), 2);
  EXPECT_EQ(run_cli("spectrum --lambda -0.1" + out), 2);
  EXPECT_EQ(run_cli("spectrum --preset nope" + out), 2);
  EXPECT_EQ(run_cli("spectrum --no-such-flag"), 2);
  EXPECT_EQ(run_cli("spectrum --config /nonexistent/file.cfg"), 2);
  EXPECT_EQ(run_cli("dynamics --M 20 --t-end 50 --set dynamics.dt_min=10" + out), 3);
  EXPECT_EQ(run_cli("spectrum --preset fig2a --print-config"), 0);
}

TEST(Cli, EnvironmentOverridesOutputDir) {
  const auto dir = scratch_dir("cli_env");
  const std::string cmd = "PTSB_OUTPUT_DIR=" + dir.string() + " " + PTSB_CLI_PATH + " bath --M 5 >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "bath.csv"));
  EXPECT_TRUE(fs::exists(dir / "bath.json"));
}
