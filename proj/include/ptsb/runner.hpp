#pragma once

// Run orchestration: expands scans into jobs, runs them on a worker pool and
// writes one CSV plus one JSON sidecar per job.

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ptsb/config.hpp"
#include "ptsb/ed.hpp"
#include "ptsb/io.hpp"
#include "ptsb/projection.hpp"
#include "ptsb/tdvp.hpp"

namespace ptsb {

/// Runs fn(0..n-1) on up to `workers` threads. Rethrows the exception of the
/// lowest failing index after all workers finish.
template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Job {
  RunConfig cfg;
  std::string tag;  // empty for a single-job run
};

/// Cartesian product over the non-empty scan lists.
inline std::vector<Job> expand_jobs(const RunConfig& base) {
  std::vector<Job> jobs{{base, ""}};
  auto expand = [&jobs](const char* name, const auto& values, auto apply) {
    if (values.empty()) return;
    std::vector<Job> next;
    for (const auto& j : jobs)
      for (const auto& v : values) {
        Job k = j;
        apply(k.cfg, v);
        k.tag += (k.tag.empty() ? "" : "_") + std::string(name) + io::shortest(static_cast<double>(v));
        next.push_back(std::move(k));
      }
    jobs = std::move(next);
  };
  expand("M", base.scan_M, [](RunConfig& c, int m) { c.wilson.M = c.uniform.M = c.linear.M = m; });
  expand("delta", base.scan_delta, [](RunConfig& c, double d) { c.model.delta = d; });
  expand("lambda", base.scan_lambda, [](RunConfig& c, double l) { c.model.lambda = l; });
  expand("eps", base.scan_eps, [](RunConfig& c, double e) { c.model.eps = e; });
  return jobs;
}

inline SweepProblem sweep_problem(const RunConfig& c) {
  SweepProblem prob;
  prob.base = c.model;
  prob.bath = c.bath_spec();
  prob.axis = c.axis;
  prob.solver = c.solver;
  return prob;
}

inline nlohmann::json ep_json(const EpEstimate& ep) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"parameter", ep.parameter},       {"found", ep.found},
          {"x_lo", num(ep.x_lo)},             {"x_hi", num(ep.x_hi)},
          {"x_star", num(ep.x_star)},         {"mode", ep.mode},
          {"grid_index", ep.grid_index},      {"bisection_steps", ep.bisection_steps},
          {"flagged_midpoints", ep.flagged},  {"slope_in", num(ep.slope_in)},
          {"slope_across", num(ep.slope_across)}, {"slope_out", num(ep.slope_out)},
          {"slope_gap", num(ep.slope_gap)},   {"pre_variation", num(ep.pre_variation)}};
}

struct JobOutput {
  std::string csv;
  nlohmann::json meta;
  bool numerical_failure = false;
};

// ---------------------------------------------------------------------------

inline JobOutput run_bath(const RunConfig& c) {
  const DiscreteBath bath = make_bath(c.model, c.bath_spec());
  JobOutput out;
  std::ostringstream csv;
  csv << "n,omega,g\n";
  for (const auto& m : bath.modes) csv << m.n << ',' << io::g17(m.omega) << ',' << io::g17(m.g) << '\n';
  out.csv = csv.str();
  out.meta["bath"] = {{"scheme", to_string(bath.scheme)},
                      {"modes", bath.size()},
                      {"meta", bath.meta},
                      {"sum_g2", bath.couplings().squaredNorm()},
                      {"reorganization", bath.reorganization()}};
  const double tp = recurrence_time(bath);
  out.meta["bath"]["recurrence_time"] = std::isfinite(tp) ? nlohmann::json(tp) : nlohmann::json(nullptr);
  return out;
}

inline JobOutput run_spectrum(const RunConfig& c) {
  const SweepProblem prob = sweep_problem(c);
  SweepOptions so;
  so.branches = c.branches;
  so.delta_ep = c.ep.delta_ep;
  const auto points = sweep(prob, c.grid(), so);
  EpOptions eo = c.ep;
  const EpEstimate ep = detect_ep(prob, points, eo);

  JobOutput out;
  std::ostringstream csv;
  csv << "x,re_E,im_E,branch,residual,converged\n";
  int failed = 0;
  for (const auto& pt : points) {
    csv << io::shortest(pt.x) << ',' << io::shortest(pt.E.real()) << ',' << io::shortest(pt.E.imag()) << ','
        << pt.branch << ',' << io::shortest(pt.residual) << ',' << (pt.converged ? 1 : 0) << '\n';
    failed += pt.converged ? 0 : 1;
  }
  out.csv = csv.str();
  out.meta["ep"] = ep_json(ep);
  out.meta["unconverged_points"] = failed;
  out.numerical_failure = failed > 0;
  return out;
}

inline JobOutput run_dynamics(const RunConfig& c) {
  const DiscreteBath bath = make_bath(c.model, c.bath_spec());
  const auto traj = integrate(c.model, bath, initial_up_state(bath, c.floor), c.t_end, c.step);
  JobOutput out;
  std::ostringstream csv;
  csv << "t,s_z,n_b,log_norm,re_H_over_N,im_H_over_N,dnorm_residual\n";
  for (const auto& r : traj.rows)
    csv << io::shortest(r.t) << ',' << io::shortest(r.s_z) << ',' << io::shortest(r.n_b) << ','
        << io::shortest(r.log_norm) << ',' << io::shortest(r.re_H_over_N) << ',' << io::shortest(r.im_H_over_N)
        << ',' << io::shortest(r.dnorm_residual) << '\n';
  out.csv = csv.str();
  const double tp = traj.recurrence_time;
  out.meta["integrator"] = {{"method", "dopri5"},
                            {"status", to_string(traj.status)},
                            {"t_reached", traj.t_reached},
                            {"steps", traj.stats.steps},
                            {"rejected", traj.stats.rejected},
                            {"rhs_evals", traj.stats.rhs_evals},
                            {"rescalings", traj.rescalings},
                            {"overlap_underflows", traj.overlap_underflows}};
  out.meta["recurrence_time"] = std::isfinite(tp) ? nlohmann::json(tp) : nlohmann::json(nullptr);
  out.meta["beyond_recurrence"] = traj.beyond_recurrence;
  out.meta["regularization_floor"] = traj.floor;
  out.meta["norm_flow_deviation"] = traj.rows.size() >= 3 ? nlohmann::json(norm_flow_check(traj, c.model))
                                                            : nlohmann::json(nullptr);
  if (traj.beyond_recurrence)
    std::cerr << "warning: t_end " << c.t_end << " exceeds the recurrence time " << tp << "\n";
  out.numerical_failure = traj.status != IntegrationStatus::ok;
  return out;
}

/// ED and projection spectra on a common lambda grid.
struct ValidationData {
  std::vector<double> grid;
  std::vector<SpectrumResult> ed;
  std::vector<BranchPoint> projection;  // two per grid point, branch 0 first
  EpEstimate projection_ep;
  int ed_onset = -1;          // first grid index with |Im E0| >= delta_ep
  int projection_onset = -1;  // same for the projection branch 0
  double max_pre_ep_difference = 0.0;
  double max_projection_pair_defect = 0.0;  // |E1 - conj(E0)| after the onset
  double max_ed_pair_defect = 0.0;
  double max_pt_defect = 0.0;
  double max_ed_truncation_delta = 0.0;
  bool ed_all_converged = true;
};

inline FockTruncation ed_truncation(const RunConfig& c, const DiscreteBath& bath) {
  FockTruncation t = c.n_max > 0 ? FockTruncation::uniform(bath.size(), c.n_max) : default_truncation(bath).first;
  t.dimension_cap = c.dimension_cap;
  return t;
}

inline ValidationData run_validation(const RunConfig& c, int workers = 1) {
  ValidationData v;
  v.grid = c.grid();
  RunConfig lc = c;
  lc.axis = SweepAxis::lambda;
  const SweepProblem prob = sweep_problem(lc);
  SweepOptions so;
  so.branches = 2;
  so.delta_ep = c.ep.delta_ep;
  v.projection = sweep(prob, v.grid, so);
  v.projection_ep = detect_ep(prob, v.projection, c.ep);

  v.ed.resize(v.grid.size());
  parallel_for(v.grid.size(), workers, [&](std::size_t i) {
    const ModelParams p = prob.at(v.grid[i]);
    const DiscreteBath bath = prob.bath_at(v.grid[i]);
    EdOptions eo;
    eo.diag = c.diag;
    eo.increment = c.n_increment;
    eo.convergence_tol = c.ed_tol;
    eo.check_pt = true;
    try {
      v.ed[i] = ed_spectrum(p, bath, ed_truncation(c, bath), 2, eo);
    } catch (const NumericalError& e) {
      throw NumericalError("ED at lambda=" + io::shortest(v.grid[i]) + ": " + e.what());
    }
  });

  const double d = c.ep.delta_ep;
  for (std::size_t i = 0; i < v.grid.size(); ++i) {
    const auto& e = v.ed[i].eigenvalues;
    if (v.ed_onset < 0 && std::abs(e[0].imag()) >= d) v.ed_onset = static_cast<int>(i);
    const auto& p0 = v.projection[2 * i];
    if (v.projection_onset < 0 && p0.converged && std::abs(p0.E.imag()) >= d) v.projection_onset = static_cast<int>(i);
  }
  const std::size_t pre = std::min<std::size_t>(v.ed_onset < 0 ? v.grid.size() : v.ed_onset,
                                                v.projection_onset < 0 ? v.grid.size() : v.projection_onset);
  for (std::size_t i = 0; i < v.grid.size(); ++i) {
    const auto& e = v.ed[i].eigenvalues;
    const auto& p0 = v.projection[2 * i];
    const auto& p1 = v.projection[2 * i + 1];
    v.max_pt_defect = std::max(v.max_pt_defect, v.ed[i].pt_defect);
    v.max_ed_truncation_delta = std::max(v.max_ed_truncation_delta, v.ed[i].convergence_delta);
    v.ed_all_converged = v.ed_all_converged && v.ed[i].converged;
    if (std::abs(e[0].imag()) >= d) v.max_ed_pair_defect = std::max(v.max_ed_pair_defect, std::abs(e[1] - std::conj(e[0])));
    if (i < pre) {
      cplx a = p0.E, b = p1.E;
      if (b.real() < a.real()) std::swap(a, b);
      const double diff = (p0.converged && p1.converged) ? std::max(std::abs(a - e[0]), std::abs(b - e[1]))
                                                         : std::numeric_limits<double>::infinity();
      v.max_pre_ep_difference = std::max(v.max_pre_ep_difference, diff);
    } else if (v.projection_onset >= 0 && static_cast<int>(i) >= v.projection_onset) {
      const double pd = (p0.converged && p1.converged) ? std::abs(p1.E - std::conj(p0.E))
                                                       : std::numeric_limits<double>::infinity();
      v.max_projection_pair_defect = std::max(v.max_projection_pair_defect, pd);
    }
  }
  return v;
}

inline JobOutput run_validate(const RunConfig& c, int workers) {
  const ValidationData v = run_validation(c, workers);
  JobOutput out;
  std::ostringstream csv;
  csv << "lambda,re_E0,im_E0,re_E1,im_E1,source\n";
  auto row = [&csv](double x, cplx e0, cplx e1, const char* src) {
    csv << io::shortest(x) << ',' << io::shortest(e0.real()) << ',' << io::shortest(e0.imag()) << ','
        << io::shortest(e1.real()) << ',' << io::shortest(e1.imag()) << ',' << src << '\n';
  };
  for (std::size_t i = 0; i < v.grid.size(); ++i) {
    row(v.grid[i], v.ed[i].eigenvalues[0], v.ed[i].eigenvalues[1], "ed");
    row(v.grid[i], v.projection[2 * i].E, v.projection[2 * i + 1].E, "projection");
  }
  out.csv = csv.str();
  const auto& t = v.ed.front().truncation;
  out.meta["ed"] = {{"n_max", t.n_max},
                    {"dimension", t.dimension()},
                    {"method", v.ed.front().method},
                    {"max_truncation_delta", v.max_ed_truncation_delta},
                    {"all_converged", v.ed_all_converged},
                    {"max_pt_defect", v.max_pt_defect},
                    {"max_pair_defect", v.max_ed_pair_defect},
                    {"onset_index", v.ed_onset}};
  out.meta["projection"] = {{"ep", ep_json(v.projection_ep)},
                            {"onset_index", v.projection_onset},
                            {"max_pair_defect", v.max_projection_pair_defect}};
  out.meta["max_pre_ep_difference"] = v.max_pre_ep_difference;
  out.meta["same_ep_interval"] = v.ed_onset == v.projection_onset;
  return out;
}

// ---------------------------------------------------------------------------

enum ExitCode { exit_ok = 0, exit_config = 2, exit_numerical = 3 };

/// Runs every job of `cfg` and writes its artifacts. Returns the process exit code.
inline int run(const RunConfig& cfg, std::ostream& log = std::cout) {
  const auto jobs = expand_jobs(cfg);
  std::vector<JobOutput> outputs(jobs.size());
  const int inner = jobs.size() == 1 ? cfg.workers : 1;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
      const RunConfig& c = jobs[i].cfg;
      try {
        switch (c.mode) {
          case RunMode::bath: outputs[i] = run_bath(c); break;
          case RunMode::spectrum: outputs[i] = run_spectrum(c); break;
          case RunMode::dynamics: outputs[i] = run_dynamics(c); break;
          case RunMode::validate: outputs[i] = run_validate(c, inner); break;
        }
      } catch (const NumericalError& e) {
        throw NumericalError((jobs[i].tag.empty() ? "" : "[" + jobs[i].tag + "] ") + e.what());
      }
    });
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return exit_config;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  int code = exit_ok;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string stem = cfg.prefix + (jobs[i].tag.empty() ? "" : "_" + jobs[i].tag);
    const auto dir = std::filesystem::path(cfg.output_dir);
    nlohmann::json meta = outputs[i].meta;
    meta["config"] = config_json(jobs[i].cfg);
    meta["job"] = jobs[i].tag;
    meta["wall_seconds_total"] = seconds;
    if (jobs[i].cfg.scheme == Scheme::uniform)
      meta["spectral_cutoff"] = to_string(jobs[i].cfg.uniform.cutoff);
    io::atomic_write(dir / (stem + ".csv"), outputs[i].csv);
    io::atomic_write(dir / (stem + ".json"), meta.dump(2) + "\n");
    log << (dir / (stem + ".csv")).string() << "\n";
    if (outputs[i].numerical_failure) code = exit_numerical;
  }
  return code;
}

}  // namespace ptsb
