#pragma once

// Static eigenproblem in the asymmetric displaced-oscillator ansatz
//   |psi> = |up> D(alpha)|0> + r |down> D(beta)|0>
// projected onto the displaced vacua and their one-phonon companions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptsb/errors.hpp"
#include "ptsb/model.hpp"

namespace ptsb {

struct ProjectionState {
  cplx r{1.0, 0.0};
  Eigen::VectorXcd alpha;
  Eigen::VectorXcd beta;
  cplx eta{1.0, 0.0};
  cplx E{0.0, 0.0};
};

/// log <D(alpha)0|D(beta)0> = -1/2 sum(|alpha|^2 + |beta|^2) + sum conj(alpha) beta.
inline cplx log_overlap(const Eigen::VectorXcd& alpha, const Eigen::VectorXcd& beta) {
  return -0.5 * (alpha.squaredNorm() + beta.squaredNorm()) + alpha.dot(beta);
}

inline cplx coherent_overlap(const Eigen::VectorXcd& alpha, const Eigen::VectorXcd& beta) {
  return std::exp(log_overlap(alpha, beta));
}

struct Displacements {
  Eigen::VectorXcd alpha;
  Eigen::VectorXcd beta;
};

/// Exact per-mode solve of the two displacement equations for given
/// A = delta eta r / 2 and B = delta conj(eta) / (2 r).
inline Displacements mode_displacements(cplx A, cplx B, const DiscreteBath& bath) {
  const auto M = static_cast<Eigen::Index>(bath.size());
  Displacements d{Eigen::VectorXcd(M), Eigen::VectorXcd(M)};
  for (Eigen::Index k = 0; k < M; ++k) {
    const double w = bath.modes[k].omega;
    const double g = bath.modes[k].g;
    const cplx den = w * (A + B + w);
    if (std::abs(den) < 1e-14) throw SingularModeError(static_cast<std::size_t>(k));
    d.alpha[k] = g * (A - B - w) / den;
    d.beta[k] = g * (A - B + w) / den;
  }
  return d;
}

enum class SolutionKind { ansatz, decoupled_up, decoupled_down };

inline const char* to_string(SolutionKind k) {
  switch (k) {
    case SolutionKind::ansatz: return "ansatz";
    case SolutionKind::decoupled_up: return "decoupled_up";
    case SolutionKind::decoupled_down: return "decoupled_down";
  }
  return "?";
}

struct ProjectionResiduals {
  cplx energy_up;            // E minus the up-projected energy
  cplx energy_down;          // E minus the down-projected energy
  double displacement_up = 0.0;    // max_k of the alpha equation
  double displacement_down = 0.0;  // max_k of the beta equation
  double overlap = 0.0;            // |eta - eta(alpha, beta)| / |eta|

  double max() const {
    return std::max({std::abs(energy_up), std::abs(energy_down), displacement_up, displacement_down, overlap});
  }
};

/// Re-evaluates all projected equations at `st`. For the decoupled kinds only
/// the equations of the occupied spin branch apply; the others are reported as 0.
inline ProjectionResiduals evaluate_residuals(const ModelParams& p, const DiscreteBath& bath,
                                              const ProjectionState& st,
                                              SolutionKind kind = SolutionKind::ansatz) {
  const auto M = static_cast<Eigen::Index>(bath.size());
  if (st.alpha.size() != M || st.beta.size() != M) throw ParameterError("state size does not match bath");
  const bool up = kind != SolutionKind::decoupled_down;
  const bool down = kind != SolutionKind::decoupled_up;
  if (kind == SolutionKind::ansatz && st.r == 0.0) throw ParameterError("evaluate_residuals: r = 0");
  if (kind != SolutionKind::ansatz && p.delta != 0.0)
    throw ParameterError("decoupled solutions exist only for delta = 0");

  const cplx b = p.bias_term();
  const cplx A = p.delta == 0.0 ? cplx{} : 0.5 * p.delta * st.eta * st.r;
  const cplx B = p.delta == 0.0 ? cplx{} : 0.5 * p.delta * std::conj(st.eta) / st.r;

  ProjectionResiduals res;
  cplx ea = -A + b, ec = -B - b;
  for (Eigen::Index k = 0; k < M; ++k) {
    const double w = bath.modes[k].omega, g = bath.modes[k].g;
    const cplx a = st.alpha[k], be = st.beta[k];
    ea += w * std::norm(a) + g * 2.0 * a.real();
    ec += w * std::norm(be) - g * 2.0 * be.real();
    if (up) res.displacement_up = std::max(res.displacement_up, std::abs(A * (a - be) + w * a + g));
    if (down) res.displacement_down = std::max(res.displacement_down, std::abs(B * (be - a) + w * be - g));
  }
  if (up) res.energy_up = st.E - ea;
  if (down) res.energy_down = st.E - ec;
  if (kind == SolutionKind::ansatz)
    res.overlap = std::abs(st.eta - coherent_overlap(st.alpha, st.beta)) / std::max(std::abs(st.eta), 1e-300);
  return res;
}

struct SolverOptions {
  double tol = 1e-10;  // on ProjectionResiduals::max()
  int max_iterations = 2000;
  double fd_step = 1e-7;
};

struct EigenSolution {
  ProjectionState state;
  ProjectionResiduals residuals;
  int iterations = 0;
  SolutionKind kind = SolutionKind::ansatz;
};

/// Exact Delta = 0 eigenstates: spin up (index 0) and spin down (index 1).
inline std::vector<EigenSolution> decoupled_solutions(const ModelParams& p, const DiscreteBath& bath) {
  p.validate();
  const auto M = static_cast<Eigen::Index>(bath.size());
  Eigen::VectorXcd shift(M);
  for (Eigen::Index k = 0; k < M; ++k) shift[k] = bath.modes[k].g / bath.modes[k].omega;
  const double reorg = bath.reorganization();
  const cplx b = p.bias_term();
  std::vector<EigenSolution> out(2);
  out[0].kind = SolutionKind::decoupled_up;
  out[0].state = {0.0, -shift, shift, coherent_overlap(-shift, shift), b - reorg};
  out[1].kind = SolutionKind::decoupled_down;
  out[1].state = {0.0, -shift, shift, coherent_overlap(-shift, shift), -b - reorg};
  for (auto& s : out) s.residuals = evaluate_residuals(p, bath, s.state, s.kind);
  return out;
}

namespace detail {

struct ProjectionEval {
  Displacements disp;
  cplx eta_new;
  cplx E_up;
  cplx E_down;
};

inline ProjectionEval projection_map(const ModelParams& p, const DiscreteBath& bath, cplx eta, cplx r) {
  if (r == 0.0 || !std::isfinite(r.real()) || !std::isfinite(r.imag()))
    throw NumericalError("projection_map: invalid r");
  const cplx A = 0.5 * p.delta * eta * r;
  const cplx B = 0.5 * p.delta * std::conj(eta) / r;
  ProjectionEval ev{mode_displacements(A, B, bath), {}, -A + p.bias_term(), -B - p.bias_term()};
  ev.eta_new = coherent_overlap(ev.disp.alpha, ev.disp.beta);
  for (std::size_t k = 0; k < bath.size(); ++k) {
    const double w = bath.modes[k].omega, g = bath.modes[k].g;
    const cplx a = ev.disp.alpha[k], be = ev.disp.beta[k];
    ev.E_up += w * std::norm(a) + 2.0 * g * a.real();
    ev.E_down += w * std::norm(be) - 2.0 * g * be.real();
  }
  return ev;
}

inline Eigen::Vector4d projection_defect(const ModelParams& p, const DiscreteBath& bath, const Eigen::Vector4d& x) {
  const auto ev = projection_map(p, bath, {x[0], x[1]}, {x[2], x[3]});
  const cplx f1 = ev.eta_new - cplx{x[0], x[1]};
  const cplx f2 = ev.E_up - ev.E_down;
  Eigen::Vector4d f{f1.real(), f1.imag(), f2.real(), f2.imag()};
  if (!f.allFinite()) throw NumericalError("projection_defect: non-finite");
  return f;
}

}  // namespace detail

/// Damped Newton (Levenberg-Marquardt) on the four real unknowns (eta, r).
/// For given (eta, r) the displacements are solved exactly per mode, leaving
/// the overlap consistency and the equality of the two projected energies.
inline EigenSolution solve_selfconsistent(const ModelParams& p, const DiscreteBath& bath,
                                          const ProjectionState& guess, const SolverOptions& opt = {}) {
  p.validate();
  if (p.delta == 0.0) {
    auto sols = decoupled_solutions(p, bath);
    return std::abs(guess.r) <= 1.0 ? sols[0] : sols[1];
  }
  if (guess.r == 0.0) throw ParameterError("solve_selfconsistent: guess has r = 0");
  if (!(opt.tol > 0.0)) throw ParameterError("solve_selfconsistent: tol must be > 0");

  auto F = [&](const Eigen::Vector4d& x) { return detail::projection_defect(p, bath, x); };
  auto safe_F = [&](const Eigen::Vector4d& x) -> std::optional<Eigen::Vector4d> {
    try {
      return F(x);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  Eigen::Vector4d x{guess.eta.real(), guess.eta.imag(), guess.r.real(), guess.r.imag()};
  Eigen::Vector4d f = F(x);
  const double polish = std::min(opt.tol, 1e-13);
  double mu = 1e-10;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (f.cwiseAbs().maxCoeff() <= polish) break;
    Eigen::Matrix4d J;
    for (int j = 0; j < 4; ++j) {
      Eigen::Vector4d xp = x, xm = x;
      xp[j] += opt.fd_step;
      xm[j] -= opt.fd_step;
      auto fp = safe_F(xp), fm = safe_F(xm);
      if (fp && fm)
        J.col(j) = (*fp - *fm) / (2 * opt.fd_step);
      else if (fp)
        J.col(j) = (*fp - f) / opt.fd_step;
      else if (fm)
        J.col(j) = (f - *fm) / opt.fd_step;
      else
        throw NumericalError("solve_selfconsistent: cannot evaluate Jacobian");
    }
    const Eigen::Matrix4d JtJ = J.transpose() * J;
    const Eigen::Vector4d g = J.transpose() * f;
    bool accepted = false;
    while (mu < 1e12) {
      const Eigen::Vector4d dx = -(JtJ + mu * Eigen::Matrix4d::Identity()).ldlt().solve(g);
      if (dx.allFinite()) {
        auto ft = safe_F(x + dx);
        if (ft && ft->norm() < f.norm()) {
          x += dx;
          f = *ft;
          mu = std::max(mu * 0.1, 1e-14);
          accepted = true;
          break;
        }
      }
      mu = std::max(mu * 10.0, 1e-8);
    }
    if (!accepted) break;  // no descent direction left
  }

  const cplx eta{x[0], x[1]}, r{x[2], x[3]};
  const auto ev = detail::projection_map(p, bath, eta, r);
  EigenSolution sol;
  sol.state = {r, ev.disp.alpha, ev.disp.beta, eta, ev.E_up};
  sol.iterations = it;
  sol.residuals = evaluate_residuals(p, bath, sol.state);
  if (!(sol.residuals.max() <= opt.tol))
    throw ConvergenceError("projection solver did not converge", it, sol.residuals.max());
  return sol;
}

inline std::optional<EigenSolution> try_solve(const ModelParams& p, const DiscreteBath& bath,
                                              const ProjectionState& guess, const SolverOptions& opt = {}) {
  try {
    return solve_selfconsistent(p, bath, guess, opt);
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

/// Initial guess from the bare two-level eigenvector, dressed with the
/// displacements at eta = 1. Branch 0 has the lower (Re, Im) bare energy.
inline ProjectionState qubit_seed(const ModelParams& p, const DiscreteBath& bath, int branch) {
  p.validate();
  if (p.delta == 0.0) throw ParameterError("qubit_seed needs delta > 0");
  const cplx b = p.bias_term();
  const cplx root = std::sqrt(b * b + 0.25 * p.delta * p.delta);
  cplx e0 = -root, e1 = root;
  if (e1.real() < e0.real() || (e1.real() == e0.real() && e1.imag() < e0.imag())) std::swap(e0, e1);
  const cplx E = branch == 0 ? e0 : e1;
  ProjectionState st;
  st.r = 2.0 * (b - E) / p.delta;
  if (st.r == 0.0) st.r = 1e-12;
  st.eta = 1.0;
  auto d = mode_displacements(0.5 * p.delta * st.r, 0.5 * p.delta / st.r, bath);
  st.alpha = std::move(d.alpha);
  st.beta = std::move(d.beta);
  st.E = E;
  return st;
}

/// Image of a solution under the combined parity / time-reversal map.
inline ProjectionState pt_partner(const ProjectionState& st) {
  ProjectionState out;
  out.alpha = -st.beta.conjugate();
  out.beta = -st.alpha.conjugate();
  out.r = 1.0 / std::conj(st.r);
  out.eta = st.eta;
  out.E = std::conj(st.E);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps and exceptional-point location

enum class SweepAxis { lambda, eps };

inline const char* to_string(SweepAxis a) { return a == SweepAxis::lambda ? "lambda" : "eps"; }

struct SweepProblem {
  ModelParams base;
  BathSpec bath = WilsonSpec{};
  SweepAxis axis = SweepAxis::lambda;
  SolverOptions solver;

  ModelParams at(double x) const {
    ModelParams p = base;
    (axis == SweepAxis::lambda ? p.lambda : p.eps) = x;
    return p;
  }
  DiscreteBath bath_at(double x) const { return make_bath(at(x), bath); }
};

struct BranchPoint {
  double x = 0.0;
  int branch = 0;
  cplx E{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  ProjectionState state;
};

struct SweepOptions {
  int branches = 1;      // 1: lowest branch (plus its partner once broken); 2: two lowest
  double delta_ep = 1e-6;
  std::vector<double> perturbations{0.05, 0.2, 0.5};
};

namespace detail {

inline BranchPoint make_point(double x, int branch, const EigenSolution& s) {
  return {x, branch, s.state.E, s.residuals.max(), true, s.iterations, s.state};
}

inline BranchPoint failed_point(double x, int branch) {
  BranchPoint p;
  p.x = x;
  p.branch = branch;
  return p;
}

/// Seeds tried when continuation from `st` fails: r scaled by (1 +- kappa).
inline std::vector<ProjectionState> perturbed_seeds(const ProjectionState& st, const std::vector<double>& kappas) {
  std::vector<ProjectionState> out;
  for (double k : kappas)
    for (double sgn : {1.0, -1.0}) {
      ProjectionState s = st;
      s.r *= 1.0 + sgn * k;
      out.push_back(std::move(s));
    }
  return out;
}

/// Converged complex solution with its polished partner, ordered (-Im, +Im).
inline std::optional<std::pair<EigenSolution, EigenSolution>> broken_pair(const ModelParams& p,
                                                                          const DiscreteBath& bath,
                                                                          const std::vector<ProjectionState>& seeds,
                                                                          const SolverOptions& opt, double delta_ep) {
  for (const auto& seed : seeds) {
    auto s = try_solve(p, bath, seed, opt);
    if (!s || std::abs(s->state.E.imag()) < delta_ep) continue;
    auto partner = try_solve(p, bath, pt_partner(s->state), opt);
    if (!partner) continue;
    if (s->state.E.imag() > 0) std::swap(*s, *partner);
    return std::make_pair(*s, *partner);
  }
  return std::nullopt;
}

}  // namespace detail

/// Continuation along `grid`. Points of all branches are returned ordered by
/// grid index, then branch. Once the tracked branch (or the two branches)
/// turn complex, branch 0 carries the -Im member and branch 1 the +Im member.
inline std::vector<BranchPoint> sweep(const SweepProblem& prob, const std::vector<double>& grid,
                                      const SweepOptions& opt = {},
                                      std::optional<std::vector<ProjectionState>> seeds = std::nullopt) {
  if (opt.branches != 1 && opt.branches != 2) throw ParameterError("sweep: branches must be 1 or 2");
  if (!std::is_sorted(grid.begin(), grid.end()) && !std::is_sorted(grid.rbegin(), grid.rend()))
    throw ParameterError("sweep: grid must be monotonic");
  std::vector<BranchPoint> out;
  if (grid.empty()) return out;

  std::vector<std::optional<ProjectionState>> cur(opt.branches);
  if (seeds)
    for (std::size_t b = 0; b < cur.size() && b < seeds->size(); ++b) cur[b] = (*seeds)[b];
  bool broken = false;
  std::optional<ProjectionState> complex_hint;

  for (double x : grid) {
    const ModelParams p = prob.at(x);
    const DiscreteBath bath = prob.bath_at(x);
    if (p.delta == 0.0) {
      const auto sols = decoupled_solutions(p, bath);
      for (int b = 0; b < opt.branches; ++b) out.push_back(detail::make_point(x, b, sols[b]));
      continue;
    }
    for (auto& c : cur)
      if (c && static_cast<std::size_t>(c->alpha.size()) != bath.size()) c.reset();

    if (!broken) {
      std::vector<std::optional<EigenSolution>> sol(opt.branches);
      bool went_complex = false;
      for (int b = 0; b < opt.branches; ++b) {
        std::vector<ProjectionState> tries;
        if (cur[b]) {
          tries.push_back(*cur[b]);
          for (auto& t : detail::perturbed_seeds(*cur[b], opt.perturbations)) tries.push_back(std::move(t));
        }
        tries.push_back(qubit_seed(p, bath, b));
        for (const auto& t : tries)
          if ((sol[b] = try_solve(p, bath, t, prob.solver))) break;
        if (sol[b] && std::abs(sol[b]->state.E.imag()) >= opt.delta_ep) {
          went_complex = true;
          complex_hint = sol[b]->state;
        }
        // Two branches collapsing onto the same real solution signal the coalescence.
        if (b == 1 && sol[0] && sol[1] && !went_complex &&
            std::abs(sol[0]->state.E - sol[1]->state.E) < 1e-7 && std::abs(sol[0]->state.r - sol[1]->state.r) < 1e-5)
          went_complex = true;
      }
      if (!went_complex) {
        for (int b = 0; b < opt.branches; ++b) {
          if (sol[b]) {
            out.push_back(detail::make_point(x, b, *sol[b]));
            cur[b] = sol[b]->state;
          } else {
            out.push_back(detail::failed_point(x, b));
          }
        }
        continue;
      }
      broken = true;
    }

    // Broken phase: continue the conjugate pair.
    std::vector<ProjectionState> seeds_here;
    if (complex_hint && static_cast<std::size_t>(complex_hint->alpha.size()) == bath.size())
      seeds_here.push_back(*complex_hint);
    for (auto& c : cur)
      if (c) {
        seeds_here.push_back(*c);
        for (auto& s : detail::perturbed_seeds(*c, opt.perturbations)) seeds_here.push_back(std::move(s));
      }
    for (int b = 0; b < 2; ++b) seeds_here.push_back(qubit_seed(p, bath, b));
    for (auto& s : detail::perturbed_seeds(qubit_seed(p, bath, 0), opt.perturbations)) seeds_here.push_back(s);
    complex_hint.reset();

    auto pair = detail::broken_pair(p, bath, seeds_here, prob.solver, opt.delta_ep);
    if (pair) {
      out.push_back(detail::make_point(x, 0, pair->first));
      out.push_back(detail::make_point(x, 1, pair->second));
      cur.assign(2, std::nullopt);
      cur[0] = pair->first.state;
      cur[1] = pair->second.state;
      complex_hint = pair->first.state;
    } else {
      out.push_back(detail::failed_point(x, 0));
      out.push_back(detail::failed_point(x, 1));
    }
  }
  return out;
}

struct EpEstimate {
  std::string parameter;
  bool found = false;
  double x_lo = std::numeric_limits<double>::quiet_NaN();
  double x_hi = std::numeric_limits<double>::quiet_NaN();
  double x_star = std::numeric_limits<double>::quiet_NaN();
  std::string mode = "imaginary-onset";
  int grid_index = -1;  // last grid point before the crossing
  int bisection_steps = 0;
  int flagged = 0;      // midpoints where no solution converged
  // Slopes of Re E on the branch-0 grid: last interval before the bracket,
  // the bracketing interval, the one after, and the largest change between
  // consecutive pre-bracket slopes.
  double slope_in = std::numeric_limits<double>::quiet_NaN();
  double slope_across = std::numeric_limits<double>::quiet_NaN();
  double slope_out = std::numeric_limits<double>::quiet_NaN();
  double slope_gap = std::numeric_limits<double>::quiet_NaN();
  double pre_variation = std::numeric_limits<double>::quiet_NaN();
};

struct EpOptions {
  double delta_ep = 1e-6;
  double relative_width = 1e-4;  // stop when bracket <= relative_width * grid span
  int max_bisections = 200;
};

/// Locates where |Im E| of branch 0 first reaches delta_ep, refines the
/// bracket by re-solving at midpoints, then places x* at the root of a linear
/// fit of (Im E)^2 just above the bracket.
inline EpEstimate detect_ep(const SweepProblem& prob, const std::vector<BranchPoint>& points,
                            const EpOptions& opt = {}) {
  EpEstimate ep;
  ep.parameter = to_string(prob.axis);
  std::vector<const BranchPoint*> pts;
  for (const auto& pt : points)
    if (pt.branch == 0 && pt.converged) pts.push_back(&pt);
  std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->x < b->x; });
  if (pts.size() < 2) return ep;
  const double span = pts.back()->x - pts.front()->x;

  std::size_t j1 = 0;
  while (j1 < pts.size() && std::abs(pts[j1]->E.imag()) < opt.delta_ep) ++j1;
  if (j1 == 0 || j1 == pts.size()) return ep;
  const std::size_t j = j1 - 1;
  ep.found = true;
  ep.grid_index = static_cast<int>(j);

  double lo = pts[j]->x, hi = pts[j1]->x;
  ProjectionState lo_state = pts[j]->state, hi_state = pts[j1]->state;
  cplx hi_E = pts[j1]->E;
  const SolverOptions& so = prob.solver;
  auto is_real = [&](const EigenSolution& s) { return std::abs(s.state.E.imag()) < opt.delta_ep; };

  while (hi - lo > opt.relative_width * span && ep.bisection_steps < opt.max_bisections) {
    ++ep.bisection_steps;
    const double mid = 0.5 * (lo + hi);
    const ModelParams p = prob.at(mid);
    const DiscreteBath bath = prob.bath_at(mid);
    auto s = try_solve(p, bath, lo_state, so);
    if (s && is_real(*s)) {
      lo = mid;
      lo_state = s->state;
      continue;
    }
    std::optional<EigenSolution> c;
    if (s && !is_real(*s)) c = s;
    if (!c) c = try_solve(p, bath, hi_state, so);
    if (c && !is_real(*c)) {
      hi = mid;
      hi_state = c->state;
      hi_E = c->state.E;
      continue;
    }
    if (c) {  // real solution reached from the broken side
      lo = mid;
      lo_state = c->state;
      continue;
    }
    hi = mid;
    ++ep.flagged;
  }
  ep.x_lo = lo;
  ep.x_hi = hi;
  ep.x_star = 0.5 * (lo + hi);

  // (Im E)^2 grows linearly past a square-root branch point.
  const double w = hi - lo;
  if (w > 0.0) {
    const double x2 = hi + w;
    auto s2 = try_solve(prob.at(x2), prob.bath_at(x2), hi_state, so);
    if (s2 && !is_real(*s2)) {
      const double f1 = hi_E.imag() * hi_E.imag();
      const double f2 = s2->state.E.imag() * s2->state.E.imag();
      if (f2 > f1) {
        const double root = hi - f1 * w / (f2 - f1);
        if (root >= lo && root <= hi) ep.x_star = root;
      }
    }
  }

  std::vector<double> slopes;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    slopes.push_back((pts[i + 1]->E.real() - pts[i]->E.real()) / (pts[i + 1]->x - pts[i]->x));
  if (j < slopes.size()) ep.slope_across = slopes[j];
  if (j >= 1) ep.slope_in = slopes[j - 1];
  if (j + 1 < slopes.size()) ep.slope_out = slopes[j + 1];
  if (j >= 1) {
    ep.slope_gap = std::abs(ep.slope_across - ep.slope_in);
    if (std::isfinite(ep.slope_out)) ep.slope_gap = std::max(ep.slope_gap, std::abs(ep.slope_out - ep.slope_in));
  }
  if (j >= 2) {
    ep.pre_variation = 0.0;
    for (std::size_t i = 0; i + 2 <= j; ++i)
      ep.pre_variation = std::max(ep.pre_variation, std::abs(slopes[i + 1] - slopes[i]));
  }
  return ep;
}

}  // namespace ptsb
