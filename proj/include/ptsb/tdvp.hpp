#pragma once

// Real-time variational dynamics of the trial state
//   |psi(t)> = l(t) |up> D(alpha(t))|0> + r(t) |down> D(beta(t))|0>.
// l and r are stored divided by exp(log_scale) so that exponential growth
// under gain never overflows.

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptsb/dopri5.hpp"
#include "ptsb/errors.hpp"
#include "ptsb/model.hpp"

namespace ptsb {

struct DynState {
  cplx l{1.0, 0.0};
  cplx r{0.0, 0.0};
  Eigen::VectorXcd alpha;
  Eigen::VectorXcd beta;
  double t = 0.0;
  double log_scale = 0.0;  // physical (l, r) = exp(log_scale) * stored (l, r)
};

/// Spin up, bath in the vacuum, with r lifted to `floor` so the equations stay regular.
inline DynState initial_up_state(const DiscreteBath& bath, double floor = 1e-8) {
  if (!(floor > 0.0)) throw ParameterError("initial_up_state: floor must be > 0");
  const auto M = static_cast<Eigen::Index>(bath.size());
  return {1.0, floor, Eigen::VectorXcd::Zero(M), Eigen::VectorXcd::Zero(M), 0.0, 0.0};
}

struct DynDerivative {
  cplx l_dot;
  cplx r_dot;
  Eigen::VectorXcd alpha_dot;
  Eigen::VectorXcd beta_dot;
  bool overlap_underflow = false;
};

/// eta = <D(alpha)0|D(beta)0>, evaluated from its logarithm; 0 when Re log < -700.
inline cplx overlap_clamped(const Eigen::VectorXcd& alpha, const Eigen::VectorXcd& beta, bool* underflow = nullptr) {
  const cplx le = -0.5 * (alpha.squaredNorm() + beta.squaredNorm()) + alpha.dot(beta);
  const bool under = le.real() < -700.0;
  if (underflow) *underflow = under;
  return under ? cplx{} : std::exp(le);
}

namespace detail {

/// Right-hand side on raw arrays: y = [l, r, alpha_0..M-1, beta_0..M-1].
inline bool eom_raw(const ModelParams& p, const DiscreteBath& bath, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
  const auto M = static_cast<Eigen::Index>(bath.size());
  const cplx l = y[0], r = y[1];
  const auto alpha = y.segment(2, M);
  const auto beta = y.segment(2 + M, M);
  bool under = false;
  const cplx le = -0.5 * (alpha.squaredNorm() + beta.squaredNorm()) + alpha.dot(beta);
  under = le.real() < -700.0;
  const cplx eta = under ? cplx{} : std::exp(le);
  const cplx b = p.bias_term();
  const double gain = b.imag();
  const cplx I{0.0, 1.0};
  const cplx ka = I * (0.5 * p.delta * r * eta / l);
  const cplx kb = I * (0.5 * p.delta * l * std::conj(eta) / r);

  dy.resize(y.size());
  double sa = 0.0, sb = 0.0, ea = 0.0, eb = 0.0;  // Im sum conj(a) a_dot, Im sum conj(b) b_dot, bath energies
  for (Eigen::Index k = 0; k < M; ++k) {
    const double w = bath.modes[k].omega, g = bath.modes[k].g;
    const cplx a = alpha[k], be = beta[k];
    const cplx ad = -I * (w * a + g) - gain * a - ka * (a - be);
    const cplx bd = -I * (w * be - g) + gain * be - kb * (be - a);
    dy[2 + k] = ad;
    dy[2 + M + k] = bd;
    sa += (std::conj(a) * ad).imag();
    sb += (std::conj(be) * bd).imag();
    ea += w * std::norm(a) + 2.0 * g * a.real();
    eb += w * std::norm(be) - 2.0 * g * be.real();
  }
  // -(i/2) sum(conj(a) a_dot - conj(a_dot) a) = Im sum conj(a) a_dot
  dy[0] = -I * (-0.5 * p.delta * eta * r + l * (b + sa + ea));
  dy[1] = -I * (-0.5 * p.delta * std::conj(eta) * l - r * (b - sb - eb));
  return under;
}

inline Eigen::VectorXcd pack(const DynState& s) {
  const auto M = s.alpha.size();
  Eigen::VectorXcd y(2 + 2 * M);
  y[0] = s.l;
  y[1] = s.r;
  y.segment(2, M) = s.alpha;
  y.segment(2 + M, M) = s.beta;
  return y;
}

inline DynState unpack(const Eigen::VectorXcd& y, double t, double log_scale) {
  const auto M = (y.size() - 2) / 2;
  return {y[0], y[1], y.segment(2, M), y.segment(2 + M, M), t, log_scale};
}

}  // namespace detail

/// Time derivatives of (l, r, alpha, beta) with the displacement derivatives
/// substituted into the amplitude equations.
inline DynDerivative eom_rhs(const ModelParams& p, const DiscreteBath& bath, const DynState& st) {
  if (st.l == 0.0 || st.r == 0.0) throw NumericalError("eom_rhs: l and r must be nonzero");
  if (static_cast<std::size_t>(st.alpha.size()) != bath.size() || st.beta.size() != st.alpha.size())
    throw ParameterError("eom_rhs: state size does not match bath");
  Eigen::VectorXcd dy;
  const bool under = detail::eom_raw(p, bath, detail::pack(st), dy);
  const auto M = st.alpha.size();
  return {dy[0], dy[1], dy.segment(2, M), dy.segment(2 + M, M), under};
}

/// <psi|H|psi> for the stored amplitudes (multiply by exp(2 log_scale) for the physical value).
inline cplx energy_expectation(const ModelParams& p, const DiscreteBath& bath, const DynState& st) {
  const cplx b = p.bias_term();
  double ea = 0.0, eb = 0.0;
  for (std::size_t k = 0; k < bath.size(); ++k) {
    const double w = bath.modes[k].omega, g = bath.modes[k].g;
    ea += w * std::norm(st.alpha[k]) + 2.0 * g * st.alpha[k].real();
    eb += w * std::norm(st.beta[k]) - 2.0 * g * st.beta[k].real();
  }
  const cplx eta = overlap_clamped(st.alpha, st.beta);
  return std::norm(st.l) * (b + ea) + std::norm(st.r) * (-b + eb) -
         0.5 * p.delta * (std::conj(st.l) * st.r * eta + std::conj(st.r) * st.l * std::conj(eta));
}

struct Observables {
  double s_z;
  double n_b;
  double log_norm;  // log(|l|^2 + |r|^2) including the scale factor
};

inline Observables observables(const DynState& st) {
  const double nl = std::norm(st.l), nr = std::norm(st.r), n = nl + nr;
  if (!(n > 0.0)) throw NumericalError("observables: vanishing norm");
  return {(nl - nr) / n, (nl * st.alpha.squaredNorm() + nr * st.beta.squaredNorm()) / n,
          std::log(n) + 2.0 * st.log_scale};
}

struct StepControl {
  double rtol = 1e-8;
  double atol = 1e-10;
  double dt_min = 1e-12;
  double dt_max = std::numeric_limits<double>::infinity();
  double sample_dt = 0.05;       // spacing of recorded rows
  double rescale_log_norm = 10;  // rescale (l, r) when |log N| of the stored pair exceeds this
};

struct TrajectoryRow {
  double t;
  double s_z;
  double n_b;
  double log_norm;
  double re_H_over_N;
  double im_H_over_N;
  double dnorm_residual;  // [dN/dt - eps_eff (|l|^2 - |r|^2)] / N from the equations of motion
};

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
  double sample_dt = 0.0;
  Dopri5Stats stats;
  IntegrationStatus status = IntegrationStatus::ok;
  double t_reached = 0.0;
  double recurrence_time = std::numeric_limits<double>::infinity();
  bool beyond_recurrence = false;
  long overlap_underflows = 0;
  long rescalings = 0;
  double floor = 0.0;  // |r(0)|
  DynState final_state;
};

inline TrajectoryRow make_row(const ModelParams& p, const DiscreteBath& bath, const DynState& st) {
  const Observables o = observables(st);
  const double n = std::norm(st.l) + std::norm(st.r);
  const cplx h = energy_expectation(p, bath, st) / n;
  Eigen::VectorXcd dy;
  detail::eom_raw(p, bath, detail::pack(st), dy);
  const double dn = 2.0 * (std::conj(st.l) * dy[0] + std::conj(st.r) * dy[1]).real();
  const double flow = p.gain_rate() * (std::norm(st.l) - std::norm(st.r));
  return {st.t, o.s_z, o.n_b, o.log_norm, h.real(), h.imag(), (dn - flow) / n};
}

inline TrajectoryRecord integrate(const ModelParams& p, const DiscreteBath& bath, const DynState& init, double t_end,
                                  const StepControl& ctl = {}) {
  p.validate();
  if (!(t_end >= init.t)) throw ParameterError("integrate: t_end must be >= initial time");
  if (!(ctl.sample_dt > 0.0)) throw ParameterError("integrate: sample_dt must be > 0");
  if (init.l == 0.0 || init.r == 0.0) throw ParameterError("integrate: l and r must be nonzero (use a floor)");

  TrajectoryRecord rec;
  rec.sample_dt = ctl.sample_dt;
  rec.recurrence_time = recurrence_time(bath);
  rec.beyond_recurrence = t_end >= rec.recurrence_time;
  rec.floor = std::abs(init.r);

  double log_scale = init.log_scale;
  Dopri5Options o;
  o.rtol = ctl.rtol;
  o.atol = ctl.atol;
  o.dt_min = ctl.dt_min;
  o.dt_max = ctl.dt_max;
  Dopri5 solver(
      [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        if (detail::eom_raw(p, bath, y, dy)) ++rec.overlap_underflows;
      },
      o);

  std::vector<double> samples;
  const auto n = static_cast<long>(std::floor((t_end - init.t) / ctl.sample_dt + 1e-9));
  for (long i = 0; i <= n; ++i) samples.push_back(init.t + i * ctl.sample_dt);
  if (t_end - samples.back() > 1e-9 * std::max(1.0, t_end)) samples.push_back(t_end);

  Eigen::VectorXcd y = detail::pack(init);
  double t = init.t;
  rec.rows.reserve(samples.size());
  rec.status = solver.run(
      t, y, t_end, samples,
      [&](double ts, const Eigen::VectorXcd& ys) {
        rec.rows.push_back(make_row(p, bath, detail::unpack(ys, ts, log_scale)));
      },
      [&](double, Eigen::VectorXcd& ys) {
        const double ln = std::log(std::norm(ys[0]) + std::norm(ys[1]));
        if (std::abs(ln) <= ctl.rescale_log_norm) return false;
        ys[0] *= std::exp(-0.5 * ln);
        ys[1] *= std::exp(-0.5 * ln);
        log_scale += 0.5 * ln;
        ++rec.rescalings;
        return true;
      });
  rec.stats = solver.stats();
  rec.t_reached = t;
  rec.final_state = detail::unpack(y, t, log_scale);
  return rec;
}

/// Largest deviation of the sampled dN/dt (central differences) from
/// eps_eff (|l|^2 - |r|^2), relative to max N over the trajectory.
inline double norm_flow_check(const TrajectoryRecord& traj, const ModelParams& p) {
  const auto& rows = traj.rows;
  if (rows.size() < 3) throw ParameterError("norm_flow_check: need at least 3 samples");
  double ln_max = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) ln_max = std::max(ln_max, r.log_norm);
  auto N = [&](std::size_t i) { return std::exp(rows[i].log_norm - ln_max); };
  double dev = 0.0;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double dndt = (N(i + 1) - N(i - 1)) / (rows[i + 1].t - rows[i - 1].t);
    dev = std::max(dev, std::abs(dndt - p.gain_rate() * rows[i].s_z * N(i)));
  }
  return dev;  // N is already relative to its maximum
}

}  // namespace ptsb
