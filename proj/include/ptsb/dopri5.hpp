#pragma once

// Dormand-Prince 5(4) with the standard fourth-order continuous extension,
// for complex state vectors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace ptsb {

struct Dopri5Options {
  double rtol = 1e-8;
  double atol = 1e-10;
  double dt_min = 1e-12;
  double dt_max = std::numeric_limits<double>::infinity();
  double dt_init = 0.0;  // 0: automatic first-step guess
  long max_steps = 50'000'000;
};

struct Dopri5Stats {
  long steps = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

enum class IntegrationStatus { ok, step_underflow, non_finite, max_steps };

inline const char* to_string(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::ok: return "ok";
    case IntegrationStatus::step_underflow: return "step_underflow";
    case IntegrationStatus::non_finite: return "non_finite";
    case IntegrationStatus::max_steps: return "max_steps";
  }
  return "?";
}

class Dopri5 {
 public:
  using Vec = Eigen::VectorXcd;
  using Rhs = std::function<void(double, const Vec&, Vec&)>;
  /// Called for each sample time with the interpolated state.
  using Sampler = std::function<void(double, const Vec&)>;
  /// Called after each accepted step; may modify y (returns true if it did).
  using StepHook = std::function<bool(double, Vec&)>;

  Dopri5(Rhs f, Dopri5Options opt = {}) : f_(std::move(f)), opt_(opt) {}

  const Dopri5Stats& stats() const { return stats_; }

  /// Integrates y from t0 to t_end, reporting at each entry of `samples`
  /// (ascending, inside [t0, t_end]). On return y holds the last accepted state
  /// and t the time reached.
  IntegrationStatus run(double& t, Vec& y, double t_end, const std::vector<double>& samples, const Sampler& sample,
                        const StepHook& hook = {}) {
    std::size_t next = 0;
    while (next < samples.size() && samples[next] <= t) sample(samples[next++], y);
    if (t >= t_end) return IntegrationStatus::ok;

    Vec k1(y.size());
    eval(t, y, k1);
    if (!k1.allFinite()) return IntegrationStatus::non_finite;
    double h = opt_.dt_init > 0 ? opt_.dt_init : initial_step(t, y, k1);
    Vec k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()), k6(y.size()), k7(y.size());
    Vec ytmp(y.size()), ynew(y.size()), err(y.size());

    while (t < t_end) {
      if (stats_.steps + stats_.rejected >= opt_.max_steps) return IntegrationStatus::max_steps;
      h = std::min({h, opt_.dt_max, t_end - t});
      if (h < opt_.dt_min && t_end - t > opt_.dt_min) return IntegrationStatus::step_underflow;

      ytmp = y + h * (a21 * k1);
      eval(t + c2 * h, ytmp, k2);
      ytmp = y + h * (a31 * k1 + a32 * k2);
      eval(t + c3 * h, ytmp, k3);
      ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      eval(t + c4 * h, ytmp, k4);
      ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      eval(t + c5 * h, ytmp, k5);
      ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      eval(t + h, ytmp, k6);
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      eval(t + h, ynew, k7);
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double en = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        en = std::max(en, std::abs(err[i]) / sc);
      }
      if (!std::isfinite(en)) {
        ++stats_.rejected;
        h *= 0.2;
        if (h < opt_.dt_min) return IntegrationStatus::non_finite;
        continue;
      }
      if (en > 1.0) {
        ++stats_.rejected;
        h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
        continue;
      }

      ++stats_.steps;
      const double t_new = t + h;
      while (next < samples.size() && samples[next] <= t_new) {
        const double theta = (samples[next] - t) / h;
        sample(samples[next++], interpolate(y, h, theta, k1, k3, k4, k5, k6, k7));
      }
      t = t_new;
      y.swap(ynew);
      if (hook && hook(t, y)) {
        eval(t, y, k1);
      } else {
        k1.swap(k7);
      }
      if (!y.allFinite()) return IntegrationStatus::non_finite;
      h *= en == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 10.0);
    }
    while (next < samples.size() && samples[next] <= t + 1e-12 * std::max(1.0, std::abs(t)))
      sample(samples[next++], y);
    return IntegrationStatus::ok;
  }

 private:
  void eval(double t, const Vec& y, Vec& dy) {
    ++stats_.rhs_evals;
    f_(t, y, dy);
  }

  double initial_step(double t, const Vec& y, const Vec& f0) {
    auto scaled_norm = [&](const Vec& v) {
      double m = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        m = std::max(m, std::abs(v[i]) / (opt_.atol + opt_.rtol * std::abs(y[i])));
      return m;
    };
    const double d0 = scaled_norm(y), d1 = scaled_norm(f0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    Vec y1 = y + h0 * f0, f1(y.size());
    eval(t + h0, y1, f1);
    const double d2 = scaled_norm(f1 - f0) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    return std::max(std::min(100 * h0, h1), opt_.dt_min);
  }

  static Vec interpolate(const Vec& y, double h, double th, const Vec& k1, const Vec& k3, const Vec& k4,
                         const Vec& k5, const Vec& k6, const Vec& k7) {
    auto poly = [th](const double* p) { return th * (p[0] + th * (p[1] + th * (p[2] + th * p[3]))); };
    return y + h * (poly(P1) * k1 + poly(P3) * k3 + poly(P4) * k4 + poly(P5) * k5 + poly(P6) * k6 + poly(P7) * k7);
  }

  Rhs f_;
  Dopri5Options opt_;
  Dopri5Stats stats_;

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = -71.0 / 57600, e3 = 71.0 / 16695, e4 = -71.0 / 1920, e5 = 17253.0 / 339200,
                          e6 = -22.0 / 525, e7 = 1.0 / 40;
  // Dense-output polynomial coefficients of theta, theta^2, theta^3, theta^4 per stage.
  static constexpr double P1[4] = {1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608,
                                   -12715105075.0 / 11282082432};
  static constexpr double P3[4] = {0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933,
                                   87487479700.0 / 32700410799};
  static constexpr double P4[4] = {0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304,
                                   -10690763975.0 / 1880347072};
  static constexpr double P5[4] = {0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408,
                                   701980252875.0 / 199316789632};
  static constexpr double P6[4] = {0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883,
                                   -1453857185.0 / 822651844};
  static constexpr double P7[4] = {0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423};
};

}  // namespace ptsb
