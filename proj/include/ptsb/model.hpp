#pragma once

// Model parameters, Ohmic spectral density and bath discretization schemes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ptsb/errors.hpp"

namespace ptsb {

using cplx = std::complex<double>;
using namespace std::complex_literals;

enum class BiasKind { imaginary, real };
enum class Cutoff { hard, exponential };

inline const char* to_string(BiasKind b) { return b == BiasKind::imaginary ? "imaginary" : "real"; }
inline const char* to_string(Cutoff c) { return c == Cutoff::hard ? "hard" : "exponential"; }

/// Qubit + bath parameters. Energies in units of omega_c unless stated.
struct ModelParams {
  double delta = 0.1;    // tunneling amplitude
  double eps = 0.0;      // bias magnitude
  BiasKind bias = BiasKind::imaginary;
  double s = 1.0;        // bath exponent
  double omega_c = 1.0;  // cutoff frequency
  double lambda = 0.0;   // dimensionless coupling

  /// Checks the fields that enter the bath discretization.
  void validate_bath() const {
    if (!(s > 0.0)) throw ParameterError("s must be > 0");
    if (!(omega_c > 0.0)) throw ParameterError("omega_c must be > 0");
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
  }

  /// delta = 0 is accepted as the decoupled limit; solvers treat it separately.
  void validate() const {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ParameterError("delta must be >= 0");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ParameterError("eps must be >= 0");
    validate_bath();
  }

  /// Coefficient b of the bias term b * sigma_z: i eps/2 or eps/2.
  cplx bias_term() const { return bias == BiasKind::imaginary ? cplx(0.0, eps / 2) : cplx(eps / 2, 0.0); }

  /// Rate eps_eff in dN/dt = eps_eff (|l|^2 - |r|^2); zero for a Hermitian bias.
  double gain_rate() const { return bias == BiasKind::imaginary ? eps : 0.0; }
};

enum class Scheme { wilson, uniform, linear_finite, single_mode };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::wilson: return "wilson";
    case Scheme::uniform: return "uniform";
    case Scheme::linear_finite: return "linear_finite";
    case Scheme::single_mode: return "single_mode";
  }
  return "?";
}

struct Mode {
  int n;         // scheme-native index (Wilson interval n, grid index k, ...)
  double omega;
  double g;
};

/// Finite set of bath modes, sorted by ascending frequency.
struct DiscreteBath {
  std::vector<Mode> modes;
  Scheme scheme = Scheme::single_mode;
  std::map<std::string, double> meta;

  std::size_t size() const { return modes.size(); }

  Eigen::VectorXd omegas() const {
    Eigen::VectorXd w(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) w[k] = modes[k].omega;
    return w;
  }
  Eigen::VectorXd couplings() const {
    Eigen::VectorXd g(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) g[k] = modes[k].g;
    return g;
  }

  /// sum_k g_k^2 / omega_k, the static polaron shift.
  double reorganization() const {
    double sum = 0.0;
    for (const auto& m : modes) sum += m.g * m.g / m.omega;
    return sum;
  }
};

// ---------------------------------------------------------------------------

inline double spectral_density(double omega, const ModelParams& p, Cutoff cutoff = Cutoff::hard) {
  if (!(omega > 0.0)) throw std::domain_error("spectral_density: omega must be > 0");
  const double amp = 0.5 * p.lambda * std::pow(p.omega_c, 1.0 - p.s) * std::pow(omega, p.s);
  if (cutoff == Cutoff::exponential) return amp * std::exp(-omega / p.omega_c);
  return omega < p.omega_c ? amp : 0.0;
}

namespace detail {
inline void sort_modes(DiscreteBath& bath) {
  std::sort(bath.modes.begin(), bath.modes.end(),
            [](const Mode& a, const Mode& b) { return a.omega < b.omega; });
}
}  // namespace detail

/// Logarithmic discretization of the hard-cutoff density. Interval n covers
/// [omega_c Lambda^-(n+1), omega_c Lambda^-n]; modes n = first_index .. first_index+M-1.
/// first_index = 1 reproduces the mode set H_D as usually written (top interval
/// omitted); first_index = 0 includes [omega_c/Lambda, omega_c].
inline DiscreteBath discretize_wilson(const ModelParams& p, double Lambda, int M, int first_index = 1) {
  p.validate_bath();
  if (!(Lambda > 1.0)) throw ParameterError("Wilson Lambda must be > 1");
  if (M < 1) throw ParameterError("Wilson M must be >= 1");
  if (first_index < 0) throw ParameterError("Wilson first_index must be >= 0");
  const double s = p.s;
  const double g_pref = 0.5 * p.lambda * p.omega_c * p.omega_c * (1.0 - std::pow(Lambda, -(s + 1))) / (s + 1);
  const double w_pref = (s + 1) / (s + 2) * (1.0 - std::pow(Lambda, -(s + 2))) /
                        (1.0 - std::pow(Lambda, -(s + 1))) * p.omega_c;
  DiscreteBath bath;
  bath.scheme = Scheme::wilson;
  bath.modes.reserve(M);
  for (int i = 0; i < M; ++i) {
    const int n = first_index + i;
    const double g2 = g_pref * std::pow(Lambda, -n * (s + 1));
    bath.modes.push_back({n, w_pref * std::pow(Lambda, -n), std::sqrt(g2)});
  }
  detail::sort_modes(bath);
  bath.meta = {{"Lambda", Lambda}, {"M", M}, {"first_index", first_index}};
  return bath;
}

/// Uniform grid omega_k = k d_omega, g_k^2 = J(omega_k) d_omega.
inline DiscreteBath discretize_uniform(const ModelParams& p, int M, double omega_max,
                                       Cutoff cutoff = Cutoff::exponential) {
  p.validate_bath();
  if (M < 1) throw ParameterError("uniform M must be >= 1");
  if (!(omega_max > 0.0)) throw ParameterError("uniform omega_max must be > 0");
  const double dw = omega_max / M;
  DiscreteBath bath;
  bath.scheme = Scheme::uniform;
  bath.modes.reserve(M);
  for (int k = 1; k <= M; ++k) {
    const double w = k * dw;
    bath.modes.push_back({k, w, std::sqrt(spectral_density(w, p, cutoff) * dw)});
  }
  bath.meta = {{"M", M},
               {"omega_max", omega_max},
               {"d_omega", dw},
               {"exponential_cutoff", cutoff == Cutoff::exponential ? 1.0 : 0.0}};
  return bath;
}

/// Equally spaced finite bath with g_n = sqrt(lambda omega_n / (M - 1)).
inline DiscreteBath discretize_linear_finite(const ModelParams& p, int M, double omega_1, double omega_M) {
  p.validate_bath();
  if (M < 2) throw ParameterError("linear_finite needs M > 1; use single_mode for the Rabi model");
  if (!(omega_1 > 0.0 && omega_M > omega_1)) throw ParameterError("linear_finite needs omega_M > omega_1 > 0");
  const double step = (omega_M - omega_1) / (M - 1);
  DiscreteBath bath;
  bath.scheme = Scheme::linear_finite;
  for (int n = 1; n <= M; ++n) {
    const double w = omega_1 + (n - 1) * step;
    bath.modes.push_back({n, w, std::sqrt(p.lambda * w / (M - 1))});
  }
  bath.meta = {{"M", M}, {"omega_1", omega_1}, {"omega_M", omega_M}, {"delta_omega", step}};
  return bath;
}

/// One mode of frequency omega0 with coupling g (Rabi model: g = lambda).
inline DiscreteBath single_mode(double omega0, double g) {
  if (!(omega0 > 0.0)) throw ParameterError("single_mode omega0 must be > 0");
  if (!(g >= 0.0)) throw ParameterError("single_mode coupling must be >= 0");
  DiscreteBath bath;
  bath.scheme = Scheme::single_mode;
  bath.modes.push_back({1, omega0, g});
  bath.meta = {{"omega_0", omega0}};
  return bath;
}

/// Poincare recurrence time 2 pi / d_omega of a uniform bath; infinity otherwise.
inline double recurrence_time(const DiscreteBath& bath) {
  auto it = bath.meta.find("d_omega");
  if (bath.scheme != Scheme::uniform || it == bath.meta.end()) return std::numeric_limits<double>::infinity();
  return 2.0 * std::numbers::pi / it->second;
}

// ---------------------------------------------------------------------------
// Bath recipes, re-evaluated whenever the coupling changes (e.g. in lambda sweeps).

struct WilsonSpec {
  double Lambda = 1.2;
  int M = 80;
  int first_index = 1;
};
struct UniformSpec {
  int M = 2000;
  double omega_max = 4.0;
  Cutoff cutoff = Cutoff::exponential;
};
struct LinearSpec {
  int M = 3;
  double omega_1 = 1.0;
  double omega_M = 1.4;
};
struct SingleModeSpec {
  double omega_0 = 1.0;
};

using BathSpec = std::variant<WilsonSpec, UniformSpec, LinearSpec, SingleModeSpec>;

inline DiscreteBath make_bath(const ModelParams& p, const BathSpec& spec) {
  struct Visitor {
    const ModelParams& p;
    DiscreteBath operator()(const WilsonSpec& s) const { return discretize_wilson(p, s.Lambda, s.M, s.first_index); }
    DiscreteBath operator()(const UniformSpec& s) const { return discretize_uniform(p, s.M, s.omega_max, s.cutoff); }
    DiscreteBath operator()(const LinearSpec& s) const {
      return discretize_linear_finite(p, s.M, s.omega_1, s.omega_M);
    }
    DiscreteBath operator()(const SingleModeSpec& s) const {
      p.validate_bath();
      return single_mode(s.omega_0, p.lambda);
    }
  };
  return std::visit(Visitor{p}, spec);
}

}  // namespace ptsb
