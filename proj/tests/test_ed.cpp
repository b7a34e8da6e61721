#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "ptsb/ed.hpp"

using namespace ptsb;

namespace {

ModelParams qubit(double delta, double eps, double lambda = 0.0, BiasKind bias = BiasKind::imaginary) {
  ModelParams p;
  p.delta = delta;
  p.eps = eps;
  p.lambda = lambda;
  p.bias = bias;
  return p;
}

double spectral_span(const std::vector<cplx>& e) {
  double lo = e.front().real(), hi = lo;
  for (auto z : e) {
    lo = std::min(lo, z.real());
    hi = std::max(hi, z.real());
  }
  return std::max(hi - lo, 1.0);
}

}  // namespace

TEST(Diagonalize, QubitBlockUnbroken) {
  const auto p = qubit(0.3, 0.1);
  const auto H = build_hamiltonian(p, single_mode(1.0, 0.0), FockTruncation::uniform(1, 0));
  const auto res = diagonalize(H, 2);
  const double root = 0.5 * std::sqrt(0.08);
  EXPECT_NEAR(std::abs(res.eigenvalues[0] - cplx(-root, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(res.eigenvalues[1] - cplx(root, 0)), 0.0, 1e-12);
  EXPECT_NEAR(root, 0.1414214, 1e-7);
}

TEST(Diagonalize, QubitBlockBroken) {
  const auto H = build_hamiltonian(qubit(0.3, 0.4), single_mode(1.0, 0.0), FockTruncation::uniform(1, 0));
  const auto res = diagonalize(H, 2);
  const double root = 0.5 * std::sqrt(0.16 - 0.09);
  EXPECT_NEAR(root, 0.1322876, 1e-7);
  // Equal real parts: the (Re, Im) order puts -i first.
  EXPECT_NEAR(std::abs(res.eigenvalues[0] - cplx(0, -root)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(res.eigenvalues[1] - cplx(0, root)), 0.0, 1e-12);
}

TEST(Diagonalize, QubitBlockAtExceptionalPoint) {
  const auto H = build_hamiltonian(qubit(0.1, 0.1), single_mode(1.0, 0.0), FockTruncation::uniform(1, 0));
  const auto res = diagonalize(H, 2);
  // The defective 2x2 block only resolves its double root to sqrt(machine eps).
  EXPECT_LT(std::abs(res.eigenvalues[0]), 1e-7);
  EXPECT_LT(std::abs(res.eigenvalues[1]), 1e-7);
}

TEST(Diagonalize, DecoupledQubitAndOscillator) {
  const auto H = build_hamiltonian(qubit(0.3, 0.1), single_mode(1.0, 0.0), FockTruncation::uniform(1, 1));
  const auto res = diagonalize(H, 4);
  const double root = 0.5 * std::sqrt(0.08);
  const double expect[] = {-root, root, 1 - root, 1 + root};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(res.eigenvalues[i] - expect[i]), 0.0, 1e-12);
}

TEST(Diagonalize, ResidualsBoundedByNorm) {
  const auto H = build_hamiltonian(qubit(0.5, 0.1), single_mode(1.0, 0.3), FockTruncation::uniform(1, 20));
  const auto res = diagonalize(H, 4);
  for (double r : res.residuals) EXPECT_LE(r, 1e-9 * res.matrix_norm);
}

TEST(Diagonalize, RejectsBadCount) {
  const auto H = build_hamiltonian(qubit(0.3, 0.1), single_mode(1.0, 0.1), FockTruncation::uniform(1, 2));
  EXPECT_THROW(diagonalize(H, 0), ParameterError);
  EXPECT_THROW(diagonalize(H, 7), ParameterError);
}

TEST(BuildHamiltonian, PolaronLadderAtZeroTunneling) {
  // delta = 0, eps = 0: each spin sector is a displaced oscillator, E = n omega - g^2/omega.
  const double w = 1.3, g = 0.4;
  const auto H = build_hamiltonian(qubit(0.0, 0.0), single_mode(w, g), FockTruncation::uniform(1, 60));
  const auto res = diagonalize(H, 6);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(std::abs(res.eigenvalues[i] - (i / 2) * w + g * g / w), 0.0, 1e-10);
}

TEST(BuildHamiltonian, HermitianPartSymmetric) {
  const auto bath = discretize_linear_finite(qubit(0.3, 0.1, 0.2), 3, 1.0, 1.4);
  const auto H = build_hamiltonian(qubit(0.3, 0.1, 0.2), bath, FockTruncation::uniform(3, 3));
  const Eigen::MatrixXcd D(H);
  const Eigen::MatrixXcd herm = 0.5 * (D + D.adjoint());
  EXPECT_EQ((herm - herm.transpose()).cwiseAbs().maxCoeff(), 0.0);
  // The anti-Hermitian part is the gain/loss term i eps/2 sigma_z only.
  const Eigen::MatrixXcd anti = 0.5 * (D - D.adjoint());
  EXPECT_NEAR(anti.cwiseAbs().maxCoeff(), 0.05, 1e-15);
}

TEST(BuildHamiltonian, RefusesOversizedTruncation) {
  const auto p = qubit(0.3, 0.1, 0.1);
  const auto bath = make_bath(p, WilsonSpec{});
  try {
    build_hamiltonian(p, bath, FockTruncation::uniform(bath.size(), 2));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension"), std::string::npos);
  }
}

TEST(BuildHamiltonian, RejectsModeCountMismatch) {
  const auto p = qubit(0.3, 0.1, 0.1);
  EXPECT_THROW(build_hamiltonian(p, single_mode(1.0, 0.1), FockTruncation::uniform(2, 2)), ParameterError);
}

TEST(PtSymmetry, ImaginaryBiasCommutes) {
  for (double eps : {0.0, 0.1, 0.7}) {
    const auto p = qubit(0.3, eps, 0.3);
    const auto bath = discretize_linear_finite(p, 3, 1.0, 1.4);
    const auto trunc = FockTruncation::uniform(3, 4);
    const auto H = build_hamiltonian(p, bath, trunc);
    EXPECT_LE(pt_symmetry_check(H, trunc), 1e-12);
  }
}

TEST(PtSymmetry, RealBiasDefectEqualsEps) {
  const auto p = qubit(0.3, 0.25, 0.3, BiasKind::real);
  const auto trunc = FockTruncation::uniform(1, 6);
  const auto H = build_hamiltonian(p, single_mode(1.0, 0.3), trunc);
  EXPECT_NEAR(pt_symmetry_check(H, trunc), 0.25, 1e-15);
}

TEST(PtSymmetry, ZeroBiasEitherKind) {
  for (auto kind : {BiasKind::imaginary, BiasKind::real}) {
    const auto p = qubit(0.3, 0.0, 0.3, kind);
    const auto trunc = FockTruncation{{2, 3}};
    const auto bath = discretize_linear_finite(p, 2, 1.0, 1.4);
    EXPECT_LE(pt_symmetry_check(build_hamiltonian(p, bath, trunc), trunc), 1e-12);
  }
}

TEST(EdSpectrum, RabiOracle) {
  const auto p = qubit(0.5, 0.1, 0.3);
  const auto res = ed_spectrum(p, make_bath(p, SingleModeSpec{1.0}), 2);
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.convergence_delta, 1e-8);
  EXPECT_EQ(res.truncation.n_max, std::vector<int>{40});
  EXPECT_NEAR(std::abs(res.eigenvalues[0] - oracle::rabi_e0), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(res.eigenvalues[1] - oracle::rabi_e1), 0.0, 1e-10);
}

TEST(EdSpectrum, FilteredSubspaceMatchesOracle) {
  const auto p = qubit(0.3, 0.1, 0.3);
  const auto bath = make_bath(p, LinearSpec{3, 1.0, 1.4});
  EdOptions opt;
  opt.check_convergence = false;
  const auto res = ed_spectrum(p, bath, FockTruncation::uniform(3, 8), 2, opt);
  EXPECT_EQ(res.method, "chebyshev");
  EXPECT_NEAR(std::abs(res.eigenvalues[0] - oracle::linear3_e0), 0.0, 1e-9);
  EXPECT_NEAR(std::abs(res.eigenvalues[1] - oracle::linear3_e1), 0.0, 1e-9);
  for (double r : res.residuals) EXPECT_LE(r, 1e-9 * res.matrix_norm);
}

TEST(EdSpectrum, DenseAndFilteredAgree) {
  const auto p = qubit(0.3, 0.1, 0.5);
  const auto bath = make_bath(p, LinearSpec{3, 1.0, 1.4});
  const auto trunc = FockTruncation::uniform(3, 5);
  const auto H = build_hamiltonian(p, bath, trunc);
  DiagonalizeOptions dense, filtered;
  dense.dense_limit = 10'000;
  filtered.dense_limit = 0;
  const auto a = diagonalize(H, 3, dense), b = diagonalize(H, 3, filtered);
  EXPECT_EQ(a.method, "dense");
  EXPECT_EQ(b.method, "chebyshev");
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(a.eigenvalues[i] - b.eigenvalues[i]), 0.0, 1e-9);
}

TEST(EdSpectrum, ConjugatePairing) {
  // Strong coupling puts the lowest pair in the broken phase.
  const auto p = qubit(0.5, 0.1, 1.1);
  const auto res = ed_spectrum(p, make_bath(p, SingleModeSpec{1.0}), 6);
  const double span = spectral_span(res.eigenvalues);
  int complex_count = 0;
  for (auto e : res.eigenvalues) {
    if (std::abs(e.imag()) <= 1e-10) continue;
    ++complex_count;
    double best = 1e300;
    for (auto f : res.eigenvalues) best = std::min(best, std::abs(f - std::conj(e)));
    EXPECT_LE(best, 1e-9 * span);
  }
  EXPECT_GT(complex_count, 0);
}

TEST(EdSpectrum, HermitianLimitIsReal) {
  const auto p = qubit(0.5, 0.3, 0.6, BiasKind::real);
  const auto res = ed_spectrum(p, make_bath(p, SingleModeSpec{1.0}), 6);
  const double span = spectral_span(res.eigenvalues);
  for (auto e : res.eigenvalues) EXPECT_LE(std::abs(e.imag()), 1e-10 * span);
}

TEST(EdSpectrum, ZeroCouplingFactorizes) {
  const auto p = qubit(0.3, 0.1, 0.0);
  const auto bath = make_bath(p, LinearSpec{2, 1.0, 1.4});
  const auto res = ed_spectrum(p, bath, FockTruncation::uniform(2, 3), 6);
  const double q = 0.5 * std::sqrt(0.08);
  std::vector<double> expect;
  for (int n1 = 0; n1 <= 3; ++n1)
    for (int n2 = 0; n2 <= 3; ++n2)
      for (double s : {-q, q}) expect.push_back(n1 * 1.0 + n2 * 1.4 + s);
  std::sort(expect.begin(), expect.end());
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(std::abs(res.eigenvalues[i] - expect[i]), 0.0, 1e-12);
}

TEST(EdSpectrum, FlagsUnconvergedTruncation) {
  const auto p = qubit(0.5, 0.1, 0.6);
  EdOptions opt;
  opt.increment = 10;
  const auto res = ed_spectrum(p, make_bath(p, SingleModeSpec{1.0}), FockTruncation::uniform(1, 3), 2, opt);
  EXPECT_FALSE(res.converged);
  EXPECT_GT(res.convergence_delta, 1e-8);
}

TEST(EdSpectrum, DefaultTruncations) {
  ModelParams p = qubit(0.3, 0.1, 0.1);
  EXPECT_EQ(default_truncation(make_bath(p, SingleModeSpec{})).first.n_max, std::vector<int>{40});
  EXPECT_EQ(default_truncation(make_bath(p, SingleModeSpec{})).second, 10);
  EXPECT_EQ(default_truncation(make_bath(p, LinearSpec{3, 1, 1.4})).first.n_max, std::vector<int>(3, 8));
  EXPECT_EQ(default_truncation(make_bath(p, LinearSpec{5, 1, 1.4})).first.n_max, std::vector<int>(5, 6));
  EXPECT_EQ(default_truncation(make_bath(p, LinearSpec{5, 1, 1.4})).second, 2);
}
