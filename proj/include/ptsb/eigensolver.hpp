#pragma once

// Lowest-real-part eigenpairs of complex non-Hermitian matrices whose spectrum
// lies in a thin strip around the real axis (|Im E| bounded by the
// anti-Hermitian part). Small problems go through a dense Schur
// decomposition; large sparse ones through Chebyshev-filtered subspace
// iteration with Rayleigh-Ritz extraction.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ptsb/errors.hpp"

namespace ptsb {

struct DiagonalizeOptions {
  std::size_t dense_limit = 600;  // dimensions up to this use the dense solver
  double tol = 1e-11;             // residual target relative to ||H||_inf
  int extra_vectors = 4;          // guard vectors carried beyond the k wanted
  int filter_degree = 24;
  int max_iterations = 400;
  bool keep_vectors = false;
  std::uint64_t seed = 0x5eed;
};

struct EigenPairs {
  std::vector<std::complex<double>> values;
  Eigen::MatrixXcd vectors;       // unit-norm right eigenvectors, column i <-> values[i]
  std::vector<double> residuals;  // ||H v - E v|| per pair
  double matrix_norm = 0.0;       // ||H||_inf used for relative tolerances
  int iterations = 0;
  std::string method;
};

namespace detail {

/// Permutation ordering values by real part, ties (within tie_tol) by imaginary part.
inline std::vector<int> spectral_order(const std::vector<std::complex<double>>& v, double tie_tol) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a].real() < v[b].real(); });
  // Bubble pass restricted to near-equal real parts keeps conjugate pairs in (-Im, +Im) order.
  bool swapped = true;
  while (swapped) {
    swapped = false;
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
      const auto& x = v[idx[i]];
      const auto& y = v[idx[i + 1]];
      if (std::abs(x.real() - y.real()) <= tie_tol && x.imag() > y.imag()) {
        std::swap(idx[i], idx[i + 1]);
        swapped = true;
      }
    }
  }
  return idx;
}

template <class Sparse>
double inf_norm(const Sparse& H) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(H.rows());
  for (int o = 0; o < H.outerSize(); ++o)
    for (typename Sparse::InnerIterator it(H, o); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

/// Gershgorin upper bound on Re(E) over the spectrum.
template <class Sparse>
double gershgorin_real_upper(const Sparse& H) {
  Eigen::VectorXd radius = Eigen::VectorXd::Zero(H.rows());
  Eigen::VectorXd centre = Eigen::VectorXd::Zero(H.rows());
  for (int o = 0; o < H.outerSize(); ++o)
    for (typename Sparse::InnerIterator it(H, o); it; ++it) {
      if (it.row() == it.col())
        centre[it.row()] = it.value().real();
      else
        radius[it.row()] += std::abs(it.value());
    }
  return (centre + radius).maxCoeff();
}

inline Eigen::MatrixXcd orthonormal_basis(const Eigen::MatrixXcd& Y) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Y);
  return qr.householderQ() * Eigen::MatrixXcd::Identity(Y.rows(), Y.cols());
}

/// Scaled Chebyshev filter damping Re(E) in [lo, hi], amplifying E near `wanted`.
template <class Sparse>
Eigen::MatrixXcd chebyshev_filter(const Sparse& H, const Eigen::MatrixXcd& X, int degree, double lo, double hi,
                                  double wanted) {
  const double e = 0.5 * (hi - lo);
  const double c = 0.5 * (hi + lo);
  double sigma = e / (wanted - c);
  const double sigma1 = sigma;
  Eigen::MatrixXcd prev = X;
  Eigen::MatrixXcd cur = (H * X - c * X) * (sigma1 / e);
  for (int i = 2; i <= degree; ++i) {
    const double sigma2 = 1.0 / (2.0 / sigma1 - sigma);
    Eigen::MatrixXcd next = (H * cur - c * cur) * (2.0 * sigma2 / e) - (sigma * sigma2) * prev;
    prev.swap(cur);
    cur.swap(next);
    sigma = sigma2;
  }
  return cur;
}

}  // namespace detail

/// Dense route: full Schur decomposition, k lowest by (Re, Im).
inline EigenPairs dense_lowest(const Eigen::MatrixXcd& H, int k) {
  if (k < 1 || k > H.rows()) throw ParameterError("dense_lowest: k out of range");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(H, true);
  if (solver.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed", 0, 0.0);
  std::vector<std::complex<double>> all(solver.eigenvalues().data(),
                                        solver.eigenvalues().data() + solver.eigenvalues().size());
  const double norm = H.cwiseAbs().rowwise().sum().maxCoeff();
  const auto order = detail::spectral_order(all, 1e-10 * std::max(1.0, norm));
  EigenPairs out;
  out.method = "dense";
  out.matrix_norm = norm;
  out.vectors.resize(H.rows(), k);
  for (int i = 0; i < k; ++i) {
    out.values.push_back(all[order[i]]);
    Eigen::VectorXcd v = solver.eigenvectors().col(order[i]);
    v.normalize();
    out.vectors.col(i) = v;
    out.residuals.push_back((H * v - all[order[i]] * v).norm());
  }
  return out;
}

/// Sparse route: Chebyshev-filtered subspace iteration for the k eigenvalues of
/// smallest real part. Throws ConvergenceError when max_iterations is reached.
template <class Sparse>
EigenPairs filtered_subspace_lowest(const Sparse& H, int k, const DiagonalizeOptions& opt = {}) {
  const Eigen::Index n = H.rows();
  if (k < 1 || k > n) throw ParameterError("filtered_subspace_lowest: k out of range");
  const int p = static_cast<int>(std::min<Eigen::Index>(n, k + std::max(2, opt.extra_vectors)));

  EigenPairs out;
  out.method = "chebyshev";
  out.matrix_norm = detail::inf_norm(H);
  const double upper = detail::gershgorin_real_upper(H);
  const double tie_tol = 1e-10 * std::max(1.0, out.matrix_norm);

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXcd X(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = {dist(rng), dist(rng)};

  Eigen::MatrixXcd Q = detail::orthonormal_basis(X);
  Eigen::MatrixXcd HQ = H * Q;
  double last_residual = std::numeric_limits<double>::infinity();

  for (int it = 0; it <= opt.max_iterations; ++it) {
    Eigen::MatrixXcd T = Q.adjoint() * HQ;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> small(T, true);
    std::vector<std::complex<double>> theta(small.eigenvalues().data(), small.eigenvalues().data() + p);
    const auto order = detail::spectral_order(theta, tie_tol);

    Eigen::MatrixXcd S(p, p);
    std::vector<std::complex<double>> sorted(p);
    for (int j = 0; j < p; ++j) {
      S.col(j) = small.eigenvectors().col(order[j]);
      sorted[j] = theta[order[j]];
    }
    Eigen::MatrixXcd V = Q * S;
    Eigen::MatrixXcd HV = HQ * S;
    std::vector<double> res(k);
    last_residual = 0.0;
    for (int j = 0; j < k; ++j) {
      const double nv = V.col(j).norm();
      res[j] = (HV.col(j) - sorted[j] * V.col(j)).norm() / nv;
      last_residual = std::max(last_residual, res[j]);
    }
    if (last_residual <= opt.tol * out.matrix_norm) {
      out.iterations = it;
      for (int j = 0; j < k; ++j) out.values.push_back(sorted[j]);
      out.residuals = res;
      if (opt.keep_vectors) {
        out.vectors = V.leftCols(k);
        for (int j = 0; j < k; ++j) out.vectors.col(j).normalize();
      }
      return out;
    }

    const double wanted = sorted.front().real();
    double cut = sorted.back().real();
    if (!(cut < upper)) cut = 0.5 * (wanted + upper);
    if (cut - wanted < 1e-8 * std::max(1.0, std::abs(upper - wanted))) cut = wanted + 1e-3 * (upper - wanted);
    Eigen::MatrixXcd Y = detail::chebyshev_filter(H, V, opt.filter_degree, cut, upper, wanted - 1e-3 * (upper - wanted));
    Q = detail::orthonormal_basis(Y);
    HQ = H * Q;
  }
  throw ConvergenceError("Chebyshev subspace iteration did not converge", opt.max_iterations,
                         last_residual / std::max(out.matrix_norm, 1e-300));
}

}  // namespace ptsb
