#pragma once

// Exact diagonalization in a truncated Fock space.
//
// Basis ordering: index = s * nb + b with s = 0 (up, sigma_z = +1) or 1 (down)
// and b the mixed-radix boson label, mode 0 least significant.

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "ptsb/eigensolver.hpp"
#include "ptsb/errors.hpp"
#include "ptsb/model.hpp"

namespace ptsb {

using SparseH = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct FockTruncation {
  std::vector<int> n_max;  // per-mode boson cutoff
  std::size_t dimension_cap = 2'000'000;

  static FockTruncation uniform(std::size_t modes, int n, std::size_t cap = 2'000'000) {
    return {std::vector<int>(modes, n), cap};
  }

  /// Number of boson configurations; saturates rather than overflowing.
  std::size_t boson_dimension() const {
    std::size_t d = 1;
    for (int n : n_max) {
      if (n < 0) throw ParameterError("n_max must be >= 0");
      const std::size_t f = static_cast<std::size_t>(n) + 1;
      d = d > std::numeric_limits<std::size_t>::max() / (2 * f) ? std::numeric_limits<std::size_t>::max() / 2 : d * f;
    }
    return d;
  }

  std::size_t dimension() const { return 2 * boson_dimension(); }

  void check_cap() const {
    if (dimension() > dimension_cap) throw DimensionError(dimension(), dimension_cap);
  }

  FockTruncation enlarged(int step) const {
    FockTruncation t = *this;
    for (int& n : t.n_max) n += step;
    return t;
  }
};

/// Cutoff per mode used when none is given: 40 for one mode, 8 for up to
/// three modes, 6 beyond. The paired value is the re-run increment.
inline std::pair<FockTruncation, int> default_truncation(const DiscreteBath& bath) {
  if (bath.size() == 1) return {FockTruncation::uniform(1, 40), 10};
  if (bath.size() <= 3) return {FockTruncation::uniform(bath.size(), 8), 2};
  return {FockTruncation::uniform(bath.size(), 6), 2};
}

inline SparseH build_hamiltonian(const ModelParams& p, const DiscreteBath& bath, const FockTruncation& trunc) {
  p.validate();
  if (trunc.n_max.size() != bath.size())
    throw ParameterError("truncation has " + std::to_string(trunc.n_max.size()) + " modes, bath has " +
                         std::to_string(bath.size()));
  trunc.check_cap();
  const std::size_t M = bath.size();
  const auto nb = static_cast<Eigen::Index>(trunc.boson_dimension());
  std::vector<Eigen::Index> stride(M);
  Eigen::Index acc = 1;
  for (std::size_t k = 0; k < M; ++k) {
    stride[k] = acc;
    acc *= trunc.n_max[k] + 1;
  }

  const cplx b = p.bias_term();
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(2 * nb) * (2 + 2 * M));
  std::vector<int> occ(M, 0);
  for (Eigen::Index ib = 0; ib < nb; ++ib) {
    double free = 0.0;
    for (std::size_t k = 0; k < M; ++k) free += bath.modes[k].omega * occ[k];
    for (int s = 0; s < 2; ++s) {
      const double sz = s == 0 ? 1.0 : -1.0;
      const Eigen::Index i = s * nb + ib;
      trip.emplace_back(i, i, sz * b + free);
      trip.emplace_back(i, (1 - s) * nb + ib, -0.5 * p.delta);
      for (std::size_t k = 0; k < M; ++k) {
        if (occ[k] >= trunc.n_max[k]) continue;
        const double v = sz * bath.modes[k].g * std::sqrt(occ[k] + 1.0);
        if (v == 0.0) continue;
        const Eigen::Index j = i + stride[k];
        trip.emplace_back(i, j, v);
        trip.emplace_back(j, i, v);
      }
    }
    for (std::size_t k = 0; k < M; ++k) {  // increment mixed-radix counter
      if (++occ[k] <= trunc.n_max[k]) break;
      occ[k] = 0;
    }
  }
  SparseH H(2 * nb, 2 * nb);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

/// max |P conj(H) P - H| with P = sigma_x (x) exp(i pi N).
inline double pt_symmetry_check(const SparseH& H, const FockTruncation& trunc) {
  const auto nb = static_cast<Eigen::Index>(trunc.boson_dimension());
  if (H.rows() != 2 * nb) throw ParameterError("pt_symmetry_check: matrix does not match truncation");
  std::vector<signed char> parity(nb);
  std::vector<int> occ(trunc.n_max.size(), 0);
  int total = 0;
  for (Eigen::Index ib = 0; ib < nb; ++ib) {
    parity[ib] = (total % 2) ? -1 : 1;
    for (std::size_t k = 0; k < occ.size(); ++k) {
      if (++occ[k] <= trunc.n_max[k]) {
        ++total;
        break;
      }
      total -= occ[k] - 1;
      occ[k] = 0;
    }
  }
  auto flip = [nb](Eigen::Index i) { return i < nb ? i + nb : i - nb; };
  auto sign = [&](Eigen::Index i) { return parity[i % nb]; };

  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(H.nonZeros());
  for (Eigen::Index o = 0; o < H.outerSize(); ++o)
    for (SparseH::InnerIterator it(H, o); it; ++it)
      trip.emplace_back(flip(it.row()), flip(it.col()),
                        static_cast<double>(sign(it.row()) * sign(it.col())) * std::conj(it.value()));
  SparseH G(H.rows(), H.cols());
  G.setFromTriplets(trip.begin(), trip.end());
  SparseH D = G - H;
  double defect = 0.0;
  for (Eigen::Index o = 0; o < D.outerSize(); ++o)
    for (SparseH::InnerIterator it(D, o); it; ++it) defect = std::max(defect, std::abs(it.value()));
  return defect;
}

struct SpectrumResult {
  std::vector<cplx> eigenvalues;  // sorted by (Re, Im)
  std::optional<Eigen::MatrixXcd> eigenvectors;
  std::vector<double> residuals;
  double matrix_norm = 0.0;
  FockTruncation truncation;
  double convergence_delta = std::numeric_limits<double>::quiet_NaN();
  bool converged = true;
  std::string method;
  int iterations = 0;
  double pt_defect = std::numeric_limits<double>::quiet_NaN();
};

inline SpectrumResult diagonalize(const SparseH& H, int k, const DiagonalizeOptions& opt = {}) {
  if (k < 1 || k > H.rows()) throw ParameterError("diagonalize: k must be in [1, dimension]");
  EigenPairs pairs = static_cast<std::size_t>(H.rows()) <= opt.dense_limit
                         ? dense_lowest(Eigen::MatrixXcd(H), k)
                         : filtered_subspace_lowest(H, k, opt);
  SpectrumResult out;
  out.eigenvalues = std::move(pairs.values);
  out.residuals = std::move(pairs.residuals);
  out.matrix_norm = pairs.matrix_norm;
  out.method = pairs.method;
  out.iterations = pairs.iterations;
  if (opt.keep_vectors) out.eigenvectors = std::move(pairs.vectors);
  return out;
}

struct EdOptions {
  DiagonalizeOptions diag;
  int increment = 0;              // truncation re-run step; 0 picks the default for the bath
  double convergence_tol = 1e-8;  // max allowed eigenvalue change under the re-run
  bool check_convergence = true;
  bool check_pt = false;  // also record pt_symmetry_check of the matrix
};

/// Lowest k eigenvalues at `trunc`, re-run at a larger cutoff to estimate the
/// truncation error. `converged` is false when the change exceeds the tolerance.
inline SpectrumResult ed_spectrum(const ModelParams& p, const DiscreteBath& bath, const FockTruncation& trunc, int k,
                                  const EdOptions& opt = {}) {
  const SparseH H = build_hamiltonian(p, bath, trunc);
  SpectrumResult res = diagonalize(H, k, opt.diag);
  res.truncation = trunc;
  if (opt.check_pt) res.pt_defect = pt_symmetry_check(H, trunc);
  if (!opt.check_convergence) return res;
  const int step = opt.increment > 0 ? opt.increment : default_truncation(bath).second;
  FockTruncation bigger = trunc.enlarged(step);
  DiagonalizeOptions d2 = opt.diag;
  d2.keep_vectors = false;
  const SpectrumResult ref = diagonalize(build_hamiltonian(p, bath, bigger), k, d2);
  double delta = 0.0;
  for (int i = 0; i < k; ++i) delta = std::max(delta, std::abs(ref.eigenvalues[i] - res.eigenvalues[i]));
  res.convergence_delta = delta;
  res.converged = delta <= opt.convergence_tol;
  return res;
}

inline SpectrumResult ed_spectrum(const ModelParams& p, const DiscreteBath& bath, int k, const EdOptions& opt = {}) {
  return ed_spectrum(p, bath, default_truncation(bath).first, k, opt);
}

}  // namespace ptsb
