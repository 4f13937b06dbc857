#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <utility>

#include "lrpr/errors.hpp"

namespace lrpr {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;  // column-major, double precision
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const ComplexMatrix& m) {
  return m.real().allFinite() && m.imag().allFinite();
}

// Counter-based deterministic generator (splitmix64 output function).
// The integer stream is platform-exact; derived substreams depend only on
// (construction seed, key), so per-trial and per-column streams can be
// handed to concurrent workers without sharing state.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), counter_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ULL;
    return mix(counter_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Circularly-symmetric complex normal CN(0, 1): real and imaginary parts
  // are independent N(0, 1/2). Polar Box-Muller; u1 is shifted into (0, 1].
  Complex next_cnormal() {
    const double u1 = 1.0 - next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  // Independent substream addressed by key. Derivation uses the original
  // seed, not the current position, so the mapping (seed, key) -> stream is
  // stable no matter how much of the parent stream was consumed.
  SeededRng derive(std::uint64_t key) const {
    return SeededRng(mix(seed_ ^ mix(key + 0x9E3779B97F4A7C15ULL)));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
};

// Matrix of i.i.d. CN(0,1) entries, filled column by column.
inline ComplexMatrix sample_cnormal(SeededRng& rng, Index rows, Index cols) {
  ComplexMatrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = rng.next_cnormal();
  return out;
}

// Hermitian positive definite matrix. Construction either validates the
// Hermitian invariant (`require`) or symmetrizes a matrix that is Hermitian
// up to round-off from a trusted computation (`assume`). Positive
// definiteness is a contract of the producing operation; factorizations
// that consume the matrix surface violations as NotPositiveDefinite.
class HermitianPd {
 public:
  HermitianPd() = default;

  static HermitianPd require(ComplexMatrix m, double rel_tol = 1e-12) {
    if (m.rows() != m.cols()) throw Error("HermitianPd: matrix must be square");
    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (asym > rel_tol * std::max(scale, 1e-300))
      throw Error("HermitianPd: matrix is not Hermitian within tolerance");
    return assume(std::move(m));
  }

  static HermitianPd assume(ComplexMatrix m) {
    HermitianPd h;
    h.mat_ = 0.5 * (m + m.adjoint());
    return h;
  }

  const ComplexMatrix& mat() const { return mat_; }
  Index dim() const { return mat_.rows(); }

 private:
  ComplexMatrix mat_;
};

namespace detail {

// Cholesky with a diagonal jitter ladder: on failure add
// 1e-12 * trace/dim to the diagonal and escalate x100, at most three
// jittered attempts. The huge-scale/tiny-inverse hyperprior settings used
// downstream leave some matrices one round-off away from semidefinite.
inline Eigen::LLT<ComplexMatrix> jittered_llt(const ComplexMatrix& h) {
  Eigen::LLT<ComplexMatrix> llt(h);
  if (llt.info() == Eigen::Success) return llt;
  const Index n = h.rows();
  double jitter = 1e-12 * h.real().trace() / static_cast<double>(n);
  for (int attempt = 0; attempt < 3; ++attempt) {
    ComplexMatrix shifted = h;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 100.0;
  }
  throw NotPositiveDefinite("Cholesky failed after jitter escalation");
}

// Inverse of a Hermitian PD matrix given as a plain (already symmetrized)
// matrix. Internal building block for the posterior updates.
inline ComplexMatrix hpd_inverse_mat(const ComplexMatrix& h) {
  const auto llt = jittered_llt(h);
  ComplexMatrix inv = llt.solve(ComplexMatrix::Identity(h.rows(), h.cols()));
  return 0.5 * (inv + inv.adjoint());
}

// log det of a Hermitian PD matrix via its Cholesky factor.
inline double hpd_logdet(const ComplexMatrix& h) {
  const auto llt = jittered_llt(h);
  return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
}

}  // namespace detail

inline HermitianPd hpd_inverse(const HermitianPd& h) {
  return HermitianPd::assume(detail::hpd_inverse_mat(h.mat()));
}

struct EigPairs {
  RealVector values;      // descending
  ComplexMatrix vectors;  // unit-norm columns, mutually orthogonal
};

// Top-k eigenpairs of a Hermitian matrix, eigenvalues descending. Dense
// solve; problem sizes here never justify an iterative scheme.
inline EigPairs top_eigpairs(const ComplexMatrix& h, Index k) {
  if (h.rows() != h.cols()) throw Error("top_eigpairs: matrix must be square");
  if (k < 1 || k > h.rows()) throw Error("top_eigpairs: k out of range");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (h + h.adjoint()));
  if (es.info() != Eigen::Success)
    throw ConvergenceFailure("top_eigpairs: eigensolver did not converge");
  const Index n = h.rows();
  EigPairs out;
  out.values.resize(k);
  out.vectors.resize(n, k);
  for (Index i = 0; i < k; ++i) {
    out.values[i] = es.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

}  // namespace lrpr
