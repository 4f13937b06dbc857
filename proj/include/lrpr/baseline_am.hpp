#pragma once

#include <optional>
#include <vector>

#include "lrpr/core.hpp"
#include "lrpr/datagen.hpp"
#include "lrpr/vem.hpp"

namespace lrpr {

// Low-rank factorization X = U * bmat with U kept orthonormal between
// iterations (re-orthonormalized after every U update).
struct FactorPair {
  ComplexMatrix u;     // N x r
  ComplexMatrix bmat;  // r x M

  double orthonormality_defect() const {
    return (u.adjoint() * u -
            ComplexMatrix::Identity(u.cols(), u.cols()))
        .cwiseAbs()
        .maxCoeff();
  }
};

struct AmOptions {
  int max_iter = 300;
  double tol = 1e-6;
  bool track_objective = false;

  void validate() const {
    if (max_iter < 1) throw Error("AmOptions: max_iter must be >= 1");
    if (tol <= 0.0) throw Error("AmOptions: tol must be positive");
  }
};

struct AmIterationStat {
  int iteration = 0;
  double max_rel_change = 0.0;
  // Phase-augmented least-squares objective after each sub-step, recorded
  // only when track_objective is on.
  std::optional<double> obj_after_phase;
  std::optional<double> obj_after_b;
  std::optional<double> obj_after_u;
};

struct AmResult {
  SignalMatrix estimate;
  FactorPair factors;
  std::vector<AmIterationStat> trace;
  bool converged = false;
  bool rank_deficient = false;
  int iterations = 0;
};

// Same stationary-phase rule as the variational method, applied to the
// factored estimate's projections.
inline PhaseEstimate am_phase_update(const MeasurementSet& ms,
                                     const FactorPair& factors) {
  ms.validate();
  PhaseEstimate phase;
  phase.theta.resize(ms.p, ms.m);
  for (Index m = 0; m < ms.m; ++m) {
    const ComplexVector proj = ms.a[m] * (factors.u * factors.bmat.col(m));
    for (Index p = 0; p < ms.p; ++p)
      phase.theta(p, m) = detail::phase_for(ms.y(p, m), proj[p]);
  }
  return phase;
}

// Per-column least squares for the coefficients: b_m minimizes
// || ytilde_m - (A_m U) b || with ytilde the phase-rotated observations.
// A rank-deficient A_m U is reported through the flag and answered with the
// minimum-norm solution.
inline ComplexMatrix am_b_update(const MeasurementSet& ms,
                                 const PhaseEstimate& phase,
                                 const ComplexMatrix& u,
                                 bool* rank_deficient = nullptr) {
  ms.validate();
  const Index r = u.cols();
  ComplexMatrix bmat(r, ms.m);
  if (rank_deficient) *rank_deficient = false;
  for (Index m = 0; m < ms.m; ++m) {
    const ComplexMatrix au = ms.a[m] * u;
    const ComplexVector ytilde = phase.rotated_column(ms.y, m);
    Eigen::ColPivHouseholderQR<ComplexMatrix> qr(au);
    if (qr.rank() < r) {
      if (rank_deficient) *rank_deficient = true;
      bmat.col(m) = au.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                        .solve(ytilde);
    } else {
      bmat.col(m) = qr.solve(ytilde);
    }
  }
  return bmat;
}

namespace detail {

// Matrix-free conjugate gradients for the stacked normal equations
//   sum_m gram_m * U * (b_m b_m^H) = rhs,
// used when the dense system would be larger than is sensible to form.
inline ComplexMatrix solve_u_cg(const std::vector<ComplexMatrix>& gram,
                                const ComplexMatrix& bmat,
                                const ComplexMatrix& rhs, double rel_tol,
                                int max_iter) {
  const auto apply = [&](const ComplexMatrix& u) {
    ComplexMatrix out = ComplexMatrix::Zero(u.rows(), u.cols());
    for (Index m = 0; m < bmat.cols(); ++m) {
      const ComplexVector b = bmat.col(m);
      out += (gram[m] * u) * (b * b.adjoint());
    }
    return out;
  };
  ComplexMatrix x = ComplexMatrix::Zero(rhs.rows(), rhs.cols());
  ComplexMatrix res = rhs;
  ComplexMatrix dir = res;
  double res_sq = res.squaredNorm();
  const double target = rel_tol * rel_tol * rhs.squaredNorm();
  for (int it = 0; it < max_iter && res_sq > target; ++it) {
    const ComplexMatrix ad = apply(dir);
    const double denom = dir.cwiseProduct(ad.conjugate()).sum().real();
    if (denom <= 0.0) break;
    const double alpha = res_sq / denom;
    x += alpha * dir;
    res -= alpha * ad;
    const double next_sq = res.squaredNorm();
    dir = res + (next_sq / res_sq) * dir;
    res_sq = next_sq;
  }
  return x;
}

}  // namespace detail

// Exact least-squares step in U over all columns jointly, via the stacked
// normal equations
//   [ sum_m conj(b_m b_m^H) kron (A_m^H A_m) ] vec(U) = vec(sum_m A_m^H ytilde_m b_m^H),
// followed by a thin QR that restores orthonormal U and absorbs the
// triangular factor into B (the product U*B is unchanged by this).
inline FactorPair am_u_update(const MeasurementSet& ms,
                              const PhaseEstimate& phase,
                              const ComplexMatrix& bmat) {
  ms.validate();
  const Index r = bmat.rows();
  const Index n = ms.n;

  std::vector<ComplexMatrix> gram(ms.m);
  ComplexMatrix rhs = ComplexMatrix::Zero(n, r);
  for (Index m = 0; m < ms.m; ++m) {
    gram[m] = ms.a[m].adjoint() * ms.a[m];
    rhs += ms.a[m].adjoint() * phase.rotated_column(ms.y, m) *
           bmat.col(m).adjoint();
  }

  ComplexMatrix u_raw(n, r);
  if (n <= 128) {
    ComplexMatrix big = ComplexMatrix::Zero(n * r, n * r);
    for (Index m = 0; m < ms.m; ++m) {
      const ComplexMatrix outer =
          (bmat.col(m) * bmat.col(m).adjoint()).conjugate();
      for (Index j = 0; j < r; ++j)
        for (Index i = 0; i < r; ++i)
          big.block(i * n, j * n, n, n) += outer(i, j) * gram[m];
    }
    const auto llt = detail::jittered_llt(0.5 * (big + big.adjoint()));
    const ComplexVector sol =
        llt.solve(Eigen::Map<const ComplexVector>(rhs.data(), n * r));
    u_raw = Eigen::Map<const ComplexMatrix>(sol.data(), n, r);
  } else {
    u_raw = detail::solve_u_cg(gram, bmat, rhs, 1e-10,
                               static_cast<int>(4 * n * r));
  }

  Eigen::HouseholderQR<ComplexMatrix> qr(u_raw);
  FactorPair out;
  out.u = qr.householderQ() * ComplexMatrix::Identity(n, r);
  const ComplexMatrix rfac = qr.matrixQR()
                                 .topRows(r)
                                 .template triangularView<Eigen::Upper>();
  out.bmat = rfac * bmat;
  return out;
}

namespace detail {

inline double am_objective(const MeasurementSet& ms, const PhaseEstimate& phase,
                           const FactorPair& factors) {
  double obj = 0.0;
  for (Index m = 0; m < ms.m; ++m) {
    const ComplexVector ytilde = phase.rotated_column(ms.y, m);
    obj += (ytilde - ms.a[m] * (factors.u * factors.bmat.col(m))).squaredNorm();
  }
  return obj;
}

}  // namespace detail

// Alternating minimization over phases, coefficients and the shared
// subspace. The starting factors come from a thin SVD of x0.
inline AmResult run_am(const MeasurementSet& ms, Index r,
                       const SignalMatrix& x0, const AmOptions& opts = {}) {
  ms.validate();
  opts.validate();
  if (r < 1 || r > ms.n) throw InvalidRank("run_am: rank out of range");
  if (x0.rows() != ms.n || x0.cols() != ms.m)
    throw Error("run_am: starting point has wrong shape");

  AmResult result;
  Eigen::JacobiSVD<ComplexMatrix> svd(x0.x, Eigen::ComputeThinU);
  result.factors.u = svd.matrixU().leftCols(std::min<Index>(r, svd.rank()));
  if (result.factors.u.cols() < r) {
    // Pad a rank-deficient start with arbitrary orthonormal directions.
    ComplexMatrix padded = ComplexMatrix::Zero(ms.n, r);
    padded.leftCols(result.factors.u.cols()) = result.factors.u;
    Eigen::HouseholderQR<ComplexMatrix> qr(padded);
    result.factors.u = qr.householderQ() * ComplexMatrix::Identity(ms.n, r);
  }
  result.factors.bmat = result.factors.u.adjoint() * x0.x;

  ComplexMatrix prev = result.factors.u * result.factors.bmat;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    AmIterationStat stat;
    stat.iteration = iter;

    const PhaseEstimate phase = am_phase_update(ms, result.factors);
    if (opts.track_objective)
      stat.obj_after_phase = detail::am_objective(ms, phase, result.factors);

    bool deficient = false;
    result.factors.bmat = am_b_update(ms, phase, result.factors.u, &deficient);
    result.rank_deficient = result.rank_deficient || deficient;
    if (opts.track_objective)
      stat.obj_after_b = detail::am_objective(ms, phase, result.factors);

    result.factors = am_u_update(ms, phase, result.factors.bmat);
    if (opts.track_objective)
      stat.obj_after_u = detail::am_objective(ms, phase, result.factors);

    const ComplexMatrix estimate = result.factors.u * result.factors.bmat;
    double delta = 0.0;
    for (Index m = 0; m < ms.m; ++m) {
      const double denom = std::max(prev.col(m).norm(), 1e-12);
      delta = std::max(delta, (estimate.col(m) - prev.col(m)).norm() / denom);
    }
    prev = estimate;
    stat.max_rel_change = delta;
    result.trace.push_back(stat);
    result.iterations = iter;
    if (delta < opts.tol) {
      result.converged = true;
      break;
    }
  }

  result.estimate.x = prev;
  result.estimate.rank_hint = static_cast<int>(r);
  return result;
}

}  // namespace lrpr
