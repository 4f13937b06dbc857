#pragma once

#include <optional>

#include "lrpr/core.hpp"
#include "lrpr/datagen.hpp"
#include "lrpr/metrics.hpp"

namespace lrpr {

// How the starting estimate is produced. `rank` matters for the spectral
// scheme only; `rng` seeds the random scheme only.
struct InitSpec {
  InitKind kind = InitKind::spectral;
  Index rank = 1;
  std::optional<SeededRng> rng;
};

// Joint spectral starting point.
//
//   1. S = (1/(M P)) sum_{m,p} y_{p,m}^2 a_{p,m} a_{p,m}^H; U = top-r
//      eigenvectors of S (the shared column subspace).
//   2. Per column, g_m = top eigenvector of U^H [ (1/P) sum_p y^2 a a^H ] U.
//   3. Scale s_m = sqrt(max(0, mean_p y_{p,m}^2)), since for unit-variance
//      sensing E|a^H x|^2 = ||x||^2.
//
// Columns come out as s_m * U g_m, so the result has rank at most r. Each
// column is determined only up to the eigensolver's phase, which is as
// identifiable as the problem allows. All-zero data yields the zero matrix
// and raises `degenerate` instead of failing.
inline SignalMatrix spectral_init(const MeasurementSet& ms, Index r,
                                  bool* degenerate = nullptr) {
  ms.validate();
  if (r < 1 || r > ms.n) throw InvalidRank("spectral_init: rank out of range");
  if (degenerate) *degenerate = false;

  if ((ms.y.array() == 0.0).all()) {
    if (degenerate) *degenerate = true;
    return SignalMatrix{ComplexMatrix::Zero(ms.n, ms.m), static_cast<int>(r)};
  }

  // a_{p,m} is the conjugated row p of a[m], so
  // sum_p y^2 a a^H = A^H diag(y^2) A.
  const double inv_p = 1.0 / static_cast<double>(ms.p);
  ComplexMatrix s = ComplexMatrix::Zero(ms.n, ms.n);
  std::vector<ComplexMatrix> per_column(ms.m);
  for (Index m = 0; m < ms.m; ++m) {
    const auto w = ms.y.col(m).array().square().matrix().asDiagonal();
    per_column[m] = inv_p * (ms.a[m].adjoint() * w * ms.a[m]);
    s += per_column[m];
  }
  s /= static_cast<double>(ms.m);

  const ComplexMatrix u = top_eigpairs(s, r).vectors;

  SignalMatrix x0{ComplexMatrix(ms.n, ms.m), static_cast<int>(r)};
  for (Index m = 0; m < ms.m; ++m) {
    const ComplexMatrix t = u.adjoint() * per_column[m] * u;
    const ComplexVector g = top_eigpairs(t, 1).vectors.col(0);
    const double scale =
        std::sqrt(std::max(0.0, ms.y.col(m).squaredNorm() * inv_p));
    x0.x.col(m) = scale * (u * g);
  }
  return x0;
}

// Starting point with i.i.d. CN(0,1) entries.
inline SignalMatrix random_init(SeededRng& rng, Index n, Index m) {
  if (n < 1 || m < 1) throw Error("random_init: dimensions must be >= 1");
  return SignalMatrix{sample_cnormal(rng, n, m), std::nullopt};
}

// Dispatch used by the experiment harness.
inline SignalMatrix make_init(const InitSpec& spec, const MeasurementSet& ms,
                              bool* degenerate = nullptr) {
  if (spec.kind == InitKind::spectral)
    return spectral_init(ms, spec.rank, degenerate);
  if (!spec.rng) throw Error("make_init: random init needs an rng");
  SeededRng rng = *spec.rng;
  return random_init(rng, ms.n, ms.m);
}

}  // namespace lrpr
