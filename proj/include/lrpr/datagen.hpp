#pragma once

#include <optional>
#include <vector>

#include "lrpr/core.hpp"

namespace lrpr {

// Complex N x M signal matrix, optionally annotated with the rank it was
// constructed to have.
struct SignalMatrix {
  ComplexMatrix x;
  std::optional<int> rank_hint;

  Index rows() const { return x.rows(); }
  Index cols() const { return x.cols(); }
};

// Per-column sensing operators and magnitude observations:
// y(p, m) = |row p of a[m] applied to column m of the signal, plus noise|.
struct MeasurementSet {
  Index n = 0;                    // signal dimension
  Index m = 0;                    // number of columns
  Index p = 0;                    // measurements per column
  std::vector<ComplexMatrix> a;   // m matrices, each p x n
  RealMatrix y;                   // p x m, nonnegative
  std::optional<double> beta_true;  // noise precision at generation; absent = noiseless

  void validate() const {
    if (n < 1 || m < 1 || p < 1) throw Error("MeasurementSet: empty dimensions");
    if (static_cast<Index>(a.size()) != m)
      throw Error("MeasurementSet: sensing matrix count != m");
    for (const auto& am : a)
      if (am.rows() != p || am.cols() != n)
        throw Error("MeasurementSet: sensing matrix has wrong shape");
    if (y.rows() != p || y.cols() != m)
      throw Error("MeasurementSet: y has wrong shape");
    if (!y.allFinite() || (y.array() < 0.0).any())
      throw Error("MeasurementSet: y must be finite and nonnegative");
  }
};

// Rank-r ground truth X = E * F with E (n x r) and F (r x m) i.i.d. CN(0,1).
inline SignalMatrix gen_lowrank(SeededRng& rng, Index n, Index m, Index r) {
  if (r < 1 || r > std::min(n, m))
    throw InvalidRank("gen_lowrank: rank must lie in [1, min(n, m)]");
  const ComplexMatrix e = sample_cnormal(rng, n, r);
  const ComplexMatrix f = sample_cnormal(rng, r, m);
  return SignalMatrix{e * f, static_cast<int>(r)};
}

// Phaseless measurements of each column. Noise, when requested, enters the
// modulus: y = |a^H x + w| with w ~ CN(0, 1/beta_true). Sensing matrices are
// drawn independently per column in column order, so the stream layout is
// reproducible.
inline MeasurementSet gen_measurements(SeededRng& rng, const SignalMatrix& x,
                                       Index p,
                                       std::optional<double> beta_true = {}) {
  if (p < 1) throw Error("gen_measurements: p must be >= 1");
  if (beta_true && *beta_true <= 0.0)
    throw Error("gen_measurements: beta_true must be positive");
  MeasurementSet ms;
  ms.n = x.rows();
  ms.m = x.cols();
  ms.p = p;
  ms.beta_true = beta_true;
  ms.a.reserve(ms.m);
  ms.y.resize(p, ms.m);
  const double noise_scale = beta_true ? 1.0 / std::sqrt(*beta_true) : 0.0;
  for (Index col = 0; col < ms.m; ++col) {
    ms.a.push_back(sample_cnormal(rng, p, ms.n));
    ComplexVector clean = ms.a.back() * x.x.col(col);
    if (beta_true) clean += noise_scale * sample_cnormal(rng, p, 1);
    ms.y.col(col) = clean.cwiseAbs();
  }
  return ms;
}

}  // namespace lrpr
