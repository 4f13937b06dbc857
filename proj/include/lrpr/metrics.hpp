#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lrpr/core.hpp"
#include "lrpr/datagen.hpp"

namespace lrpr {

enum class Algo { vbl, am };
enum class InitKind { spectral, random };

inline const char* to_string(Algo a) { return a == Algo::vbl ? "vbl" : "am"; }
inline const char* to_string(InitKind k) {
  return k == InitKind::spectral ? "spectral" : "random";
}

// One experiment outcome. `re` is empty when the run aborted numerically;
// such trials still count, as failures.
struct TrialRecord {
  Algo algo = Algo::vbl;
  InitKind init = InitKind::spectral;
  std::uint64_t seed = 0;
  int trial = 0;
  Index n = 0, m = 0, p = 0, r = 0;
  int iterations = 0;
  bool converged = false;
  std::optional<double> re;
  bool success = false;
  double threshold = 0.1;
  double runtime_ms = 0.0;
};

// min over unit phases of ||x - e^{j phi} xhat||^2, in closed form:
// ||x||^2 + ||xhat||^2 - 2 |x^H xhat|, attained at phi = -arg(x^H xhat).
inline double phase_aligned_sqerror(const ComplexVector& x,
                                    const ComplexVector& xhat) {
  if (x.size() != xhat.size())
    throw Error("phase_aligned_sqerror: length mismatch");
  const double value =
      x.squaredNorm() + xhat.squaredNorm() - 2.0 * std::abs(x.dot(xhat));
  return std::max(0.0, value);
}

// Recovery error with the per-column phase ambiguity minimized out,
// normalized by the squared Frobenius norm of the reference.
inline double relative_error(const SignalMatrix& x, const SignalMatrix& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
    throw Error("relative_error: shape mismatch");
  const double denom = x.x.squaredNorm();
  if (denom == 0.0) throw ZeroTruth("relative_error: reference matrix is zero");
  double numer = 0.0;
  for (Index m = 0; m < x.cols(); ++m)
    numer += phase_aligned_sqerror(x.x.col(m), xhat.x.col(m));
  return numer / denom;
}

// Strict threshold: a trial at exactly the threshold is not a success.
inline bool is_success(double re, double threshold = 0.1) {
  return re < threshold;
}

}  // namespace lrpr
