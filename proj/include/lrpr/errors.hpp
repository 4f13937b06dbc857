#pragma once

#include <stdexcept>
#include <string>

namespace lrpr {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A matrix expected to be Hermitian positive definite failed to factor
// even after the diagonal jitter ladder was exhausted.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

// An iterative eigensolver did not converge.
struct ConvergenceFailure : Error {
  using Error::Error;
};

// Requested rank outside [1, min(n, m)].
struct InvalidRank : Error {
  using Error::Error;
};

// A least-squares system lost column rank.
struct RankDeficient : Error {
  using Error::Error;
};

// A diagnostic quantity (e.g. the evidence bound) could not be evaluated
// in finite double precision. Callers log and skip; they do not abort.
struct NumericalOverflow : Error {
  using Error::Error;
};

// Relative error against an identically-zero reference is undefined.
struct ZeroTruth : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// A binary blob's byte length disagrees with its manifest.
struct LengthMismatch : Error {
  using Error::Error;
};

struct UnsupportedVersion : Error {
  using Error::Error;
};

// A results CSV does not conform to the expected schema.
struct SchemaError : Error {
  using Error::Error;
};

}  // namespace lrpr
