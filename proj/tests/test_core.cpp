#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <complex>

#include "lrpr/core.hpp"

using namespace lrpr;

namespace {

ComplexMatrix random_hpd(SeededRng& rng, Index n, double shift = 0.5) {
  const ComplexMatrix g = sample_cnormal(rng, n, n);
  return (g * g.adjoint() + shift * ComplexMatrix::Identity(n, n)).eval();
}

}  // namespace

TEST_CASE("SeededRng: identical seeds reproduce the stream") {
  SeededRng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("SeededRng: derived substreams are stable and distinct") {
  SeededRng parent(99);
  // Consuming the parent does not move its substreams.
  SeededRng d1 = parent.derive(7);
  parent.next_u64();
  parent.next_u64();
  SeededRng d2 = parent.derive(7);
  REQUIRE(d1.next_u64() == d2.next_u64());

  SeededRng other = parent.derive(8);
  REQUIRE(parent.derive(7).next_u64() != other.next_u64());
}

TEST_CASE("sample_cnormal is deterministic under the seed") {
  SeededRng a(42), b(42);
  const ComplexMatrix x = sample_cnormal(a, 2, 2);
  const ComplexMatrix y = sample_cnormal(b, 2, 2);
  REQUIRE(x == y);
}

TEST_CASE("sample_cnormal moments: unit entry variance, zero mean") {
  SeededRng rng(2024);
  const Index count = 100000;
  const ComplexMatrix z = sample_cnormal(rng, count, 1);
  const double second_moment = z.squaredNorm() / static_cast<double>(count);
  REQUIRE(second_moment > 0.99);
  REQUIRE(second_moment < 1.01);
  const Complex mean = z.sum() / static_cast<double>(count);
  REQUIRE(std::abs(mean) <= 0.02);
}

TEST_CASE("sample_cnormal is phase-invariant in distribution") {
  SeededRng rng(77);
  const Index count = 100000;
  ComplexMatrix z = sample_cnormal(rng, count, 1);
  const Complex rot = std::polar(1.0, 1.234);
  z *= rot;
  const double second_moment = z.squaredNorm() / static_cast<double>(count);
  REQUIRE(second_moment > 0.99);
  REQUIRE(second_moment < 1.01);
  REQUIRE(std::abs(z.sum() / static_cast<double>(count)) <= 0.02);
}

TEST_CASE("HermitianPd::require rejects non-Hermitian input") {
  ComplexMatrix m(2, 2);
  m << Complex(1, 0), Complex(1, 1), Complex(2, 0), Complex(3, 0);
  REQUIRE_THROWS_AS(HermitianPd::require(m), Error);
  REQUIRE_NOTHROW(HermitianPd::require(0.5 * (m + m.adjoint()).eval()));
}

TEST_CASE("hpd_inverse: identity and diagonal cases") {
  const auto inv_i =
      hpd_inverse(HermitianPd::require(ComplexMatrix::Identity(2, 2)));
  REQUIRE((inv_i.mat() - ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() <
          1e-14);

  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  const auto inv_d = hpd_inverse(HermitianPd::require(d));
  REQUIRE(std::abs(inv_d.mat()(0, 0) - Complex(0.5, 0)) < 1e-14);
  REQUIRE(std::abs(inv_d.mat()(1, 1) - Complex(0.25, 0)) < 1e-14);
  REQUIRE(std::abs(inv_d.mat()(0, 1)) < 1e-14);
}

TEST_CASE("hpd_inverse: multiply-back on random matrices") {
  SeededRng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const ComplexMatrix h = random_hpd(rng, 5);
    const auto inv = hpd_inverse(HermitianPd::require(h));
    const double defect =
        (h * inv.mat() - ComplexMatrix::Identity(5, 5)).cwiseAbs().maxCoeff();
    REQUIRE(defect < 1e-8);
  }
}

TEST_CASE("hpd_inverse is an involution up to tolerance") {
  SeededRng rng(6);
  const ComplexMatrix h = random_hpd(rng, 6);
  const auto round_trip = hpd_inverse(hpd_inverse(HermitianPd::require(h)));
  const double rel = (round_trip.mat() - h).norm() / h.norm();
  REQUIRE(rel < 1e-8);
}

TEST_CASE("hpd_inverse raises NotPositiveDefinite for indefinite input") {
  ComplexMatrix m = ComplexMatrix::Identity(3, 3);
  m(2, 2) = -1.0;
  REQUIRE_THROWS_AS(hpd_inverse(HermitianPd::require(m)), NotPositiveDefinite);
}

TEST_CASE("top_eigpairs: diagonal case picks descending pairs") {
  ComplexMatrix d = ComplexMatrix::Zero(3, 3);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  d(2, 2) = 2.0;
  const auto pairs = top_eigpairs(d, 2);
  REQUIRE(pairs.values[0] == Catch::Approx(3.0));
  REQUIRE(pairs.values[1] == Catch::Approx(2.0));
  // e1 and e3 up to a unit phase.
  REQUIRE(std::abs(pairs.vectors(0, 0)) == Catch::Approx(1.0));
  REQUIRE(std::abs(pairs.vectors(2, 1)) == Catch::Approx(1.0));
}

TEST_CASE("top_eigpairs: degenerate spectrum still yields a unit vector") {
  const auto pairs = top_eigpairs(ComplexMatrix::Identity(3, 3), 1);
  REQUIRE(pairs.values[0] == Catch::Approx(1.0));
  REQUIRE(pairs.vectors.col(0).norm() == Catch::Approx(1.0));
}

TEST_CASE("top_eigpairs matches an independent full decomposition") {
  SeededRng rng(7);
  ComplexMatrix g = sample_cnormal(rng, 6, 6);
  const ComplexMatrix h = 0.5 * (g + g.adjoint());
  const auto pairs = top_eigpairs(h, 2);

  // Oracle: the non-selfadjoint Schur-based solver, eigenvalues sorted.
  Eigen::ComplexEigenSolver<ComplexMatrix> es(h);
  std::vector<double> all;
  for (Index i = 0; i < 6; ++i) all.push_back(es.eigenvalues()[i].real());
  std::sort(all.rbegin(), all.rend());
  REQUIRE(std::abs(pairs.values[0] - all[0]) < 1e-10);
  REQUIRE(std::abs(pairs.values[1] - all[1]) < 1e-10);
}

TEST_CASE("top_eigpairs residuals, orthonormality and reconstruction") {
  SeededRng rng(8);
  const ComplexMatrix h = random_hpd(rng, 6);
  const double scale = h.norm();

  const auto pairs = top_eigpairs(h, 6);
  for (Index i = 0; i < 6; ++i) {
    const ComplexVector v = pairs.vectors.col(i);
    REQUIRE((h * v - pairs.values[i] * v).norm() <= 1e-8 * scale);
    for (Index j = i + 1; j < 6; ++j)
      REQUIRE(std::abs(v.dot(pairs.vectors.col(j))) < 1e-10);
    REQUIRE(std::abs(v.norm() - 1.0) < 1e-10);
  }

  ComplexMatrix recon = ComplexMatrix::Zero(6, 6);
  for (Index i = 0; i < 6; ++i)
    recon += pairs.values[i] * pairs.vectors.col(i) *
             pairs.vectors.col(i).adjoint();
  REQUIRE((recon - h).norm() <= 1e-8 * h.norm());
}

TEST_CASE("top_eigpairs validates its arguments") {
  REQUIRE_THROWS_AS(top_eigpairs(ComplexMatrix::Identity(3, 3), 0), Error);
  REQUIRE_THROWS_AS(top_eigpairs(ComplexMatrix::Identity(3, 3), 4), Error);
}
