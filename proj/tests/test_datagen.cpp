#include <catch2/catch_amalgamated.hpp>

#include <Eigen/SVD>

#include "lrpr/datagen.hpp"

using namespace lrpr;

TEST_CASE("gen_lowrank produces a matrix of the requested rank") {
  SeededRng rng(11);
  const auto x = gen_lowrank(rng, 100, 100, 5);
  REQUIRE(x.rows() == 100);
  REQUIRE(x.cols() == 100);
  REQUIRE(x.rank_hint == 5);

  Eigen::JacobiSVD<ComplexMatrix> svd(x.x);
  const auto& sv = svd.singularValues();
  for (Index i = 5; i < 100; ++i) REQUIRE(sv[i] <= 1e-10 * sv[0]);
}

TEST_CASE("gen_lowrank with full rank is generically nonsingular") {
  SeededRng rng(12);
  const auto x = gen_lowrank(rng, 6, 6, 6);
  Eigen::JacobiSVD<ComplexMatrix> svd(x.x);
  REQUIRE(svd.singularValues()[5] > 1e-8 * svd.singularValues()[0]);
}

TEST_CASE("gen_lowrank matches its own best low-rank truncation") {
  SeededRng rng(13);
  const auto x = gen_lowrank(rng, 6, 6, 2);
  Eigen::JacobiSVD<ComplexMatrix> svd(
      x.x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ComplexMatrix truncated = ComplexMatrix::Zero(6, 6);
  for (Index i = 0; i < 2; ++i)
    truncated += svd.singularValues()[i] * svd.matrixU().col(i) *
                 svd.matrixV().col(i).adjoint();
  REQUIRE((x.x - truncated).norm() <= 1e-10 * x.x.norm());
}

TEST_CASE("gen_lowrank rejects out-of-range ranks") {
  SeededRng rng(14);
  REQUIRE_THROWS_AS(gen_lowrank(rng, 4, 6, 0), InvalidRank);
  REQUIRE_THROWS_AS(gen_lowrank(rng, 4, 6, 5), InvalidRank);
}

TEST_CASE("gen_measurements: zero signal gives zero observations") {
  SeededRng rng(15);
  SignalMatrix x{ComplexMatrix::Zero(4, 3), std::nullopt};
  const auto ms = gen_measurements(rng, x, 10);
  REQUIRE((ms.y.array() == 0.0).all());
  REQUIRE_FALSE(ms.beta_true.has_value());
}

TEST_CASE("gen_measurements: noiseless observations recompute bit-exactly") {
  SeededRng rng(16);
  const auto x = gen_lowrank(rng, 5, 4, 2);
  const auto ms = gen_measurements(rng, x, 12);
  for (Index m = 0; m < ms.m; ++m) {
    const RealVector recomputed = (ms.a[m] * x.x.col(m)).cwiseAbs();
    REQUIRE((ms.y.col(m) - recomputed).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gen_measurements: noise second moment matches the precision") {
  // With a zero signal, y = |w| and E y^2 = 1/beta.
  SeededRng rng(17);
  SignalMatrix x{ComplexMatrix::Zero(1, 1), std::nullopt};
  const auto ms = gen_measurements(rng, x, 100000, 100.0);
  const double mean_sq = ms.y.array().square().mean();
  REQUIRE(mean_sq > 0.0095);
  REQUIRE(mean_sq < 0.0105);
}

TEST_CASE("gen_measurements: scaling the signal scales y") {
  SeededRng base(18);
  const auto x = gen_lowrank(base, 5, 3, 2);

  SignalMatrix x2{(2.0 * x.x).eval(), x.rank_hint};
  SeededRng r1(333), r2(333);
  const auto ms1 = gen_measurements(r1, x, 9);
  const auto ms2 = gen_measurements(r2, x2, 9);
  // Doubling is exact in binary floating point, so this holds bit-exactly.
  REQUIRE(((2.0 * ms1.y) - ms2.y).cwiseAbs().maxCoeff() == 0.0);

  SignalMatrix xc{(Complex(0.3, 1.1) * x.x).eval(), x.rank_hint};
  SeededRng r3(333);
  const auto ms3 = gen_measurements(r3, xc, 9);
  const double c_abs = std::abs(Complex(0.3, 1.1));
  REQUIRE(((c_abs * ms1.y) - ms3.y).cwiseAbs().maxCoeff() <=
          1e-12 * ms3.y.maxCoeff());
}

TEST_CASE("gen_measurements validates arguments") {
  SeededRng rng(19);
  const auto x = gen_lowrank(rng, 3, 3, 1);
  REQUIRE_THROWS_AS(gen_measurements(rng, x, 0), Error);
  REQUIRE_THROWS_AS(gen_measurements(rng, x, 5, -1.0), Error);
}
