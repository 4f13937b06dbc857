#include <catch2/catch_amalgamated.hpp>

#include <Eigen/SVD>
#include <numeric>

#include "lrpr/init.hpp"
#include "lrpr/metrics.hpp"

using namespace lrpr;

TEST_CASE("spectral_init: all-zero data yields zero with a warning flag") {
  SeededRng rng(21);
  SignalMatrix x{ComplexMatrix::Zero(6, 4), std::nullopt};
  const auto ms = gen_measurements(rng, x, 20);
  bool degenerate = false;
  const auto x0 = spectral_init(ms, 2, &degenerate);
  REQUIRE(degenerate);
  REQUIRE((x0.x.array() == Complex(0, 0)).all());
}

TEST_CASE("spectral_init: rank-1 columns correlate with the truth") {
  SeededRng rng(22);
  const auto x = gen_lowrank(rng, 16, 8, 1);
  const auto ms = gen_measurements(rng, x, 800);
  const auto x0 = spectral_init(ms, 1);
  for (Index m = 0; m < ms.m; ++m) {
    const double corr = std::abs(x0.x.col(m).dot(x.x.col(m))) /
                        (x0.x.col(m).norm() * x.x.col(m).norm());
    REQUIRE(corr >= 0.9);
  }
}

TEST_CASE("spectral_init: estimated subspace is close to the truth") {
  SeededRng rng(23);
  const auto x = gen_lowrank(rng, 16, 16, 2);
  const auto ms = gen_measurements(rng, x, 800);
  const auto x0 = spectral_init(ms, 2);

  Eigen::JacobiSVD<ComplexMatrix> svd_true(x.x, Eigen::ComputeThinU);
  Eigen::JacobiSVD<ComplexMatrix> svd_est(x0.x, Eigen::ComputeThinU);
  const ComplexMatrix pu = svd_true.matrixU().leftCols(2) *
                           svd_true.matrixU().leftCols(2).adjoint();
  const ComplexMatrix pe =
      svd_est.matrixU().leftCols(2) * svd_est.matrixU().leftCols(2).adjoint();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> gap(pu - pe);
  const double dist = gap.eigenvalues().cwiseAbs().maxCoeff();
  REQUIRE(dist <= 0.3);
}

TEST_CASE("spectral_init output has rank at most r") {
  SeededRng rng(24);
  const auto x = gen_lowrank(rng, 12, 10, 5);  // truth rank above the request
  const auto ms = gen_measurements(rng, x, 60);
  const auto x0 = spectral_init(ms, 3);
  Eigen::JacobiSVD<ComplexMatrix> svd(x0.x);
  const auto& sv = svd.singularValues();
  REQUIRE(sv[3] <= 1e-10 * sv[0]);
}

TEST_CASE("spectral_init commutes with column permutations") {
  SeededRng rng(25);
  const auto x = gen_lowrank(rng, 8, 5, 2);
  const auto ms = gen_measurements(rng, x, 64);
  const auto x0 = spectral_init(ms, 2);

  std::vector<Index> perm{3, 0, 4, 1, 2};
  MeasurementSet shuffled = ms;
  for (Index m = 0; m < ms.m; ++m) {
    shuffled.a[m] = ms.a[perm[m]];
    shuffled.y.col(m) = ms.y.col(perm[m]);
  }
  const auto x0p = spectral_init(shuffled, 2);
  for (Index m = 0; m < ms.m; ++m) {
    const double gap = phase_aligned_sqerror(x0p.x.col(m), x0.x.col(perm[m]));
    REQUIRE(gap <= 1e-6 * x0.x.col(perm[m]).squaredNorm());
  }
}

TEST_CASE("spectral_init validates the rank") {
  SeededRng rng(26);
  const auto x = gen_lowrank(rng, 4, 4, 1);
  const auto ms = gen_measurements(rng, x, 8);
  REQUIRE_THROWS_AS(spectral_init(ms, 0), InvalidRank);
  REQUIRE_THROWS_AS(spectral_init(ms, 5), InvalidRank);
}

TEST_CASE("random_init is deterministic under the seed") {
  SeededRng a(27), b(27);
  const auto x1 = random_init(a, 4, 3);
  const auto x2 = random_init(b, 4, 3);
  REQUIRE(x1.x == x2.x);
  REQUIRE(x1.rows() == 4);
  REQUIRE(x1.cols() == 3);
}

TEST_CASE("random_init entries have unit variance and nonzero imaginary part") {
  double acc = 0.0;
  Index count = 0;
  bool any_imag = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SeededRng rng(seed);
    const auto x = random_init(rng, 4, 3);
    acc += x.x.squaredNorm();
    count += x.x.size();
    any_imag = any_imag || (x.x.imag().array() != 0.0).any();
  }
  const double mean_sq = acc / static_cast<double>(count);
  REQUIRE(mean_sq > 0.95);
  REQUIRE(mean_sq < 1.05);
  REQUIRE(any_imag);
}

TEST_CASE("make_init dispatches on the spec") {
  SeededRng rng(28);
  const auto x = gen_lowrank(rng, 6, 4, 2);
  const auto ms = gen_measurements(rng, x, 30);

  InitSpec spectral;
  spectral.kind = InitKind::spectral;
  spectral.rank = 2;
  const auto xs = make_init(spectral, ms);
  REQUIRE(xs.rows() == 6);

  InitSpec random;
  random.kind = InitKind::random;
  random.rng = SeededRng(5);
  const auto xr = make_init(random, ms);
  REQUIRE(xr.rows() == 6);
  REQUIRE(xr.cols() == 4);

  InitSpec broken;
  broken.kind = InitKind::random;
  REQUIRE_THROWS_AS(make_init(broken, ms), Error);
}
