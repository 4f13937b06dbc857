#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include "lrpr/core.hpp"
#include "lrpr/metrics.hpp"

using namespace lrpr;

namespace {

// Independent route: scan phi over a dense grid.
double grid_min_sqerror(const ComplexVector& x, const ComplexVector& xhat,
                        int points) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / points;
    best = std::min(best, (x - std::polar(1.0, phi) * xhat).squaredNorm());
  }
  return best;
}

}  // namespace

TEST_CASE("phase_aligned_sqerror vanishes on rotated copies") {
  SeededRng rng(31);
  const ComplexVector x = sample_cnormal(rng, 6, 1);
  for (double phi : {0.3, 1.7, 3.9}) {
    const ComplexVector rotated = std::polar(1.0, phi) * x;
    REQUIRE(phase_aligned_sqerror(x, rotated) <= 1e-12 * x.squaredNorm());
  }
  REQUIRE(phase_aligned_sqerror(x, (-x).eval()) <= 1e-12 * x.squaredNorm());
}

TEST_CASE("phase_aligned_sqerror matches a grid search") {
  SeededRng rng(32);
  for (int rep = 0; rep < 20; ++rep) {
    ComplexVector x = sample_cnormal(rng, 5, 1);
    ComplexVector xhat = sample_cnormal(rng, 5, 1);
    x /= x.norm();
    xhat /= xhat.norm();
    const double closed = phase_aligned_sqerror(x, xhat);
    const double grid = grid_min_sqerror(x, xhat, 100000);
    REQUIRE(closed <= grid + 1e-12);
    REQUIRE(grid - closed <= 1e-9 * std::max(1.0, closed));
  }
}

TEST_CASE("phase_aligned_sqerror bounds") {
  SeededRng rng(33);
  const ComplexVector x = sample_cnormal(rng, 4, 1);
  const ComplexVector xhat = sample_cnormal(rng, 4, 1);
  const double value = phase_aligned_sqerror(x, xhat);
  REQUIRE(value >= 0.0);
  const double outer = x.norm() + xhat.norm();
  REQUIRE(value <= outer * outer + 1e-12);
}

TEST_CASE("relative_error basics") {
  SeededRng rng(34);
  const ComplexMatrix m = sample_cnormal(rng, 5, 4);
  const SignalMatrix x{m, std::nullopt};

  REQUIRE(relative_error(x, x) <= 1e-15);

  const SignalMatrix zero{ComplexMatrix::Zero(5, 4), std::nullopt};
  REQUIRE(relative_error(x, zero) == Catch::Approx(1.0));

  SignalMatrix rotated = x;
  for (Index c = 0; c < 4; ++c)
    rotated.x.col(c) *= std::polar(1.0, 0.5 + 0.7 * static_cast<double>(c));
  REQUIRE(relative_error(x, rotated) <= 1e-12);

  REQUIRE_THROWS_AS(relative_error(zero, x), ZeroTruth);

  const SignalMatrix wrong{ComplexMatrix::Zero(4, 4), std::nullopt};
  REQUIRE_THROWS_AS(relative_error(x, wrong), Error);
}

TEST_CASE("relative_error is invariant under per-column phases of either side") {
  SeededRng rng(35);
  const SignalMatrix x{sample_cnormal(rng, 5, 3), std::nullopt};
  const SignalMatrix xhat{sample_cnormal(rng, 5, 3), std::nullopt};
  const double base = relative_error(x, xhat);

  SignalMatrix x_rot = x, xhat_rot = xhat;
  for (Index c = 0; c < 3; ++c) {
    x_rot.x.col(c) *= std::polar(1.0, 1.1 * static_cast<double>(c) + 0.2);
    xhat_rot.x.col(c) *= std::polar(1.0, -0.4 * static_cast<double>(c) + 2.0);
  }
  REQUIRE(relative_error(x_rot, xhat) == Catch::Approx(base).epsilon(1e-12));
  REQUIRE(relative_error(x, xhat_rot) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("relative_error is invariant under joint column reordering") {
  SeededRng rng(36);
  const SignalMatrix x{sample_cnormal(rng, 4, 5), std::nullopt};
  const SignalMatrix xhat{sample_cnormal(rng, 4, 5), std::nullopt};
  const double base = relative_error(x, xhat);

  const std::vector<Index> perm{4, 2, 0, 1, 3};
  SignalMatrix xp = x, xhp = xhat;
  for (Index c = 0; c < 5; ++c) {
    xp.x.col(c) = x.x.col(perm[c]);
    xhp.x.col(c) = xhat.x.col(perm[c]);
  }
  REQUIRE(relative_error(xp, xhp) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("is_success applies a strict threshold") {
  REQUIRE(is_success(0.09));
  REQUIRE_FALSE(is_success(0.1));
  REQUIRE(is_success(0.0));
  REQUIRE(is_success(0.049, 0.05));
  REQUIRE_FALSE(is_success(0.05, 0.05));
}
