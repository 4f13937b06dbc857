#pragma once

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <optional>
#include <vector>

#include "lrpr/core.hpp"
#include "lrpr/datagen.hpp"

namespace lrpr {

// Prior settings: Gamma(a, b) over the noise precision, Wishart(w_scale, nu)
// over the columnwise precision matrix. The noninformative defaults drive
// the low-rank behaviour: a tiny-precision Wishart prior lets the data
// collapse unused directions.
struct Hyperparameters {
  double a = 1e-10;
  double b = 1e-10;
  double nu = 1e-10;
  ComplexMatrix w_scale;  // N x N, Hermitian PD

  static Hyperparameters noninformative(Index n) {
    Hyperparameters h;
    h.w_scale = 1e10 * ComplexMatrix::Identity(n, n);
    return h;
  }

  void validate() const {
    if (a <= 0.0 || b <= 0.0 || nu <= 0.0)
      throw Error("Hyperparameters: a, b, nu must be positive");
    if (w_scale.rows() != w_scale.cols() || w_scale.rows() < 1)
      throw Error("Hyperparameters: w_scale must be square");
  }
};

// Gaussian factor of one signal column.
struct ColumnPosterior {
  ComplexVector mu;
  HermitianPd q;
};

// Wishart factor of the column precision matrix.
struct WishartPosterior {
  HermitianPd w_hat;
  double nu_hat = 0.0;
};

// Gamma factor of the noise precision.
struct GammaPosterior {
  double a_hat = 0.0;
  double b_hat = 0.0;

  double mean() const { return a_hat / b_hat; }
};

// Deterministic per-measurement phases, each in [0, 2pi). The associated
// diag(e^{-j theta}) rotation is unitary, so its inverse is elementwise
// e^{+j theta}.
struct PhaseEstimate {
  RealMatrix theta;  // P x M

  // Rotated observations: entry p of column m is y(p,m) e^{j theta(p,m)}.
  ComplexVector rotated_column(const RealMatrix& y, Index m) const {
    ComplexVector out(y.rows());
    for (Index p = 0; p < y.rows(); ++p) {
      const double t = theta(p, m);
      out[p] = y(p, m) * Complex(std::cos(t), std::sin(t));
    }
    return out;
  }
};

// All variational factors plus the phase parameters.
struct PosteriorState {
  std::vector<ColumnPosterior> columns;
  WishartPosterior sigma;
  GammaPosterior beta;
  PhaseEstimate phase;
  int iteration = 0;
};

struct VemOptions {
  int max_iter = 300;
  double tol = 1e-6;
  bool compute_elbo = false;

  void validate() const {
    if (max_iter < 1) throw Error("VemOptions: max_iter must be >= 1");
    if (tol <= 0.0) throw Error("VemOptions: tol must be positive");
  }
};

struct Moments {
  double beta_mean = 0.0;
  HermitianPd sigma_mean;  // nu_hat * w_hat
  HermitianPd xx_mean;     // sum_m (mu mu^H + Q)
};

// Standard conjugate-family expectations consumed by the updates.
inline Moments moments(const PosteriorState& state) {
  Moments mo;
  mo.beta_mean = state.beta.mean();
  mo.sigma_mean =
      HermitianPd::assume(state.sigma.nu_hat * state.sigma.w_hat.mat());
  const Index n = state.columns.empty() ? 0 : state.columns.front().mu.size();
  ComplexMatrix xx = ComplexMatrix::Zero(n, n);
  for (const auto& col : state.columns)
    xx += col.mu * col.mu.adjoint() + col.q.mat();
  mo.xx_mean = HermitianPd::assume(std::move(xx));
  return mo;
}

namespace detail {

inline double wrap_phase(double t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (t < 0.0) t += two_pi;
  if (t >= two_pi) t = 0.0;
  return t;
}

// Stationary phase of the expected residual: theta = arg(a^H mu), the root
// of e^{2j theta} = (a^H mu)/(mu^H a) that shrinks the residual (the other
// root, theta + pi, grows it). Zero observations or a zero projection leave
// theta at 0.
inline double phase_for(double y, Complex a_mu) {
  if (y == 0.0 || a_mu == Complex(0.0, 0.0)) return 0.0;
  return wrap_phase(std::arg(a_mu));
}

// Cached per-run quantities. `gram[m]` never changes; `dy` tracks the phase
// estimate and `a_mu` tracks the column means.
struct VemWorkspace {
  std::vector<ComplexMatrix> gram;  // A_m^H A_m
  ComplexMatrix winv;               // prior scale inverse
  std::vector<ComplexVector> dy;    // phase-rotated observations
  std::vector<ComplexVector> a_mu;  // A_m mu_m

  static VemWorkspace for_measurements(const MeasurementSet& ms) {
    VemWorkspace ws;
    ws.gram.reserve(ms.m);
    for (Index m = 0; m < ms.m; ++m) {
      ComplexMatrix g = ms.a[m].adjoint() * ms.a[m];
      ws.gram.push_back(0.5 * (g + g.adjoint()));
    }
    ws.dy.resize(ms.m);
    ws.a_mu.resize(ms.m);
    return ws;
  }

  static VemWorkspace for_run(const MeasurementSet& ms,
                              const Hyperparameters& hyper) {
    VemWorkspace ws = for_measurements(ms);
    ws.winv = hpd_inverse_mat(0.5 * (hyper.w_scale + hyper.w_scale.adjoint()));
    return ws;
  }

  void refresh_rotations(const MeasurementSet& ms, const PosteriorState& state) {
    for (Index m = 0; m < ms.m; ++m)
      dy[m] = state.phase.rotated_column(ms.y, m);
  }

  void refresh_projections(const MeasurementSet& ms,
                           const PosteriorState& state) {
    for (Index m = 0; m < ms.m; ++m)
      a_mu[m] = ms.a[m] * state.columns[m].mu;
  }
};

inline void update_qx_ws(const MeasurementSet& ms, const VemWorkspace& ws,
                         PosteriorState& state) {
  const Moments mo = moments(state);
  const ComplexMatrix& sigma = mo.sigma_mean.mat();
  for (Index m = 0; m < ms.m; ++m) {
    ComplexMatrix s = mo.beta_mean * ws.gram[m] + sigma;
    s = 0.5 * (s + s.adjoint());
    const auto llt = jittered_llt(s);
    ComplexMatrix q = llt.solve(ComplexMatrix::Identity(ms.n, ms.n));
    state.columns[m].q = HermitianPd::assume(std::move(q));
    state.columns[m].mu =
        llt.solve(mo.beta_mean * (ms.a[m].adjoint() * ws.dy[m]));
  }
}

inline void update_qsigma_ws(const Hyperparameters& hyper,
                             const VemWorkspace& ws, PosteriorState& state) {
  const Moments mo = moments(state);
  state.sigma.w_hat =
      HermitianPd::assume(hpd_inverse_mat(ws.winv + mo.xx_mean.mat()));
  state.sigma.nu_hat = hyper.nu + static_cast<double>(state.columns.size());
}

// Expected squared residual of one column,
// <|| D^-1 y - A x ||^2> = || D^-1 y - A mu ||^2 + tr(A Q A^H),
// with the trace folded through the cached Gram matrix.
inline double expected_residual(const VemWorkspace& ws,
                                const PosteriorState& state, Index m) {
  const double fit = (ws.dy[m] - ws.a_mu[m]).squaredNorm();
  const double spread = state.columns[m]
                            .q.mat()
                            .transpose()
                            .cwiseProduct(ws.gram[m])
                            .sum()
                            .real();
  return fit + spread;
}

inline void update_qbeta_ws(const Hyperparameters& hyper,
                            const MeasurementSet& ms, VemWorkspace& ws,
                            PosteriorState& state) {
  ws.refresh_projections(ms, state);
  double rss = 0.0;
  for (Index m = 0; m < ms.m; ++m) rss += expected_residual(ws, state, m);
  state.beta.a_hat =
      static_cast<double>(ms.p) * static_cast<double>(ms.m) + hyper.a;
  state.beta.b_hat = rss + hyper.b;
}

inline void update_theta_ws(const MeasurementSet& ms, VemWorkspace& ws,
                            PosteriorState& state) {
  for (Index m = 0; m < ms.m; ++m)
    for (Index p = 0; p < ms.p; ++p)
      state.phase.theta(p, m) = phase_for(ms.y(p, m), ws.a_mu[m][p]);
  ws.refresh_rotations(ms, state);
}

inline PosteriorState warm_start_ws(const MeasurementSet& ms,
                                    const Hyperparameters& hyper,
                                    const SignalMatrix& x0, VemWorkspace& ws) {
  PosteriorState state;
  state.columns.resize(ms.m);
  state.phase.theta.resize(ms.p, ms.m);

  // The starting point enters through the phases; the precision factors
  // start at their priors. With the noninformative defaults the prior means
  // are <Sigma> = nu W = I and <beta> = a/b = 1, so the first q_x update is
  // a nearly unregularized per-column fit and the column subspace stays
  // free to rotate while the posterior concentrates. (Deriving <Sigma>
  // from x0 x0^H instead pins the null-space precision near nu_hat/W_min
  // from the outset and the subspace can never leave the initial guess.)
  for (Index m = 0; m < ms.m; ++m) {
    const ComplexVector proj = ms.a[m] * x0.x.col(m);
    for (Index p = 0; p < ms.p; ++p)
      state.phase.theta(p, m) = phase_for(ms.y(p, m), proj[p]);
    state.columns[m].mu = x0.x.col(m);
    state.columns[m].q = HermitianPd::assume(ComplexMatrix::Zero(ms.n, ms.n));
  }
  ws.refresh_rotations(ms, state);

  state.sigma.nu_hat = hyper.nu;
  state.sigma.w_hat = HermitianPd::assume(
      0.5 * (hyper.w_scale + hyper.w_scale.adjoint()));
  state.beta.a_hat = hyper.a;
  state.beta.b_hat = hyper.b;
  state.iteration = 0;
  return state;
}

// ln of the complex multivariate gamma function.
inline double ln_cmv_gamma(Index n, double nu) {
  double out = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1) *
               std::log(std::numbers::pi);
  for (Index i = 1; i <= n; ++i) {
    const double arg = nu - static_cast<double>(i) + 1.0;
    if (arg <= 0.0)
      throw NumericalOverflow("evidence bound: Wishart factor is improper");
    out += std::lgamma(arg);
  }
  return out;
}

inline double elbo_ws(const Hyperparameters& hyper, const MeasurementSet& ms,
                      VemWorkspace& ws, const PosteriorState& state) {
  const double n = static_cast<double>(ms.n);
  const double mm = static_cast<double>(ms.m);
  const double pm = static_cast<double>(ms.p) * mm;
  const double ln_pi = std::log(std::numbers::pi);

  const double a_hat = state.beta.a_hat;
  const double b_hat = state.beta.b_hat;
  const double nu_hat = state.sigma.nu_hat;
  if (a_hat <= 0.0 || b_hat <= 0.0)
    throw NumericalOverflow("evidence bound: Gamma factor is degenerate");

  const double beta_mean = a_hat / b_hat;
  const double ln_beta = boost::math::digamma(a_hat) - std::log(b_hat);

  // <ln det Sigma> under the Wishart factor, in the complex convention
  // whose density carries det(Sigma)^(nu - N); the same convention makes
  // the closed-form updates exact coordinate maximizers of the bound.
  double ln_det_sigma = 0.0;
  for (Index i = 1; i <= ms.n; ++i) {
    const double arg = nu_hat - static_cast<double>(i) + 1.0;
    if (arg <= 0.0)
      throw NumericalOverflow("evidence bound: Wishart factor is improper");
    ln_det_sigma += boost::math::digamma(arg);
  }
  double logdet_what;
  double logdet_q_total = 0.0;
  try {
    logdet_what = hpd_logdet(state.sigma.w_hat.mat());
    for (const auto& col : state.columns)
      logdet_q_total += hpd_logdet(col.q.mat());
  } catch (const NotPositiveDefinite&) {
    throw NumericalOverflow("evidence bound: degenerate posterior covariance");
  }
  ln_det_sigma += logdet_what;

  const ComplexMatrix sigma_mean = nu_hat * state.sigma.w_hat.mat();
  ComplexMatrix xx = ComplexMatrix::Zero(ms.n, ms.n);
  for (const auto& col : state.columns)
    xx += col.mu * col.mu.adjoint() + col.q.mat();

  ws.refresh_rotations(ms, state);
  ws.refresh_projections(ms, state);
  double rss = 0.0;
  for (Index m = 0; m < ms.m; ++m) rss += expected_residual(ws, state, m);

  // <ln p(Y | X, beta)>
  const double e_lik = pm * (ln_beta - ln_pi) - beta_mean * rss;
  // <ln p(X | Sigma)>
  const double e_xprior = -n * mm * ln_pi + mm * ln_det_sigma -
                          sigma_mean.cwiseProduct(xx.transpose()).sum().real();
  // <ln p(Sigma)>, improper prior kept unnormalized (additive constant)
  const double e_sprior =
      (hyper.nu - n) * ln_det_sigma -
      ws.winv.cwiseProduct(sigma_mean.transpose()).sum().real();
  // <ln p(beta)>
  const double e_bprior = hyper.a * std::log(hyper.b) - std::lgamma(hyper.a) +
                          (hyper.a - 1.0) * ln_beta - hyper.b * beta_mean;
  // Entropies of the Gaussian, Wishart and Gamma factors.
  const double h_x = mm * n * (ln_pi + 1.0) + logdet_q_total;
  const double h_sigma = -(nu_hat - n) * ln_det_sigma + nu_hat * n +
                         ln_cmv_gamma(ms.n, nu_hat) + nu_hat * logdet_what;
  const double h_beta = a_hat - std::log(b_hat) + std::lgamma(a_hat) +
                        (1.0 - a_hat) * boost::math::digamma(a_hat);

  const double value =
      e_lik + e_xprior + e_sprior + e_bprior + h_x + h_sigma + h_beta;
  if (!std::isfinite(value))
    throw NumericalOverflow("evidence bound evaluated to a non-finite value");
  return value;
}

}  // namespace detail

// --- Contract-level entry points (each builds its own scratch state). ---

inline void update_qx(const MeasurementSet& ms, PosteriorState& state) {
  ms.validate();
  auto ws = detail::VemWorkspace::for_measurements(ms);
  ws.refresh_rotations(ms, state);
  detail::update_qx_ws(ms, ws, state);
}

inline WishartPosterior update_qsigma(const Hyperparameters& hyper,
                                      PosteriorState& state) {
  hyper.validate();
  const Moments mo = moments(state);
  const ComplexMatrix winv =
      detail::hpd_inverse_mat(0.5 * (hyper.w_scale + hyper.w_scale.adjoint()));
  state.sigma.w_hat =
      HermitianPd::assume(detail::hpd_inverse_mat(winv + mo.xx_mean.mat()));
  state.sigma.nu_hat = hyper.nu + static_cast<double>(state.columns.size());
  return state.sigma;
}

inline GammaPosterior update_qbeta(const Hyperparameters& hyper,
                                   const MeasurementSet& ms,
                                   PosteriorState& state) {
  ms.validate();
  auto ws = detail::VemWorkspace::for_measurements(ms);
  ws.refresh_rotations(ms, state);
  detail::update_qbeta_ws(hyper, ms, ws, state);
  return state.beta;
}

inline PhaseEstimate update_theta(const MeasurementSet& ms,
                                  PosteriorState& state) {
  ms.validate();
  for (Index m = 0; m < ms.m; ++m) {
    const ComplexVector proj = ms.a[m] * state.columns[m].mu;
    for (Index p = 0; p < ms.p; ++p)
      state.phase.theta(p, m) = detail::phase_for(ms.y(p, m), proj[p]);
  }
  return state.phase;
}

// Evidence lower bound of the current state; diagnostic only.
inline double elbo(const Hyperparameters& hyper, const MeasurementSet& ms,
                   const PosteriorState& state) {
  ms.validate();
  hyper.validate();
  auto ws = detail::VemWorkspace::for_run(ms, hyper);
  return detail::elbo_ws(hyper, ms, ws, state);
}

// Starting state for the iteration: phases from x0's projections, the
// precision and noise factors at their priors.
inline PosteriorState warm_start(const MeasurementSet& ms,
                                 const Hyperparameters& hyper,
                                 const SignalMatrix& x0) {
  ms.validate();
  hyper.validate();
  auto ws = detail::VemWorkspace::for_run(ms, hyper);
  return detail::warm_start_ws(ms, hyper, x0, ws);
}

struct IterationStat {
  int iteration = 0;
  double max_rel_change = 0.0;
  std::optional<double> elbo;
};

struct VemResult {
  SignalMatrix estimate;
  PosteriorState state;
  std::vector<IterationStat> trace;
  bool converged = false;
  int iterations = 0;
};

// Variational EM for low-rank phase retrieval. Each iteration runs the
// three factor updates (q_x, q_Sigma, q_beta) followed by the phase
// update; every step is an exact coordinate maximizer of the evidence
// bound, so the bound never decreases. Stops when the largest relative
// column change drops below tol.
inline VemResult run_vem(const MeasurementSet& ms, const Hyperparameters& hyper,
                         const SignalMatrix& x0, const VemOptions& opts = {}) {
  ms.validate();
  hyper.validate();
  opts.validate();
  if (x0.rows() != ms.n || x0.cols() != ms.m)
    throw Error("run_vem: starting point has wrong shape");
  if (hyper.w_scale.rows() != ms.n)
    throw Error("run_vem: w_scale dimension mismatch");

  auto ws = detail::VemWorkspace::for_run(ms, hyper);
  VemResult result;
  result.state = detail::warm_start_ws(ms, hyper, x0, ws);
  auto& state = result.state;

  std::vector<ComplexVector> prev_mu(ms.m);
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    for (Index m = 0; m < ms.m; ++m) prev_mu[m] = state.columns[m].mu;

    detail::update_qx_ws(ms, ws, state);
    detail::update_qsigma_ws(hyper, ws, state);
    detail::update_qbeta_ws(hyper, ms, ws, state);
    detail::update_theta_ws(ms, ws, state);
    state.iteration = iter;

    double delta = 0.0;
    for (Index m = 0; m < ms.m; ++m) {
      const double denom = std::max(prev_mu[m].norm(), 1e-12);
      delta = std::max(delta, (state.columns[m].mu - prev_mu[m]).norm() / denom);
    }

    IterationStat stat;
    stat.iteration = iter;
    stat.max_rel_change = delta;
    if (opts.compute_elbo) {
      try {
        stat.elbo = detail::elbo_ws(hyper, ms, ws, state);
      } catch (const NumericalOverflow&) {
        stat.elbo = std::nullopt;  // skip the diagnostic, keep iterating
      }
    }
    result.trace.push_back(stat);
    result.iterations = iter;

    if (delta < opts.tol) {
      result.converged = true;
      break;
    }
  }

  result.estimate.x.resize(ms.n, ms.m);
  for (Index m = 0; m < ms.m; ++m)
    result.estimate.x.col(m) = state.columns[m].mu;
  return result;
}

}  // namespace lrpr
