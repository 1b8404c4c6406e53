#pragma once
// Stochastic volatility and GARCH with heavy-tailed innovations: simulation,
// the exact joint characteristic function of the log-squared Gaussian-SV
// block, moving-block empirical-CF summaries, and Bayesian fitters (an
// indicator-augmented Gibbs sampler on the linearized SV model, a mixture
// pseudo-likelihood GARCH sampler, and whole-model ABC for both).

#include "stablecf/abc.hpp"
#include "stablecf/chain.hpp"
#include "stablecf/rng.hpp"
#include "stablecf/stable.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace stablecf {

// Log-volatility AR(1):
//   h_t = delta + rho h_{t-1} + v_t,   v_t ~ N(0, omega2) iid,
//   Y_t = exp(h_t / 2) eps_t,          eps_t ~ innovation (standardized).
// `psi` is the correlation between eps_t and the next period's volatility
// shock v_{t+1} (leverage).  Nonzero psi requires Gaussian innovations
// (alpha = 2, beta = 0, mu = 0): the leverage channel couples to the
// standardized normal eps_t / (sigma sqrt 2).
struct SvParams {
  double delta = 0.0;
  double rho = 0.9;
  double omega2 = 0.04;
  double psi = 0.0;
  // Default innovation: exact standard normal (alpha = 2 at scale 1/sqrt 2).
  StableParams innovation{2.0, 0.0, 0.0, 0.7071067811865476};

  bool valid() const;
};

struct SvPath {
  std::vector<double> y;  // observed series
  std::vector<double> h;  // latent log-volatility
};

// Simulates n steps from the stationary distribution of h (h_1 drawn from
// N(delta/(1-rho), omega2/(1-rho^2))).  Deterministic per rng state.
SvPath sv_simulate(const SvParams& p, std::size_t n, Rng& rng);

// Joint characteristic function of one stationary block
// (X_t, ..., X_{t+k-1}) of the log-squared Gaussian-SV process
// X_t = log Y_t^2, evaluated at the frequency vector `taus` (k >= 1).
// Requires Gaussian innovations (alpha = 2, beta = 0, mu = 0; any scale).
// The confluent-hypergeometric factors are summed to 1e-12 with at most 500
// terms; `ok` (if non-null) reports series convergence.
std::complex<double> sv_gaussian_joint_cf(const SvParams& p,
                                          const std::vector<double>& taus,
                                          bool* ok = nullptr);

// Frequency matrices for moving-block CF summaries: `count` matrices of
// shape rows x cols with standard-normal entries normalized to unit
// Frobenius norm, then scaled by radii equally spaced on [lo, hi]
// (single radius lo when count == 1).  Deterministic per seed.
std::vector<Eigen::MatrixXd> tau_matrix_grid(std::size_t count,
                                             std::size_t rows,
                                             std::size_t cols, double lo,
                                             double hi, std::uint64_t seed);

// Moving-block empirical CF summary: for each frequency matrix T (d x b)
// averages exp(i <T, block_t>_F) over the n-b+1 blocks whose columns are the
// consecutive rows t..t+b-1 of `data` (n x d).  Returns the stacked vector
// [Re phi_hat(T_1..T_G); Im phi_hat(T_1..T_G)].
Eigen::VectorXd block_ecf(const Eigen::MatrixXd& data,
                          const std::vector<Eigen::MatrixXd>& taus);
// Univariate convenience overload (d = 1).
Eigen::VectorXd block_ecf(const std::vector<double>& x,
                          const std::vector<Eigen::MatrixXd>& taus);

// Robust spread used to scale frequency grids: 1.4826 * median |x - med(x)|,
// falling back to the plain standard deviation when the MAD degenerates.
double robust_spread(const std::vector<double>& x);

enum class SvMethod { MixtureGibbs, Abc };

struct SvFitConfig {
  std::size_t iters = 120000;
  std::size_t burnin = 20000;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  // shape support (shared by both methods)
  double alpha_min = 1.1;
  double alpha_max = 2.0;
  // Gibbs method: mixture resolution and shape random-walk steps
  int mixture_components = 5;
  double step_alpha = 0.05;
  double step_beta = 0.1;
  // ABC method: moving-block summary and kernel controls
  std::size_t block = 2;
  std::size_t freq_count = 20;
  double tau_lo = 0.1;
  double tau_hi = 2.0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();  // NaN: pilot
  double target_rate = 0.25;
  bool adapt = true;
  // ABC random-walk steps on (delta, rho, log omega2, alpha, beta)
  std::vector<double> abc_steps{0.05, 0.03, 0.15, 0.05, 0.1};
};

struct SvFit {
  Chain chain;  // delta, rho, omega2, alpha, beta
  double accept_rate = 0.0;
  double shape_accept_rate = 0.0;  // Gibbs only: (alpha, beta) block
  double final_epsilon = 0.0;      // ABC only
  // Posterior of rho about as wide as its prior: the data carry next to no
  // volatility-persistence information (e.g. omega2 ~ 0).
  bool rho_uninformative = false;
};

// Fits the stable-innovation SV model to a return series.
//   MixtureGibbs: linearizes X_t = log y_t^2 = h_t + log eps_t^2, augments
//     with component indicators of a normal-mixture surrogate for
//     log eps_t^2, samples h by forward-filter backward-sampling, (delta,
//     rho) by conjugate regression, omega2 by inverse gamma, and (alpha,
//     beta) by a Metropolis step scoring the ECF quasi-likelihood of the
//     standardized residuals y_t exp(-h_t/2).
//   Abc: accept-if-close Metropolis on (delta, rho, log omega2, alpha,
//     beta) with the moving-block ECF of the log-squared series as summary.
SvFit fit_sv_stable(const std::vector<double>& y, SvMethod method,
                    const SvFitConfig& config);

// GARCH(1,1) with standardized stable innovations:
//   h_t = a0 + a1 (X_{t-1} - mu)^2 + a2 h_{t-1},  X_t = mu + sqrt(h_t) eps_t.
struct GarchParams {
  double a0 = 0.01;
  double a1 = 0.1;
  double a2 = 0.8;
  double mu = 0.0;
  StableParams innovation{1.7, 0.0, 0.0, 1.0};

  bool valid() const;
};

// Simulates warmup + n steps starting from h_1 = a0 / max(1 - a2, 0.05) and
// returns the last n observations.
std::vector<double> garch_simulate(const GarchParams& p, std::size_t n,
                                   Rng& rng, std::size_t warmup = 200);

enum class GarchMethod { Abc, Mixture };

struct GarchFitConfig {
  std::size_t iters = 120000;
  std::size_t burnin = 20000;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  double mu = 0.0;  // fixed location
  double alpha_min = 1.1;
  double alpha_max = 2.0;
  // random-walk steps on (log a0, a1, a2, alpha, beta) for the mixture method
  std::vector<double> steps{0.25, 0.05, 0.05, 0.05, 0.1};
  // ABC proposal steps; log a0 moves boldly because the increment summary is
  // scale-free, leaving that coordinate prior-dominated on drifting paths
  std::vector<double> abc_steps{1.0, 0.05, 0.05, 0.05, 0.1};
  // Mixture method resolution
  int mixture_components = 5;
  std::size_t variance_init_window = 20;  // h_1 = mean((x-mu)^2) over this
  // ABC summary and kernel controls
  std::size_t block = 2;
  std::size_t freq_count = 20;
  double tau_lo = 0.1;
  double tau_hi = 2.0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double target_rate = 0.15;
  bool adapt = true;
  std::size_t warmup = 200;  // simulation pre-period (ABC)
};

struct GarchFit {
  Chain chain;  // a0, a1, a2, alpha, beta
  double accept_rate = 0.0;
  double final_epsilon = 0.0;  // ABC only
  // Share of retained draws with a1 + a2 >= 1.  With heavy-tailed
  // innovations the stationarity frontier differs from the Gaussian
  // a1 + a2 < 1 rule, so such draws are reported, not rejected.
  double explosive_share = 0.0;
};

// Fits the stable GARCH model.  Abc: whole-model ABC with the moving-block
// ECF of the returns as summary.  Mixture: random-walk Metropolis on a
// pseudo-likelihood that evaluates log((x_t - mu)^2) - log h_t under the
// normal-mixture surrogate of log eps^2 (the observation-side Jacobian is
// parameter-free and drops from the ratio).
GarchFit fit_garch_stable(const std::vector<double>& x, GarchMethod method,
                          const GarchFitConfig& config);

// Gaussian quasi-likelihood fit of (delta, rho, omega2) by Kalman filtering
// the log-squared series x_t = log y_t^2 = h_t + noise, with the noise
// moments of log chi^2_1 (mean psi(1/2) + log 2, variance pi^2/2).  Used as
// an oracle for Gaussian-subcase comparisons.
struct SvQmlFit {
  double delta = 0.0;
  double rho = 0.0;
  double omega2 = 0.0;
  double loglik = 0.0;
  bool converged = false;
};

SvQmlFit sv_kalman_qml(const std::vector<double>& logsq);

}  // namespace stablecf
