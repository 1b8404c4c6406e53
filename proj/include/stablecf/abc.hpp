#pragma once
// Metropolized approximate Bayesian computation: a generative-model
// interface (simulate + summarize + distance), the accept-if-close
// Metropolis-Hastings kernel, multiplicative tolerance adaptation during
// burn-in, subsample-based independence proposals, and a plain Metropolis
// runner for targets whose log density is computable.

#include "stablecf/chain.hpp"
#include "stablecf/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace stablecf {

// Synthetic data are flat vectors; multivariate models flatten row-major and
// supply their own summarize.  Empty fields fall back to the defaults:
// summarize = stacked empirical CF on `taus`, distance = largest complex
// modulus difference across the paired (Re, Im) summary entries.
struct AbcModel {
  std::size_t n = 0;         // synthetic sample size per proposal
  std::vector<double> taus;  // summary grid for the default CF summary
  std::function<std::vector<double>(const Eigen::VectorXd&, std::size_t,
                                    Rng&)>
      simulate;
  std::function<Eigen::VectorXd(const std::vector<double>&)> summarize;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      distance;

  Eigen::VectorXd summary(const std::vector<double>& data) const;
  double summary_distance(const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b) const;
};

// Stacked CF summary: [Re phi_hat at taus; Im phi_hat at taus].
Eigen::VectorXd cf_summary(const std::vector<double>& data,
                           const std::vector<double>& taus);
// max_k sqrt(dRe_k^2 + dIm_k^2) over stacked summaries (even length
// required).
double max_modulus_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
// L-infinity distance between principal-branch log CFs reconstructed from
// stacked summaries.
double log_cf_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct AbcPrior {
  // Log density up to a constant; -infinity outside the support.
  std::function<double(const Eigen::VectorXd&)> log_density;
  // Exact sampler, used for initialization and prior-recovery checks.
  std::function<Eigen::VectorXd(Rng&)> sample;
};

struct AbcProposal {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)> sample;
  // log q(to; from); empty declares the proposal symmetric.
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      log_density;
};

// Componentwise Gaussian random walk (symmetric).
AbcProposal gaussian_rw_proposal(const Eigen::VectorXd& steps);
// As gaussian_rw_proposal but with the (symmetric) density filled in, for
// use as a mixture component.
AbcProposal gaussian_rw_density_proposal(const Eigen::VectorXd& steps);
// Independence multivariate Student-t proposal.
AbcProposal student_t_proposal(const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, double dof);
// Two-component mixture: draw from `a` with probability `weight`, else from
// `b`.  Both components must supply log_density (the mixture density is the
// weighted sum), making the result a valid Hastings proposal.
AbcProposal mixture_proposal(const AbcProposal& a, const AbcProposal& b,
                             double weight);

// Multivariate Student-t log density with the given centre/scale/dof.
double mvt_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov, double dof);
// Wishart draw with E[W] = dof * scale (Bartlett decomposition).
Eigen::MatrixXd wishart_sample(const Eigen::MatrixXd& scale, double dof,
                               Rng& rng);

struct AbcStepResult {
  Eigen::VectorXd theta;
  bool accepted = false;
  bool out_of_support = false;  // proposal outside prior support
  double dist = std::numeric_limits<double>::quiet_NaN();
};

// One kernel step: propose, simulate, and accept only when the summary
// distance is within epsilon AND the Metropolis-Hastings ratio on the prior
// (with proposal correction) accepts; otherwise the current state repeats.
// For fixed epsilon the kernel satisfies detailed balance with respect to
// the ABC posterior.  epsilon = +infinity skips the simulation.
AbcStepResult abc_mh_step(const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& observed_summary,
                          const AbcModel& model, const AbcProposal& proposal,
                          const AbcPrior& prior, double epsilon, Rng& rng);

// Multiplicative tolerance update toward the target acceptance rate;
// applied during burn-in only.
double adapt_epsilon(double rate, double epsilon, double target = 0.5,
                     double eta = 0.1);

struct AbcOptions {
  // NaN asks for pilot initialization: the median summary distance over 50
  // prior-predictive simulations.
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  std::size_t iters = 120000;  // total steps, burn-in included
  std::size_t burnin = 20000;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  bool adapt = true;
  double target_rate = 0.5;
  double eta = 0.1;
  std::size_t adapt_window = 100;
  Eigen::VectorXd init;  // empty: draw from the prior
};

struct AbcResult {
  Chain chain;
  std::vector<double> epsilon_trace;  // one entry per iteration
  double final_epsilon = 0.0;
  double accept_rate = 0.0;  // post burn-in
  std::size_t out_of_support = 0;
  std::uint64_t seed = 0;
  std::size_t thin = 1;

  explicit AbcResult(std::vector<std::string> names)
      : chain(std::move(names)) {}
};

AbcResult run_abc(const std::vector<double>& data, const AbcModel& model,
                  const AbcProposal& proposal, const AbcPrior& prior,
                  const std::vector<std::string>& names,
                  const AbcOptions& options);

// Plain Metropolis-Hastings on a computable log target (prior already
// folded in); epsilon-related options are ignored.
struct MhResult {
  Chain chain;
  double accept_rate = 0.0;

  explicit MhResult(std::vector<std::string> names) : chain(std::move(names)) {}
};

MhResult metropolis_chain(
    const std::function<double(const Eigen::VectorXd&)>& log_target,
    const AbcProposal& proposal, const std::vector<std::string>& names,
    const AbcOptions& options);

// Partition-based proposal crafting: split the observations into P nearly
// equal contiguous subsamples, fit each, and blend
//   V_bar = (1 / (2 S)) * sum_i (V_i + (theta_i - theta_bar)
//                                      (theta_i - theta_bar)')
// over the S surviving fits.  Failed fits are dropped; fewer than two
// survivors aborts.  dof = max(3, n_rows - dim).
struct SubsampleFit {
  Eigen::VectorXd theta;
  Eigen::MatrixXd cov;
  bool ok = true;
};

struct SubsampleProposal {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double dof = 3.0;
  std::size_t used = 0;     // surviving subsample fits
  std::size_t dropped = 0;  // failed subsample fits
};

SubsampleProposal subsample_proposal(
    const std::vector<Eigen::VectorXd>& rows, std::size_t P,
    const std::function<SubsampleFit(const std::vector<Eigen::VectorXd>&)>&
        fit);
SubsampleProposal subsample_proposal(
    const std::vector<double>& data, std::size_t P,
    const std::function<SubsampleFit(const std::vector<double>&)>& fit);

}  // namespace stablecf
