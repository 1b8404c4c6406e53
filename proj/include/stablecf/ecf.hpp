#pragma once
// Empirical characteristic function (ECF) tools: evaluation grids, the
// maximum CF-distance statistic with simulated critical values, and the
// quasi-likelihood family based on the asymptotic normality of the ECF,
// including normal-mixture and Student-t-mixture refinements and a
// Metropolis fitter with an optional learnable grid.

#include "stablecf/chain.hpp"
#include "stablecf/rng.hpp"
#include "stablecf/stable.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace stablecf {

// Strictly increasing positive frequencies tau_1 < ... < tau_K with tau_0 = 0
// and the mirrored negatives implied.  K is limited to [1, 50].  The
// increment parameterization writes tau_j = tau_{j-1} + h_j^2 so that a grid
// is equivalently (tau_1, h_2, ..., h_K).
class CharGrid {
 public:
  explicit CharGrid(std::vector<double> taus);
  // Build from tau_1 > 0 and squared increments h_2..h_K.
  static CharGrid from_increments(double tau1, const std::vector<double>& h);
  // Fixed preset tau_k = pi k / 25 with K = 15.
  static CharGrid koutrouvelis();
  // tau_k = a k / count for k = 1..count.
  static CharGrid scaled(double a, int count);

  const std::vector<double>& taus() const { return taus_; }
  std::size_t size() const { return taus_.size(); }  // K
  double tau(std::size_t k) const { return k == 0 ? 0.0 : taus_[k - 1]; }
  // Recover (tau_1, h_2..h_K); h_j = sqrt(tau_j - tau_{j-1}).
  std::vector<double> increments() const;

 private:
  std::vector<double> taus_;
};

// Sample average of exp(i tau y) over the data at each point of `taus`.
std::vector<std::complex<double>> ecf(const std::vector<double>& data,
                                      const std::vector<double>& taus);

// Stacked real representation used by the quasi-likelihoods: the first K+1
// entries are Re phi at {0, tau_1..tau_K}, the last K are Im phi at
// {tau_1..tau_K}; dimension 2K+1.
Eigen::VectorXd ecf_stacked(const std::vector<double>& data,
                            const CharGrid& grid);
Eigen::VectorXd cf_stacked(const StableParams& p, const CharGrid& grid);

// How CF-vs-ECF differences at the grid points are reduced to one number:
// the modulus of the complex difference, or the larger of |Re| and |Im|
// (the convention used by the distributed critical-value tables).
enum class DNorm { Modulus, Component };

// Ten equally spaced points spanning [-0.5, 0.5].
std::vector<double> default_d_grid();
// Twenty equally spaced points spanning [-2, 2].
std::vector<double> wide_d_grid();

// Largest CF-vs-ECF discrepancy over the grid.
double d_statistic(const std::vector<double>& data, const StableParams& p,
                   const std::vector<double>& taus,
                   DNorm norm = DNorm::Modulus);

struct CriticalValueRow {
  double level = 0.0;
  double value = 0.0;
};

struct CriticalValueTable {
  StableParams params;
  std::size_t n = 0;
  std::size_t nsim = 0;
  std::uint64_t seed = 0;
  std::string grid_id;
  std::vector<CriticalValueRow> rows;
  double at(double level) const;  // exact-level lookup
};

// Empirical quantiles of the distance statistic over `nsim` simulated
// samples of size n from p.  Replication r uses Rng(seed, r), so the table
// is reproducible and independent of scheduling.
CriticalValueTable critical_value_table(const StableParams& p, std::size_t n,
                                        const std::vector<double>& taus,
                                        std::size_t nsim,
                                        const std::vector<double>& levels,
                                        std::uint64_t seed,
                                        DNorm norm = DNorm::Component,
                                        int threads = 0,
                                        const std::string& grid_id = "");

// Append rows (alpha, beta, n, level, grid_id, value, nsim, seed) to a CSV,
// writing the header when the file does not yet exist.
void append_critical_values_csv(const CriticalValueTable& table,
                                const std::string& path);

// Asymptotic covariance of sqrt(n) (zhat - z) for the stacked ECF vector,
// assembled from the model CF, regularized and eigen-factored.
struct AnfCov {
  Eigen::MatrixXd sigma;      // before regularization
  double reg_eps = 0.0;
  Eigen::MatrixXd vectors;    // eigenvectors of sigma + reg_eps I
  Eigen::VectorXd values;     // eigenvalues floored at 1e-6

  double log_det() const;                        // sum of log eigenvalues
  double quad(const Eigen::VectorXd& r) const;   // r' (regularized)^{-1} r
};

AnfCov anf_covariance(const StableParams& p, const CharGrid& grid,
                      double reg_eps = 1e-8);

// Quasi-log-likelihood: -1/2 sum log s_i - (n/2) r' Sigma~^{-1} r with
// r = zhat - z(p).  The overload taking data recomputes the stacked ECF.
double anf_loglik(const StableParams& p, const Eigen::VectorXd& zhat,
                  std::size_t n, const CharGrid& grid, double reg_eps = 1e-8);
double anf_loglik(const StableParams& p, const std::vector<double>& data,
                  const CharGrid& grid, double reg_eps = 1e-8);

enum class RefinedKind { NormalMixture, StudentMixture };

// Mixture refinements sharing one covariance factorization.  For
// NormalMixture, `scales` holds variance multipliers h_g > 0; for
// StudentMixture it holds degrees of freedom nu_g > 2.  Weights default to
// uniform.  With one normal component at h = 1 this equals anf_loglik up to
// a constant in (n, K).
double refined_loglik(const StableParams& p, const Eigen::VectorXd& zhat,
                      std::size_t n, const CharGrid& grid, RefinedKind kind,
                      const std::vector<double>& scales,
                      std::vector<double> weights = {}, double reg_eps = 1e-8);
double refined_loglik(const StableParams& p, const std::vector<double>& data,
                      const CharGrid& grid, RefinedKind kind,
                      const std::vector<double>& scales,
                      std::vector<double> weights = {}, double reg_eps = 1e-8);

// log(mean(exp(x_i))) guarded against overflow.
double log_mean_exp(const std::vector<double>& x);

struct LaplaceResult {
  double value = 0.0;
  // true when the curvature needed eigenvalue flooring to be usable
  bool curvature_adjusted = false;
};

// Laplace approximation to a log marginal likelihood: log-posterior height
// at the mode plus (d/2) log 2 pi - 1/2 log |curvature|, where `curvature`
// is the negative Hessian of loglik + log_prior at `mode`.
LaplaceResult laplace_log_marginal(
    const std::function<double(const Eigen::VectorXd&)>& loglik,
    const std::function<double(const Eigen::VectorXd&)>& log_prior,
    const Eigen::VectorXd& mode, const Eigen::MatrixXd& curvature);

// Simulation-corrected variant: log of the average likelihood over draws of
// the conditioning variables plus the Gaussian volume of `covariance`
// ((d/2) log 2 pi + 1/2 log |covariance|).  With one draw this is the plain
// Laplace value evaluated at that draw.
double sim_corrected_log_marginal(const std::vector<double>& loglik_draws,
                                  const Eigen::MatrixXd& covariance);

// Prior over the evaluation grid and its size: tau_1 has density
// proportional to 1/tau_1 on [tau1_min, tau1_max], the squared-root
// increments h_j are N(0, omega^2), and K is either uniform on {1..kmax} or
// a truncated Poisson.
struct GridPrior {
  double omega = 0.24;
  bool poisson_k = false;
  double lambda = 15.0;
  int kmax = 50;
  double tau1_min = 1e-3;
  double tau1_max = 6.283185307179586;

  double log_k_prior(int k) const;
  // log density of (tau_1, h_2..h_K) given K; -inf when out of support.
  double log_grid_density(const CharGrid& grid) const;
};

struct AnfOptions {
  std::size_t iters = 4000;
  std::size_t burnin = 1000;
  std::size_t thin = 1;
  // random-walk scales for (alpha, beta, mu, log sigma)
  double step_alpha = 0.04;
  double step_beta = 0.08;
  double step_mu = 0.05;
  double step_log_sigma = 0.05;
  // which of (alpha, beta, mu, sigma) move; fixed ones keep their init value
  bool estimate_alpha = true;
  bool estimate_beta = true;
  bool estimate_mu = true;
  bool estimate_sigma = true;
  // Initial values; the fitter works in the init's parameter form (the
  // location-adjusted form stays continuous across alpha = 1).
  StableParams init{1.5, 0.0, 0.0, 1.0, Form::Nolan};
  double alpha_min = 0.5;
  double alpha_max = 2.0;
  double reg_eps = 1e-8;
  // grid learning
  bool learn_grid = false;
  GridPrior grid_prior;
  double step_tau1 = 0.05;    // random-walk scale on log tau_1
  double step_h = 0.08;       // random-walk scale on each h_j
  // quasi-likelihood refinement used as the target (plain ANF by default)
  bool use_refined = false;
  RefinedKind refined_kind = RefinedKind::NormalMixture;
  std::vector<double> refined_scales{1.0};
};

struct AnfFit {
  Chain chain;              // alpha, beta, mu, sigma [, K when learned]
  double accept_theta = 0.0;
  double accept_grid = 0.0;
  double accept_k = 0.0;
  CharGrid final_grid{std::vector<double>{1.0}};
};

// Random-walk Metropolis over the distribution parameters (and optionally
// the grid) targeting the ECF quasi-posterior with prior 1/sigma on scale.
AnfFit fit_anf(const std::vector<double>& data, const CharGrid& grid,
               const AnfOptions& options, Rng& rng);

}  // namespace stablecf
