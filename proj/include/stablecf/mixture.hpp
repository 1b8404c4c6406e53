#pragma once
// Finite normal-mixture surrogates: KL-projection of a stable density onto a
// Gaussian mixture, the closed-form mixture CF, a CF-matching map from
// mixture draws back to stable parameters, least-squares mixture fits to the
// law of log(eps^2) for stable eps, and a persistable (alpha, beta) table of
// precomputed mixtures with multilinear interpolation.

#include "stablecf/rng.hpp"
#include "stablecf/stable.hpp"

#include <complex>
#include <string>
#include <vector>

namespace stablecf {

struct MixtureModel {
  std::vector<double> weights;  // nonnegative, sum to 1
  std::vector<double> means;
  std::vector<double> sds;      // all positive

  std::size_t size() const { return weights.size(); }
  bool valid() const;
  double pdf(double x) const;
  double mean() const;      // sum w_m mu_m
  double sample(Rng& rng) const;
  // Components sorted by ascending mean (ties by sd); keeps persisted
  // tables and label-free comparisons stable.
  void canonicalize();
};

// Closed-form mixture characteristic function
// sum_m w_m exp(i mu_m tau - sigma_m^2 tau^2 / 2).
std::complex<double> mixture_cf(const MixtureModel& mix, double tau);

struct MixtureFit {
  MixtureModel model;
  double objective = 0.0;   // KL divergence or least-squares CF error
  int requested_m = 0;      // components asked for
  bool pruned = false;      // a degenerate component was removed and refit
};

// Projects the stable density onto an m-component Gaussian mixture by
// minimizing KL(f || mix) with trapezoid quadrature on the FFT grid
// restricted to `domain` = [-half_width, half_width].  half_width <= 0
// selects the default: 12, widened to 16 for alpha <= 1.3.  Multi-start
// (8 deterministic initializations) EM with a quasi-Newton polish; a
// component collapsing in weight or scale is pruned and the fit restarted
// with one component fewer (flagged in the result).
MixtureFit fit_mixture_kl(const StableParams& p, int m,
                          double half_width = 0.0);

struct BackMapResult {
  StableParams params;
  double objective = 0.0;
  bool flagged = false;  // objective above 1e-2: draw not identifiable
};

// Per-draw bounded minimization of sum_i |phi_stable(tau_i) - phi_mix(tau_i)|^2
// over (alpha, beta, mu, sigma).  Draws are solved independently but warm
// started from the previous solution.  Requires at least 4 grid points.
std::vector<BackMapResult> mixture_draws_to_stable(
    const std::vector<MixtureModel>& draws, const std::vector<double>& taus);

// Convenience single-draw version.
BackMapResult mixture_to_stable(const MixtureModel& mix,
                                const std::vector<double>& taus);

// Same bounded CF matching against arbitrary target CF values (for example
// an empirical CF); `warm` optionally seeds the first start.
BackMapResult cf_values_to_stable(const std::vector<double>& taus,
                                  const std::vector<std::complex<double>>& targets,
                                  const StableParams* warm = nullptr);

// Quick method-of-CF point estimate of stable parameters from data.
BackMapResult ecf_to_stable(const std::vector<double>& data,
                            const std::vector<double>& taus);

// Fits a mixture to the law of u = log(eps^2), eps ~ S_{alpha,beta}(0,1), by
// least squares between the mixture CF and the simulated CF of u on `taus`
// (default: 100 equally spaced points on [-0.5, 0.5]).  Needs s >= 10^4
// simulation draws.
MixtureFit fit_logsq_mixture(double alpha, double beta, int m, Rng& rng,
                             std::size_t s = 10000,
                             std::vector<double> taus = {});

// Mean of log|X| for standard S_{alpha,beta}(0,1) in the location-free
// convention; the mean of log(X^2) is twice this.  Used as an oracle for
// the log-squared mixture fits.
double stable_log_abs_mean(double alpha, double beta);

// Precomputed mixtures over an (alpha, beta) rectangle.  All nodes share
// the same component count; interpolation is multilinear per component on
// (weight, mean, sd) with weights renormalized.
class MixtureTable {
 public:
  MixtureTable(std::vector<double> alphas, std::vector<double> betas,
               std::vector<MixtureModel> nodes);

  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& betas() const { return betas_; }
  const MixtureModel& at(std::size_t i, std::size_t j) const;
  MixtureModel interpolate(double alpha, double beta) const;

  void write(const std::string& path) const;
  static MixtureTable read(const std::string& path);

 private:
  std::vector<double> alphas_, betas_;
  std::vector<MixtureModel> nodes_;  // alpha-major
};

// Node grids used for the distributed general-stable table: 51 values of
// alpha on [1.20, 1.90] and 51 values of beta on [-0.90, 0.90].
std::vector<double> default_table_alphas();
std::vector<double> default_table_betas();

// Runs fit_mixture_kl at every (alpha, beta) node for standardized
// parameters.  Deterministic; independent nodes may run on several threads.
MixtureTable build_mixture_table(const std::vector<double>& alphas,
                                 const std::vector<double>& betas, int m,
                                 int threads = 0);

}  // namespace stablecf
