#pragma once
// Univariate alpha-stable primitives: log characteristic function in two
// parameterizations, FFT density inversion, a CDF/quantile object built on
// the numeric density, and the Chambers-Mallows-Stuck sampler.

#include "stablecf/pchip.hpp"
#include "stablecf/rng.hpp"

#include <complex>
#include <cstddef>
#include <vector>

namespace stablecf {

// |alpha - 1| below this threshold routes to the alpha = 1 formulas, whose
// limiting form replaces the tan(pi alpha / 2) blow-up.
inline constexpr double kBranchEps = 1e-6;

// Two standard parameterizations of the same family:
//  - Zolotarev: the classical form; its CF is discontinuous in alpha at 1.
//  - Nolan: the S0 form, continuous in all parameters; here `mu` holds the
//    S0 location delta.
enum class Form { Zolotarev, Nolan };

struct StableParams {
  double alpha = 2.0;  // characteristic exponent in (0, 2]
  double beta = 0.0;   // skewness in [-1, 1]
  double mu = 0.0;     // location (Zolotarev mu, or Nolan delta)
  double sigma = 1.0;  // scale > 0
  Form form = Form::Zolotarev;

  bool valid() const {
    return alpha > 0.0 && alpha <= 2.0 && beta >= -1.0 && beta <= 1.0 &&
           sigma > 0.0;
  }
};

bool alpha_is_one(double alpha);

// log E exp(i tau X) for the given parameterization.  Total on valid
// params; log_cf(p, -tau) = conj(log_cf(p, tau)).
std::complex<double> log_cf(const StableParams& p, double tau);
std::complex<double> cf(const StableParams& p, double tau);

// Exact location remaps between the two forms (identity for beta = 0).
StableParams to_zolotarev(const StableParams& p);
StableParams to_nolan(const StableParams& p);

// Tabulated density on the uniform grid x_k = x0 + k h, k = 0..N-1, with
// N = 2^n_log2 and the grid centered so that x_{N/2} = 0 before the location
// shift.  Values are the FFT inversion of the CF; because the inversion
// samples the CF on a finite grid, the result is the exact density only up
// to wrap-around of tail mass with period N h (the trapezoid mass over the
// table is therefore ~1 even when N h is small).
struct DensityTable {
  double x0 = 0.0;
  double h = 0.0;
  std::vector<double> values;
  StableParams params;

  std::size_t size() const { return values.size(); }
  double x_at(std::size_t k) const { return x0 + static_cast<double>(k) * h; }
  double trapezoid_mass() const;
  // Linear interpolation between ordinates; 0 outside the table.
  double interpolate(double x) const;
};

// Alternating-sign FFT inversion of the CF.  n_log2 in [10, 20]; h > 0.
// Throws NumericError if any CF value is non-finite, if the imaginary
// residue of an ordinate exceeds 1e-8, or if an ordinate is more negative
// than -1e-10 (negatives smaller than that are clipped to zero).
DensityTable density_fft(const StableParams& p, int n_log2 = 16,
                         double h = 1e-4);

// How density/CDF behave beyond the tabulated range.
enum class TailMode {
  Pareto,  // power tails A |x|^{-alpha-1} matched continuously at the edges
  None,    // no mass outside the table (CDF rescaled to end exactly at 1)
};

// Density, CDF and quantile function for one parameter point, built from a
// standardized density table plus matched power tails.  The CDF is the
// cumulative trapezoid of the table (plus tail mass), normalized to reach
// exactly 1; the quantile inverts the same monotone interpolant, so the
// round trip F^{-1}(F(x)) = x holds to solver tolerance on the interior.
class StableDist {
 public:
  explicit StableDist(const StableParams& p, int n_log2 = 16, double h = 2e-3,
                      TailMode tails = TailMode::Pareto);

  double pdf(double x) const;
  double log_pdf(double x) const;
  double cdf(double x) const;
  // u outside the invertible range clamps to the table edge; `clamped`
  // (if non-null) reports when that happened.
  double quantile(double u, bool* clamped = nullptr) const;

  const StableParams& params() const { return params_; }
  // Data-units range covered by the table.
  double table_lo() const;
  double table_hi() const;

 private:
  double std_pdf(double z) const;
  double std_cdf(double z) const;
  double std_quantile(double u, bool* clamped) const;

  StableParams params_;       // as supplied
  double delta0_ = 0.0;       // S0 location: x = delta0 + sigma z
  double sigma_ = 1.0;
  TailMode tails_;
  // Standardized table for S0(alpha, beta, 0, 1).
  double x0_ = 0.0, h_ = 0.0;
  std::vector<double> dens_;
  std::vector<double> cdf_;   // normalized CDF at the table nodes
  double A_neg_ = 0.0, A_pos_ = 0.0;  // tail amplitudes (standardized)
  double mass_lo_ = 0.0, mass_hi_ = 0.0;  // normalized tail masses
  double norm_ = 1.0;                 // total mass (table + tails)
  Pchip interp_;              // strictly increasing CDF knots
  double knot_ulo_ = 0.0, knot_uhi_ = 1.0;
};

// Sum of log densities of iid data under the tabulated density with matched
// power tails; positive everywhere, so the result is always finite for
// finite data.
double stable_loglik(const std::vector<double>& data, const StableParams& p,
                     int n_log2 = 13, double h = 2e-3);

// S_{alpha,beta}(0,1) draw in the Zolotarev form (Chambers-Mallows-Stuck).
double sample_standard(double alpha, double beta, Rng& rng);
// Draw from the full parameter set.  For alpha = 1 the scale enters the
// location as mu + (2/pi) beta sigma log sigma, matching log_cf's
// Zolotarev branch; Nolan-form inputs are remapped first.
double sample_one(const StableParams& p, Rng& rng);
std::vector<double> sample(const StableParams& p, std::size_t n, Rng& rng);

}  // namespace stablecf
