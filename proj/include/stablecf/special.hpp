#pragma once
// Special functions used across the library: complex log-gamma, the confluent
// hypergeometric series 1F1, normal distribution helpers, and the tail
// constant of the alpha-stable density.

#include <complex>

namespace stablecf::special {

// Log-gamma for complex argument (Lanczos approximation, reflection for
// Re z < 0.5).  Relative accuracy ~1e-13 on the arguments used here.
std::complex<double> log_gamma(std::complex<double> z);

// Confluent hypergeometric 1F1(a; b; z) by truncated power series.
// Converges rapidly for the moderate |z| this library produces.  `ok` (if
// non-null) reports whether the series reached `tol` within `max_terms`.
std::complex<double> hyp1f1(std::complex<double> a, double b,
                            std::complex<double> z, double tol = 1e-12,
                            int max_terms = 500, bool* ok = nullptr);

double norm_pdf(double x);
double norm_cdf(double x);
// Inverse standard normal CDF; u clamped to [1e-300, 1-1e-16].
double norm_quantile(double u);

// Regularized lower incomplete gamma P(a, x) and its inverse in x.
double gamma_p(double a, double x);
double gamma_p_inv(double a, double p);

// Regularized incomplete beta I_x(a, b) and its inverse in x.
double beta_inc(double a, double b, double x);
double beta_inc_inv(double a, double b, double p);

// Tail-amplitude constant of the standardized stable density: the density of
// S_{alpha,beta}(0,1) behaves like (alpha/2) * C(alpha) * (1 + beta sgn x) *
// |x|^{-alpha-1} far in the tails, with C(alpha) = (1-alpha) /
// (Gamma(2-alpha) cos(pi alpha/2)) and the continuous limit 2/pi at alpha=1.
// Equivalently the survival function behaves like (C(alpha)/2)(1+beta) x^{-alpha}.
// Cauchy check: alpha=1, beta=0 gives density amplitude 1/pi.
double stable_tail_constant(double alpha);

// log(sum_i exp(x_i)) guarded against overflow.
double log_sum_exp(const double* x, int n);

// Digamma function (real argument > 0).
double digamma(double x);

}  // namespace stablecf::special
