#include "stablecf/mv.hpp"

#include "stablecf/csv.hpp"
#include "stablecf/errors.hpp"
#include "stablecf/mixture.hpp"
#include "stablecf/special.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <utility>

namespace stablecf {

namespace {

using Cx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

void DiscreteSpectralMeasure::validate() const {
  if (weights.size() == 0 || atoms.rows() != weights.size())
    throw DataError("spectral measure: atom and weight counts disagree");
  if (atoms.cols() < 1)
    throw DataError("spectral measure: atoms need at least one coordinate");
  for (Eigen::Index j = 0; j < atoms.rows(); ++j) {
    if (std::abs(atoms.row(j).norm() - 1.0) > 1e-12)
      throw DataError("spectral measure: atom " + std::to_string(j) +
                      " is not on the unit sphere");
    if (!(weights(j) > 0.0))
      throw DataError("spectral measure: weight " + std::to_string(j) +
                      " is not strictly positive");
  }
}

DiscreteSpectralMeasure DiscreteSpectralMeasure::from_angles(
    const std::vector<double>& angles, const Eigen::VectorXd& weights) {
  DiscreteSpectralMeasure m;
  m.atoms.resize(static_cast<Eigen::Index>(angles.size()), 2);
  for (std::size_t j = 0; j < angles.size(); ++j) {
    m.atoms(static_cast<Eigen::Index>(j), 0) = std::cos(angles[j]);
    m.atoms(static_cast<Eigen::Index>(j), 1) = std::sin(angles[j]);
  }
  m.weights = weights;
  m.validate();
  return m;
}

void MvStableParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 2.0))
    throw DataError("multivariate stable: alpha must lie in (0, 2]");
  if (mu.size() < 1)
    throw DataError("multivariate stable: location vector is empty");
  if (has_discrete()) {
    const auto& m = discrete();
    m.validate();
    if (m.dim() != mu.size())
      throw DataError("multivariate stable: measure and location dimensions "
                      "disagree");
  } else {
    const auto& g = gaussian();
    if (g.dim != mu.size())
      throw DataError("multivariate stable: measure and location dimensions "
                      "disagree");
    if (!(g.omega2 > 0.0) || !(g.mass > 0.0))
      throw DataError("multivariate stable: Gaussian measure needs positive "
                      "omega2 and mass");
  }
}

std::complex<double> psi_alpha(double u, double alpha) {
  if (u == 0.0) return {0.0, 0.0};
  const double au = std::abs(u);
  const double sg = u > 0.0 ? 1.0 : -1.0;
  if (alpha_is_one(alpha))
    return {au, au * sg * (2.0 / kPi) * std::log(au)};
  const double mod = std::pow(au, alpha);
  return {mod, -mod * sg * std::tan(0.5 * kPi * alpha)};
}

namespace {

// E r^alpha for the radius of N(0, omega2 I_d) conditioned on the unit
// ball: both numerator and denominator reduce to regularized lower
// incomplete gamma functions evaluated at 1 / (2 omega2).
double ball_radial_moment(double alpha, double omega2, int dim) {
  const double r_edge = 1.0 / (2.0 * omega2);
  const double a_hi = 0.5 * (dim + alpha);
  const double a_lo = 0.5 * dim;
  const double ratio =
      special::gamma_p(a_hi, r_edge) / special::gamma_p(a_lo, r_edge);
  return std::pow(2.0 * omega2, 0.5 * alpha) *
         std::exp(std::lgamma(a_hi) - std::lgamma(a_lo)) * ratio;
}

// E |t|^alpha for t the cosine between a fixed direction and a uniform
// point on the sphere S^{d-1}: a ratio of beta functions.
double sphere_cosine_moment(double alpha, int dim) {
  if (dim <= 1) return 1.0;
  const double a = 0.5 * (dim - 1);
  return std::exp(std::lgamma(0.5 * (alpha + 1.0)) -
                  std::lgamma(0.5 * (alpha + 1.0) + a) - std::lgamma(0.5) +
                  std::lgamma(0.5 + a));
}

}  // namespace

std::complex<double> mv_exponent(const MvStableParams& p,
                                 const Eigen::VectorXd& tau, Rng* rng,
                                 std::size_t* draws_used) {
  p.validate();
  if (draws_used) *draws_used = 0;
  if (tau.size() != p.dim())
    throw DataError("mv_exponent: frequency dimension mismatch");
  if (p.has_discrete()) {
    const auto& m = p.discrete();
    Cx acc{0.0, 0.0};
    for (Eigen::Index j = 0; j < m.atoms.rows(); ++j)
      acc += m.weights(j) * psi_alpha(m.atoms.row(j).dot(tau), p.alpha);
    return acc;
  }
  const auto& g = p.gaussian();
  const double tnorm = tau.norm();
  if (tnorm == 0.0) return {0.0, 0.0};
  // The measure is symmetric, so the sgn-odd imaginary part of psi
  // integrates to zero exactly and only E |<tau, s>|^alpha remains.  That
  // expectation factors into the analytic radial moment times the sphere
  // cosine moment; the latter is what the Monte Carlo below estimates.
  const double scale =
      g.mass * ball_radial_moment(p.alpha, g.omega2, g.dim) *
      std::pow(tnorm, p.alpha);
  if (g.dim == 1) return {scale, 0.0};
  Rng fallback(0x5f3759df97f4a7c5ULL);
  Rng& r = rng ? *rng : fallback;
  const double a = 0.5 * (g.dim - 1);
  // Stratified inverse-CDF sampling of the cosine: one jittered draw per
  // equal-probability stratum.  Doubling continues until two successive
  // levels agree within 1e-3 on the full exponent value.
  double prev = std::numeric_limits<double>::quiet_NaN();
  double est = 0.0;
  std::size_t n = 25;
  for (;;) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(i) + r.uniform()) /
                       static_cast<double>(n);
      const double t = 2.0 * special::beta_inc_inv(a, a, u) - 1.0;
      sum += std::pow(std::abs(t), p.alpha);
    }
    est = sum / static_cast<double>(n);
    if (std::isfinite(prev) && std::abs(scale * (est - prev)) < 1e-3) break;
    if (n >= 102400) break;
    prev = est;
    n *= 2;
  }
  if (draws_used) *draws_used = n;
  return {scale * est, 0.0};
}

std::complex<double> mv_log_cf(const MvStableParams& p,
                               const Eigen::VectorXd& tau, Rng* rng,
                               std::size_t* draws_used) {
  const Cx expo = mv_exponent(p, tau, rng, draws_used);
  return -expo + Cx{0.0, p.mu.dot(tau)};
}

Eigen::MatrixXd mv_sample(const MvStableParams& p, std::size_t n, Rng& rng) {
  p.validate();
  if (!p.has_discrete())
    throw DataError("mv_sample: sampling needs a discrete spectral measure");
  const auto& m = p.discrete();
  const Eigen::Index J = m.atoms.rows();
  const Eigen::Index d = m.atoms.cols();
  // Weighted-atom representation: each atom contributes an independent
  // totally skewed standard stable factor along its direction, scaled by
  // gamma^{1/alpha}; at alpha = 1 the scale multiplies linearly and drags
  // in the (2/pi) gamma log gamma location drift.
  Eigen::VectorXd coef(J);
  Eigen::VectorXd base = p.mu;
  const bool one = alpha_is_one(p.alpha);
  for (Eigen::Index j = 0; j < J; ++j) {
    if (one) {
      coef(j) = m.weights(j);
      base += (2.0 / kPi) * m.weights(j) * std::log(m.weights(j)) *
              m.atoms.row(j).transpose();
    } else {
      coef(j) = std::pow(m.weights(j), 1.0 / p.alpha);
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  for (std::size_t t = 0; t < n; ++t) {
    Eigen::VectorXd x = base;
    for (Eigen::Index j = 0; j < J; ++j) {
      const double z = sample_standard(p.alpha, 1.0, rng);
      x += coef(j) * z * m.atoms.row(j).transpose();
    }
    out.row(static_cast<Eigen::Index>(t)) = x.transpose();
  }
  return out;
}

std::vector<std::complex<double>> mv_ecf(
    const Eigen::MatrixXd& data, const std::vector<Eigen::VectorXd>& taus) {
  if (data.rows() < 1) throw DataError("mv_ecf: empty data");
  std::vector<Cx> out;
  out.reserve(taus.size());
  for (const auto& tau : taus) {
    if (tau.size() != data.cols())
      throw DataError("mv_ecf: frequency dimension mismatch");
    Cx acc{0.0, 0.0};
    for (Eigen::Index t = 0; t < data.rows(); ++t) {
      const double arg = data.row(t).dot(tau);
      acc += Cx{std::cos(arg), std::sin(arg)};
    }
    out.push_back(acc / static_cast<double>(data.rows()));
  }
  return out;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     bool* ridged) {
  if (ridged) *ridged = false;
  if (A.rows() != b.size())
    throw DataError("nnls: matrix and vector row counts disagree");
  const Eigen::Index m = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  std::vector<char> passive(static_cast<std::size_t>(m), 0);
  const double wtol =
      1e-10 * std::max(1.0, (A.transpose() * b).cwiseAbs().maxCoeff());

  auto solve_passive = [&](const std::vector<Eigen::Index>& idx)
      -> Eigen::VectorXd {
    Eigen::MatrixXd ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(k) = A.col(idx[k]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ap);
    if (qr.rank() < static_cast<Eigen::Index>(idx.size())) {
      if (ridged) *ridged = true;
      const Eigen::Index np = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd normal = ap.transpose() * ap +
                               1e-8 * Eigen::MatrixXd::Identity(np, np);
      return normal.ldlt().solve(ap.transpose() * b);
    }
    return qr.solve(b);
  };

  const int guard = 100 + 50 * static_cast<int>(m);
  for (int outer = 0; outer < guard; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index best = -1;
    double best_w = wtol;
    for (Eigen::Index i = 0; i < m; ++i)
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = 1;
    for (int inner = 0; inner < guard; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < m; ++i)
        if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
      const Eigen::VectorXd s = solve_passive(idx);
      bool all_positive = true;
      for (Eigen::Index k = 0; k < s.size(); ++k)
        if (!(s(k) > 0.0)) all_positive = false;
      if (all_positive) {
        x.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = s(k);
        break;
      }
      double step = std::numeric_limits<double>::infinity();
      std::size_t drop = 0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (s(static_cast<Eigen::Index>(k)) > 0.0) continue;
        const double xi = x(idx[k]);
        const double denom = xi - s(static_cast<Eigen::Index>(k));
        const double ratio = denom > 0.0 ? xi / denom : 0.0;
        if (ratio < step) {
          step = ratio;
          drop = k;
        }
      }
      if (!std::isfinite(step)) step = 0.0;
      Eigen::VectorXd target = Eigen::VectorXd::Zero(m);
      for (std::size_t k = 0; k < idx.size(); ++k)
        target(idx[k]) = s(static_cast<Eigen::Index>(k));
      x += step * (target - x);
      x(idx[drop]) = 0.0;
      passive[static_cast<std::size_t>(idx[drop])] = 0;
      for (Eigen::Index i = 0; i < m; ++i)
        if (passive[static_cast<std::size_t>(i)] && x(i) <= 0.0) {
          x(i) = 0.0;
          passive[static_cast<std::size_t>(i)] = 0;
        }
    }
  }
  return x;
}

MeasureRecovery recover_discrete_measure(
    const std::vector<Eigen::VectorXd>& taus,
    const std::vector<std::complex<double>>& exponents, double alpha,
    const Eigen::MatrixXd& atoms) {
  if (taus.empty() || taus.size() != exponents.size())
    throw DataError("measure recovery: frequency and exponent counts "
                    "disagree");
  const Eigen::Index T = static_cast<Eigen::Index>(taus.size());
  const Eigen::Index J = atoms.rows();
  if (J < 1) throw DataError("measure recovery: no candidate atoms");
  Eigen::MatrixXd A(2 * T, J);
  Eigen::VectorXd b(2 * T);
  for (Eigen::Index i = 0; i < T; ++i) {
    if (taus[static_cast<std::size_t>(i)].size() != atoms.cols())
      throw DataError("measure recovery: frequency dimension mismatch");
    for (Eigen::Index j = 0; j < J; ++j) {
      const Cx ps = psi_alpha(
          atoms.row(j).dot(taus[static_cast<std::size_t>(i)]), alpha);
      A(i, j) = ps.real();
      A(T + i, j) = ps.imag();
    }
    b(i) = exponents[static_cast<std::size_t>(i)].real();
    b(T + i) = exponents[static_cast<std::size_t>(i)].imag();
  }
  MeasureRecovery out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  out.condition = smin > 0.0 ? sv(0) / smin
                             : std::numeric_limits<double>::infinity();
  out.ill_conditioned = !(out.condition < 1e12);
  out.weights = nnls(A, b, &out.ridged);
  out.residual = (A * out.weights - b).norm();
  return out;
}

ProjectedParams project_params(const MvStableParams& p,
                               const Eigen::VectorXd& tau) {
  p.validate();
  if (tau.size() != p.dim())
    throw DataError("project_params: direction dimension mismatch");
  ProjectedParams out;
  out.mu = p.mu.dot(tau);
  if (p.has_discrete()) {
    const auto& m = p.discrete();
    double pow_sum = 0.0;
    double signed_sum = 0.0;
    double log_drift = 0.0;
    for (Eigen::Index j = 0; j < m.atoms.rows(); ++j) {
      const double u = m.atoms.row(j).dot(tau);
      if (u == 0.0) continue;
      const double au = std::abs(u);
      const double term = m.weights(j) * std::pow(au, p.alpha);
      pow_sum += term;
      signed_sum += term * (u > 0.0 ? 1.0 : -1.0);
      log_drift += m.weights(j) * u * std::log(au);
    }
    if (pow_sum <= 0.0) {
      out.degenerate = true;
      return out;
    }
    out.sigma = std::pow(pow_sum, 1.0 / p.alpha);
    out.beta = signed_sum / pow_sum;
    // The alpha = 1 scaling law is affine rather than homogeneous, so the
    // projection acquires a logarithmic location drift.
    if (alpha_is_one(p.alpha)) out.mu -= (2.0 / kPi) * log_drift;
    return out;
  }
  const auto& g = p.gaussian();
  const double tnorm = tau.norm();
  if (tnorm == 0.0) {
    out.degenerate = true;
    return out;
  }
  const double pow_sum = g.mass *
                         ball_radial_moment(p.alpha, g.omega2, g.dim) *
                         std::pow(tnorm, p.alpha) *
                         sphere_cosine_moment(p.alpha, g.dim);
  out.sigma = std::pow(pow_sum, 1.0 / p.alpha);
  out.beta = 0.0;  // the measure is symmetric
  return out;
}

ProjectionEstimate projection_estimate(
    const Eigen::MatrixXd& data, const std::vector<Eigen::VectorXd>& directions,
    const Eigen::MatrixXd& atoms) {
  if (data.rows() < 10) throw DataError("projection estimate: too few rows");
  if (directions.empty())
    throw DataError("projection estimate: no directions supplied");
  const Eigen::Index d = data.cols();
  if (atoms.cols() != d)
    throw DataError("projection estimate: atom dimension mismatch");
  const Eigen::Index T = static_cast<Eigen::Index>(directions.size());

  ProjectionEstimate out;
  std::vector<double> sigmas(static_cast<std::size_t>(T));
  std::vector<double> betas(static_cast<std::size_t>(T));
  std::vector<double> mus(static_cast<std::size_t>(T));
  for (Eigen::Index i = 0; i < T; ++i) {
    const auto& v = directions[static_cast<std::size_t>(i)];
    if (v.size() != d)
      throw DataError("projection estimate: direction dimension mismatch");
    std::vector<double> y(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index t = 0; t < data.rows(); ++t)
      y[static_cast<std::size_t>(t)] = data.row(t).dot(v);
    // Scale the frequency grid by a robust spread so every projection is
    // probed where its CF is informative.
    const double center = median_of(y);
    std::vector<double> dev(y.size());
    for (std::size_t t = 0; t < y.size(); ++t)
      dev[t] = std::abs(y[t] - center);
    double spread = median_of(dev);
    if (!(spread > 0.0)) spread = 1.0;
    std::vector<double> taus(12);
    for (std::size_t k = 0; k < taus.size(); ++k)
      taus[k] = (0.15 + 0.15 * static_cast<double>(k)) / spread;
    const BackMapResult fit = ecf_to_stable(y, taus);
    out.alpha_per_direction.push_back(fit.params.alpha);
    sigmas[static_cast<std::size_t>(i)] = fit.params.sigma;
    betas[static_cast<std::size_t>(i)] = fit.params.beta;
    mus[static_cast<std::size_t>(i)] = fit.params.mu;
  }
  out.alpha = std::accumulate(out.alpha_per_direction.begin(),
                              out.alpha_per_direction.end(), 0.0) /
              static_cast<double>(T);

  // Location: least squares of <v_i, mu> = mu_i over the direction set.
  Eigen::MatrixXd V(T, d);
  Eigen::VectorXd rhs(T);
  for (Eigen::Index i = 0; i < T; ++i) {
    V.row(i) = directions[static_cast<std::size_t>(i)].transpose();
    rhs(i) = mus[static_cast<std::size_t>(i)];
  }
  out.mu = V.completeOrthogonalDecomposition().solve(rhs);

  // Weights: the per-direction scale and skewness pin two linear
  // functionals of the measure per direction,
  //   sum_j gamma_j |<v_i, s_j>|^alpha          = sigma_i^alpha
  //   sum_j gamma_j |<v_i, s_j>|^alpha sgn<...> = beta_i sigma_i^alpha,
  // valid for every alpha including 1; solve them by NNLS.
  Eigen::MatrixXd A(2 * T, atoms.rows());
  Eigen::VectorXd b(2 * T);
  for (Eigen::Index i = 0; i < T; ++i) {
    for (Eigen::Index j = 0; j < atoms.rows(); ++j) {
      const double u = atoms.row(j).dot(directions[static_cast<std::size_t>(i)]);
      const double mag = u == 0.0 ? 0.0 : std::pow(std::abs(u), out.alpha);
      A(i, j) = mag;
      A(T + i, j) = mag * (u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0));
    }
    const double pow_scale =
        std::pow(sigmas[static_cast<std::size_t>(i)], out.alpha);
    b(i) = pow_scale;
    b(T + i) = betas[static_cast<std::size_t>(i)] * pow_scale;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  out.measure.condition = smin > 0.0
                              ? sv(0) / smin
                              : std::numeric_limits<double>::infinity();
  out.measure.ill_conditioned = !(out.measure.condition < 1e12);
  out.measure.weights = nnls(A, b, &out.measure.ridged);
  out.measure.residual = (A * out.measure.weights - b).norm();
  return out;
}

Eigen::MatrixXd circle_atoms(int count) {
  if (count < 1) throw DataError("circle_atoms: count must be positive");
  Eigen::MatrixXd out(count, 2);
  for (int j = 0; j < count; ++j) {
    const double ang = 2.0 * kPi * static_cast<double>(j) /
                       static_cast<double>(count);
    out(j, 0) = std::cos(ang);
    out(j, 1) = std::sin(ang);
  }
  return out;
}

Eigen::MatrixXd sphere_atoms(int count, int dim, bool antipodal) {
  if (count < 1) throw DataError("sphere_atoms: count must be positive");
  if (dim < 2) throw DataError("sphere_atoms: dimension must be at least 2");
  Eigen::MatrixXd base;
  if (dim == 2) {
    base = circle_atoms(count);
  } else {
    // Seeded uniform directions: deterministic for a given (count, dim).
    Rng rng(0x20240817ULL + static_cast<std::uint64_t>(dim));
    base.resize(count, dim);
    for (int j = 0; j < count; ++j) {
      Eigen::VectorXd v(dim);
      double norm = 0.0;
      do {
        for (int c = 0; c < dim; ++c) v(c) = rng.normal();
        norm = v.norm();
      } while (!(norm > 1e-12));
      base.row(j) = v.transpose() / norm;
    }
  }
  if (!antipodal) return base;
  Eigen::MatrixXd out(2 * base.rows(), dim);
  out.topRows(base.rows()) = base;
  out.bottomRows(base.rows()) = -base;
  return out;
}

EmpiricalAngularMeasure top_radius_angular_measure(const Eigen::MatrixXd& data,
                                                   double kappa) {
  if (data.cols() != 2)
    throw DataError("angular measure: implemented for dimension 2 only");
  const Eigen::Index n = data.rows();
  if (n < 2) throw DataError("angular measure: too few rows");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw DataError("angular measure: kappa must lie in (0, 1]");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> radius(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t)
    radius[static_cast<std::size_t>(t)] = data.row(t).norm();
  // Stable sort on descending radius keeps the row order among ties, which
  // is the documented tie-break.
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return radius[static_cast<std::size_t>(a)] >
                            radius[static_cast<std::size_t>(b)];
                   });
  EmpiricalAngularMeasure out;
  out.k = static_cast<std::size_t>(std::min<double>(
      static_cast<double>(n),
      std::max(1.0, std::ceil(kappa * static_cast<double>(n)))));
  out.radius_threshold = radius[static_cast<std::size_t>(
      order[out.k - 1])];
  out.angles.reserve(out.k);
  for (std::size_t i = 0; i < out.k; ++i) {
    const Eigen::Index t = order[i];
    double ang = std::atan2(data(t, 1), data(t, 0));
    if (ang < 0.0) ang += 2.0 * kPi;
    out.angles.push_back(ang);
  }
  std::sort(out.angles.begin(), out.angles.end());
  return out;
}

double angular_cdf(const EmpiricalAngularMeasure& m, double angle) {
  if (m.angles.empty()) return 0.0;
  const auto it = std::upper_bound(m.angles.begin(), m.angles.end(), angle);
  return static_cast<double>(it - m.angles.begin()) /
         static_cast<double>(m.angles.size());
}

void write_angular_cdf_csv(const std::string& path,
                           const EmpiricalAngularMeasure& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "angle,cumulative_mass\n";
  for (std::size_t i = 0; i < m.angles.size(); ++i) {
    out << csv::format_double(m.angles[i]) << ','
        << csv::format_double(static_cast<double>(i + 1) /
                              static_cast<double>(m.angles.size()))
        << '\n';
  }
}

std::complex<double> angular_measure_log_cf(const EmpiricalAngularMeasure& m,
                                            double alpha,
                                            const Eigen::VectorXd& mu,
                                            const Eigen::VectorXd& tau,
                                            std::size_t s_draws, Rng& rng) {
  if (m.angles.empty()) throw DataError("angular measure: empty");
  if (mu.size() != 2 || tau.size() != 2)
    throw DataError("angular measure CF: dimension 2 only");
  if (s_draws < 1) throw DataError("angular measure CF: need draws");
  Cx acc{0.0, 0.0};
  for (std::size_t s = 0; s < s_draws; ++s) {
    const std::size_t pick =
        static_cast<std::size_t>(rng.uniform_int(m.angles.size()));
    const double ang = m.angles[pick];
    const double u = tau(0) * std::cos(ang) + tau(1) * std::sin(ang);
    acc += psi_alpha(u, alpha);
  }
  const Cx expo = acc / static_cast<double>(s_draws);
  return -expo + Cx{0.0, mu.dot(tau)};
}

AbcResult angular_measure_abc(const Eigen::MatrixXd& data,
                              const std::vector<Eigen::VectorXd>& taus,
                              const AbcOptions& options) {
  if (data.cols() != 2)
    throw DataError("angular-measure ABC: implemented for dimension 2 only");
  const Eigen::Index n = data.rows();
  if (n < 8) throw DataError("angular-measure ABC: too few rows");
  if (taus.empty()) throw DataError("angular-measure ABC: empty grid");
  const std::size_t T = taus.size();

  // Rows ordered by descending radius (ties by row index), with their unit
  // directions precomputed so the measure for any kappa is a prefix.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> radius(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t)
    radius[static_cast<std::size_t>(t)] = data.row(t).norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return radius[static_cast<std::size_t>(a)] >
                            radius[static_cast<std::size_t>(b)];
                   });
  Eigen::MatrixXd unit(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index t = order[static_cast<std::size_t>(i)];
    const double r = radius[static_cast<std::size_t>(t)];
    if (r > 0.0) {
      unit.row(i) = data.row(t) / r;
    } else {
      unit(i, 0) = 1.0;
      unit(i, 1) = 0.0;
    }
  }
  Eigen::VectorXd med(2);
  {
    std::vector<double> c0(static_cast<std::size_t>(n));
    std::vector<double> c1(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t) {
      c0[static_cast<std::size_t>(t)] = data(t, 0);
      c1[static_cast<std::size_t>(t)] = data(t, 1);
    }
    med(0) = median_of(c0);
    med(1) = median_of(c1);
  }

  // Observed "data" for the ABC runner is the stacked empirical CF itself;
  // the summary map is the identity.
  const std::vector<Cx> obs_cf = mv_ecf(data, taus);
  std::vector<double> obs(2 * T);
  for (std::size_t i = 0; i < T; ++i) {
    obs[i] = obs_cf[i].real();
    obs[T + i] = obs_cf[i].imag();
  }

  constexpr std::size_t kMeasureDraws = 200;
  AbcModel model;
  model.n = 2 * T;
  model.summarize = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(
                                                 v.size()))
        .eval();
  };
  model.distance = max_modulus_distance;
  model.simulate = [unit, med, taus, n, T](const Eigen::VectorXd& theta,
                                           std::size_t, Rng& rng) {
    const double alpha = theta(0);
    const double kappa = theta(1);
    std::size_t k = static_cast<std::size_t>(
        std::ceil(kappa * static_cast<double>(n)));
    k = std::min(static_cast<std::size_t>(n), std::max<std::size_t>(2, k));
    // One atom-index draw set shared across the frequency grid (common
    // random numbers across frequencies smooth the distance surface).
    std::vector<std::size_t> pick(kMeasureDraws);
    for (auto& idx : pick)
      idx = static_cast<std::size_t>(rng.uniform_int(k));
    std::vector<double> out(2 * T);
    for (std::size_t i = 0; i < T; ++i) {
      Cx acc{0.0, 0.0};
      for (const auto idx : pick) {
        const double u = taus[i].dot(
            unit.row(static_cast<Eigen::Index>(idx)).transpose());
        acc += psi_alpha(u, alpha);
      }
      const Cx expo = acc / static_cast<double>(kMeasureDraws);
      const Cx phi = std::exp(-expo + Cx{0.0, med.dot(taus[i])});
      out[i] = phi.real();
      out[T + i] = phi.imag();
    }
    return out;
  };

  const double kappa_min = 2.0 / static_cast<double>(n);
  AbcPrior prior;
  prior.log_density = [kappa_min](const Eigen::VectorXd& th) {
    const double alpha = th(0);
    const double kappa = th(1);
    if (alpha < 0.1 || alpha > 2.0 || kappa <= kappa_min || kappa >= 1.0)
      return -std::numeric_limits<double>::infinity();
    // Beta(1/2, 3/2) on the retained fraction.
    return -0.5 * std::log(kappa) + 0.5 * std::log1p(-kappa);
  };
  prior.sample = [kappa_min](Rng& rng) {
    Eigen::VectorXd th(2);
    th(0) = rng.uniform(0.1, 2.0);
    do {
      th(1) = rng.beta(0.5, 1.5);
    } while (th(1) <= kappa_min || th(1) >= 1.0);
    return th;
  };

  Eigen::VectorXd steps(2);
  steps << 0.08, 0.04;
  return run_abc(obs, model, gaussian_rw_proposal(steps), prior,
                 {"alpha", "kappa"}, options);
}

PrincipalDirections principal_directions(const Eigen::MatrixXd& data,
                                         bool center) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2 || d < 1) throw DataError("principal directions: too few rows");
  Eigen::MatrixXd x = data;
  if (center) x.rowwise() -= data.colwise().mean();
  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success)
    throw NumericError("principal directions: eigendecomposition failed");
  PrincipalDirections out;
  out.eigenvalues.resize(d);
  out.vectors.resize(d, d);
  out.alpha_hat.resize(d);
  out.undefined.assign(static_cast<std::size_t>(d), false);
  const double logn = std::log(static_cast<double>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index src = d - 1 - j;  // descending order
    const double lambda = es.eigenvalues()(src);
    out.eigenvalues(j) = lambda;
    Eigen::VectorXd v = es.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.vectors.col(j) = v;
    if (lambda > 1.0) {
      out.alpha_hat(j) = std::min(2.0, 2.0 * logn / std::log(lambda));
    } else {
      out.alpha_hat(j) = std::numeric_limits<double>::quiet_NaN();
      out.undefined[static_cast<std::size_t>(j)] = true;
    }
  }
  return out;
}

void CopulaParams::validate() const {
  if (margins.empty()) throw DataError("copula: no margins");
  const Eigen::Index d = static_cast<Eigen::Index>(margins.size());
  for (const auto& m : margins)
    if (!m.valid()) throw DataError("copula: invalid margin parameters");
  if (corr.rows() != d || corr.cols() != d)
    throw DataError("copula: correlation matrix dimension mismatch");
  if (!corr.isApprox(corr.transpose(), 1e-10))
    throw DataError("copula: correlation matrix is not symmetric");
  for (Eigen::Index i = 0; i < d; ++i)
    if (std::abs(corr(i, i) - 1.0) > 1e-9)
      throw DataError("copula: correlation diagonal must be 1");
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success)
    throw DataError("copula: correlation matrix is not positive definite");
}

namespace {

struct MarginEval {
  Eigen::VectorXd xi;    // normal scores of this margin's column
  double logf = 0.0;     // summed log density
  bool clamped = false;  // any CDF value hit the clamp bounds
};

MarginEval eval_margin(const StableParams& p, const Eigen::MatrixXd& data,
                       Eigen::Index col, int n_log2) {
  MarginEval out;
  const StableDist dist(p, n_log2, 2e-3);
  const Eigen::Index n = data.rows();
  out.xi.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double y = data(t, col);
    double u = dist.cdf(y);
    const double uc = std::min(1.0 - 1e-12, std::max(1e-12, u));
    if (uc != u) out.clamped = true;
    out.xi(t) = special::norm_quantile(uc);
    out.logf += dist.log_pdf(y);
  }
  return out;
}

// -n/2 log|C| - 1/2 tr((C^{-1} - I) G) for G the Gram matrix of the normal
// scores; returns -inf when C is not positive definite.
double copula_gauss_part(const Eigen::MatrixXd& corr, const Eigen::MatrixXd& g,
                         Eigen::Index n) {
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  const Eigen::Index d = corr.rows();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const Eigen::MatrixXd cinv =
      llt.solve(Eigen::MatrixXd::Identity(d, d));
  const double quad =
      ((cinv - Eigen::MatrixXd::Identity(d, d)).cwiseProduct(g)).sum();
  return -0.5 * static_cast<double>(n) * logdet - 0.5 * quad;
}

}  // namespace

double copula_loglik(const CopulaParams& p, const Eigen::MatrixXd& data,
                     bool* clamped) {
  p.validate();
  const Eigen::Index d = static_cast<Eigen::Index>(p.margins.size());
  if (data.cols() != d)
    throw DataError("copula: data and margin dimensions disagree");
  if (data.rows() < 1) throw DataError("copula: empty data");
  if (clamped) *clamped = false;
  Eigen::MatrixXd xi(data.rows(), d);
  double logf = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const MarginEval ev = eval_margin(p.margins[static_cast<std::size_t>(i)],
                                      data, i, 13);
    xi.col(i) = ev.xi;
    logf += ev.logf;
    if (clamped && ev.clamped) *clamped = true;
  }
  const Eigen::MatrixXd g = xi.transpose() * xi;
  return copula_gauss_part(p.corr, g, data.rows()) + logf;
}

MhResult copula_mcmc(const Eigen::MatrixXd& data, const CopulaParams& init,
                     const CopulaMcmcOptions& options) {
  init.validate();
  const Eigen::Index d = static_cast<Eigen::Index>(init.margins.size());
  if (data.cols() != d)
    throw DataError("copula: data and margin dimensions disagree");
  const Eigen::Index n = data.rows();
  if (n < 4) throw DataError("copula: too few rows");
  if (options.burnin >= options.iters)
    throw DataError("copula: burnin must be below iters");
  if (options.thin < 1) throw DataError("copula: thin must be positive");
  const int kLog2 = 12;  // margin density resolution used inside the chain

  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < d; ++i) {
    const std::string tag = std::to_string(i + 1);
    names.push_back("alpha_" + tag);
    names.push_back("beta_" + tag);
    names.push_back("mu_" + tag);
    names.push_back("sigma_" + tag);
  }
  for (Eigen::Index r = 1; r < d; ++r)
    for (Eigen::Index c = 0; c < r; ++c)
      names.push_back("c_" + std::to_string(r + 1) + std::to_string(c + 1));
  MhResult result(names);

  std::vector<StableParams> margins = init.margins;
  Eigen::MatrixXd xi(n, d);
  std::vector<double> logf(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const MarginEval ev = eval_margin(margins[static_cast<std::size_t>(i)],
                                      data, i, kLog2);
    xi.col(i) = ev.xi;
    logf[static_cast<std::size_t>(i)] = ev.logf;
  }
  Eigen::MatrixXd g = xi.transpose() * xi;
  // Correlation factor: C = D D' with unit-norm lower triangular rows keeps
  // C a correlation matrix by construction.
  Eigen::MatrixXd D = Eigen::LLT<Eigen::MatrixXd>(init.corr).matrixL();
  Eigen::MatrixXd corr = D * D.transpose();
  double gauss_part = copula_gauss_part(corr, g, n);
  double logf_sum =
      std::accumulate(logf.begin(), logf.end(), 0.0);

  Rng rng(options.seed);
  std::size_t proposals = 0;
  std::size_t accepts = 0;

  for (std::size_t it = 0; it < options.iters; ++it) {
    // Margin parameter blocks: flat prior on (alpha, beta, mu) inside the
    // valid box and log-flat on sigma, so the Hastings ratio is plain.
    for (Eigen::Index i = 0; i < d; ++i) {
      ++proposals;
      StableParams cand = margins[static_cast<std::size_t>(i)];
      cand.alpha += options.step_alpha * rng.normal();
      cand.beta += options.step_beta * rng.normal();
      cand.mu += options.step_mu * rng.normal();
      cand.sigma *= std::exp(options.step_log_sigma * rng.normal());
      if (cand.alpha <= 0.5 || cand.alpha > 2.0 || cand.beta < -1.0 ||
          cand.beta > 1.0 || !(cand.sigma > 0.0))
        continue;
      const MarginEval ev = eval_margin(cand, data, i, kLog2);
      Eigen::MatrixXd g_cand = g;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double cross =
            j == i ? ev.xi.squaredNorm() : ev.xi.dot(xi.col(j));
        g_cand(i, j) = cross;
        g_cand(j, i) = cross;
      }
      const double gauss_cand = copula_gauss_part(corr, g_cand, n);
      const double log_a = gauss_cand + ev.logf - gauss_part -
                           logf[static_cast<std::size_t>(i)];
      if (std::log(rng.uniform()) < log_a) {
        ++accepts;
        margins[static_cast<std::size_t>(i)] = cand;
        logf_sum += ev.logf - logf[static_cast<std::size_t>(i)];
        logf[static_cast<std::size_t>(i)] = ev.logf;
        xi.col(i) = ev.xi;
        g = g_cand;
        gauss_part = gauss_cand;
      }
    }
    // Correlation rows: random walk on the free entries of each row of D,
    // renormalized back to the sphere (row 1 is pinned at e_1).  The
    // entries of D carry a flat prior and the renormalized walk is treated
    // as symmetric.
    for (Eigen::Index r = 1; r < d; ++r) {
      ++proposals;
      Eigen::MatrixXd d_cand = D;
      for (Eigen::Index c = 0; c <= r; ++c)
        d_cand(r, c) += options.step_d * rng.normal();
      const double norm = d_cand.row(r).head(r + 1).norm();
      if (!(norm > 1e-12)) continue;
      d_cand.row(r).head(r + 1) /= norm;
      const Eigen::MatrixXd corr_cand = d_cand * d_cand.transpose();
      const double gauss_cand = copula_gauss_part(corr_cand, g, n);
      if (std::log(rng.uniform()) < gauss_cand - gauss_part) {
        ++accepts;
        D = d_cand;
        corr = corr_cand;
        gauss_part = gauss_cand;
      }
    }
    if (it >= options.burnin && (it - options.burnin) % options.thin == 0) {
      std::vector<double> row;
      row.reserve(names.size());
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto& m = margins[static_cast<std::size_t>(i)];
        row.push_back(m.alpha);
        row.push_back(m.beta);
        row.push_back(m.mu);
        row.push_back(m.sigma);
      }
      for (Eigen::Index r = 1; r < d; ++r)
        for (Eigen::Index c = 0; c < r; ++c) row.push_back(corr(r, c));
      result.chain.push(row);
    }
  }
  result.accept_rate = proposals > 0
                           ? static_cast<double>(accepts) /
                                 static_cast<double>(proposals)
                           : 0.0;
  return result;
}

void write_measure_csv(const std::string& path,
                       const DiscreteSpectralMeasure& m) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (Eigen::Index c = 0; c < m.atoms.cols(); ++c)
    out << 's' << '_' << (c + 1) << ',';
  out << "weight\n";
  for (Eigen::Index j = 0; j < m.atoms.rows(); ++j) {
    for (Eigen::Index c = 0; c < m.atoms.cols(); ++c)
      out << csv::format_double(m.atoms(j, c)) << ',';
    out << csv::format_double(m.weights(j)) << '\n';
  }
}

DiscreteSpectralMeasure read_measure_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  if (t.header.size() < 2)
    throw DataError("measure file needs coordinates and a weight column: " +
                    path);
  const Eigen::Index d = static_cast<Eigen::Index>(t.header.size()) - 1;
  const Eigen::Index J = static_cast<Eigen::Index>(t.rows.size());
  if (J < 1) throw DataError("measure file has no atoms: " + path);
  DiscreteSpectralMeasure m;
  m.atoms.resize(J, d);
  m.weights.resize(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto& row = t.rows[static_cast<std::size_t>(j)];
    for (Eigen::Index c = 0; c < d; ++c)
      m.atoms(j, c) = row[static_cast<std::size_t>(c)];
    // Rows are renormalized on read so files with truncated decimals load.
    const double norm = m.atoms.row(j).norm();
    if (!(norm > 0.0))
      throw DataError("measure file has a zero atom: " + path);
    m.atoms.row(j) /= norm;
    m.weights(j) = row[static_cast<std::size_t>(d)];
  }
  m.validate();
  return m;
}

}  // namespace stablecf
