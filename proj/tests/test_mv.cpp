#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stablecf/errors.hpp"
#include "stablecf/mv.hpp"
#include "stablecf/special.hpp"
#include "stablecf/stable.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <vector>

using namespace stablecf;

namespace {

constexpr double kPi = std::numbers::pi;
using Cx = std::complex<double>;

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

MvStableParams one_dim_point(double alpha, double gamma, double mu) {
  DiscreteSpectralMeasure m;
  m.atoms = Eigen::MatrixXd::Ones(1, 1);
  m.weights = Eigen::VectorXd::Constant(1, gamma);
  MvStableParams p;
  p.alpha = alpha;
  p.mu = Eigen::VectorXd::Constant(1, mu);
  p.measure = m;
  return p;
}

// Four symmetric unit atoms on the axes, equal weights summing to `total`.
MvStableParams axes_params(double alpha, double total) {
  DiscreteSpectralMeasure m;
  m.atoms.resize(4, 2);
  m.atoms << 1, 0, -1, 0, 0, 1, 0, -1;
  m.weights = Eigen::VectorXd::Constant(4, 0.25 * total);
  MvStableParams p;
  p.alpha = alpha;
  p.mu = Eigen::VectorXd::Zero(2);
  p.measure = m;
  return p;
}

MvStableParams quarter_mass_params(double alpha) {
  DiscreteSpectralMeasure m = DiscreteSpectralMeasure::from_angles(
      {0.0, kPi / 4.0, kPi, 1.25 * kPi}, Eigen::VectorXd::Constant(4, 0.25));
  MvStableParams p;
  p.alpha = alpha;
  p.mu = Eigen::VectorXd::Zero(2);
  p.measure = m;
  return p;
}

}  // namespace

TEST_CASE("one-dimensional single-atom case reproduces the univariate CF") {
  for (double alpha : {1.5, 1.0, 0.8}) {
    const double gamma = 0.7;
    const double mu = 0.4;
    const MvStableParams p = one_dim_point(alpha, gamma, mu);
    StableParams uni;
    uni.alpha = alpha;
    uni.beta = 1.0;
    uni.mu = mu;
    uni.sigma = std::pow(gamma, 1.0 / alpha);
    for (int k = -10; k <= 10; ++k) {
      if (k == 0) continue;
      const double tau = 0.23 * k;
      const Cx got = mv_log_cf(p, Eigen::VectorXd::Constant(1, tau));
      const Cx want = log_cf(uni, tau);
      CHECK(std::abs(got - want) < 1e-12);
    }
  }
}

TEST_CASE("one-dimensional atom at -1 flips the skewness") {
  const double alpha = 1.4;
  DiscreteSpectralMeasure m;
  m.atoms = -Eigen::MatrixXd::Ones(1, 1);
  m.weights = Eigen::VectorXd::Constant(1, 0.9);
  MvStableParams p;
  p.alpha = alpha;
  p.mu = Eigen::VectorXd::Zero(1);
  p.measure = m;
  StableParams uni;
  uni.alpha = alpha;
  uni.beta = -1.0;
  uni.sigma = std::pow(0.9, 1.0 / alpha);
  for (double tau : {-1.7, -0.4, 0.3, 1.1}) {
    const Cx got = mv_log_cf(p, Eigen::VectorXd::Constant(1, tau));
    CHECK(std::abs(got - log_cf(uni, tau)) < 1e-12);
  }
}

TEST_CASE("CF is conjugate-symmetric with modulus at most one") {
  DiscreteSpectralMeasure m;
  m.atoms.resize(3, 3);
  m.atoms << 1, 0, 0, 0.6, -0.8, 0, 0.36, 0.48, 0.8;
  m.weights.resize(3);
  m.weights << 0.5, 0.3, 0.9;
  MvStableParams p;
  p.alpha = 1.3;
  p.mu = Eigen::VectorXd::Zero(3);
  p.mu << 0.2, -0.1, 0.05;
  p.measure = m;
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd tau(3);
    for (int c = 0; c < 3; ++c) tau(c) = rng.uniform(-2.0, 2.0);
    const Cx a = mv_log_cf(p, tau);
    const Cx b = mv_log_cf(p, Eigen::VectorXd(-tau));
    CHECK(std::abs(a - std::conj(b)) < 1e-12);
    CHECK(std::abs(std::exp(a)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("symmetric measures have a real spectral exponent") {
  const MvStableParams p = axes_params(1.2, 1.4);
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::VectorXd tau = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
    CHECK(std::abs(mv_exponent(p, tau).imag()) < 1e-14);
  }
}

TEST_CASE("splitting or permuting atoms leaves the exponent unchanged") {
  DiscreteSpectralMeasure whole;
  whole.atoms.resize(2, 2);
  whole.atoms << 1, 0, 0.6, 0.8;
  whole.weights.resize(2);
  whole.weights << 0.8, 0.5;
  DiscreteSpectralMeasure split;
  split.atoms.resize(3, 2);
  split.atoms << 0.6, 0.8, 1, 0, 1, 0;
  split.weights.resize(3);
  split.weights << 0.5, 0.3, 0.5;
  MvStableParams a, b;
  a.alpha = b.alpha = 1.7;
  a.mu = b.mu = Eigen::VectorXd::Zero(2);
  a.measure = whole;
  b.measure = split;
  for (double t1 : {-1.3, 0.4, 2.0})
    for (double t2 : {-0.7, 0.9}) {
      const Eigen::VectorXd tau = vec2(t1, t2);
      CHECK(std::abs(mv_exponent(a, tau) - mv_exponent(b, tau)) < 1e-12);
    }
}

TEST_CASE("samples from a one-atom measure live on a line") {
  DiscreteSpectralMeasure m;
  m.atoms.resize(1, 2);
  m.atoms << 1, 0;
  m.weights = Eigen::VectorXd::Constant(1, 0.7);
  MvStableParams p;
  p.alpha = 1.6;
  p.mu = vec2(0.5, -1.25);
  p.measure = m;
  Rng rng(3);
  const Eigen::MatrixXd x = mv_sample(p, 200, rng);
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    CHECK(x(t, 1) == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(x.col(0).cwiseAbs().maxCoeff() > 1.0);  // the free coordinate moves
}

TEST_CASE("empirical CF of simulated draws matches the model CF") {
  for (double alpha : {1.5, 1.0}) {
    DiscreteSpectralMeasure m = DiscreteSpectralMeasure::from_angles(
        {0.1, 1.9, 3.6, 5.1}, Eigen::VectorXd::Constant(4, 0.3));
    m.weights << 0.45, 0.3, 0.25, 0.2;
    MvStableParams p;
    p.alpha = alpha;
    p.mu = vec2(0.2, -0.3);
    p.measure = m;
    Rng rng(alpha == 1.0 ? 41 : 17);
    const std::size_t n = 100000;
    const Eigen::MatrixXd x = mv_sample(p, n, rng);
    std::vector<Eigen::VectorXd> taus = {vec2(0.5, 0.0), vec2(0.0, 0.8),
                                         vec2(0.7, 0.7), vec2(-1.0, 0.4),
                                         vec2(0.3, -1.1), vec2(-0.6, -0.6)};
    const auto hat = mv_ecf(x, taus);
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const Cx want = std::exp(mv_log_cf(p, taus[i]));
      CHECK(std::abs(hat[i] - want) < 3.5 / std::sqrt(double(n)));
    }
  }
}

TEST_CASE("index two with symmetric axis atoms gives independent normals") {
  const MvStableParams p = axes_params(2.0, 1.0);
  // Exponent check: at index 2 the CF is exactly Gaussian with covariance
  // 2 * diag(1/2, 1/2) = I per coordinate pair of atoms.
  const Eigen::VectorXd tau = vec2(0.9, -0.4);
  const Cx expo = mv_exponent(p, tau);
  CHECK(expo.real() ==
        doctest::Approx(0.5 * (0.81 + 0.16) * 1.0).epsilon(1e-10));
  CHECK(std::abs(expo.imag()) < 1e-14);
  Rng rng(5);
  const Eigen::MatrixXd x = mv_sample(p, 40000, rng);
  const Eigen::VectorXd mean = x.colwise().mean();
  CHECK(std::abs(mean(0)) < 0.03);
  CHECK(std::abs(mean(1)) < 0.03);
  const Eigen::MatrixXd c = (x.rowwise() - mean.transpose()).transpose() *
                            (x.rowwise() - mean.transpose()) /
                            double(x.rows());
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(c(1, 1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(c(0, 1)) < 0.03);
}

TEST_CASE("nonnegative least squares solves and respects the constraint") {
  Eigen::MatrixXd a(4, 3);
  a << 1, 0.2, 0.1, 0.3, 1, 0.2, 0.1, 0.4, 1, 0.5, 0.5, 0.5;
  Eigen::VectorXd x_true(3);
  x_true << 0.7, 0.0, 1.3;
  bool ridged = true;
  const Eigen::VectorXd x = nnls(a, a * x_true, &ridged);
  CHECK_FALSE(ridged);
  CHECK((x - x_true).cwiseAbs().maxCoeff() < 1e-10);

  // A target pulling a coordinate negative: the solution clamps at zero and
  // the stationarity condition holds on the active face.
  Eigen::VectorXd b = a * x_true - 2.0 * a.col(1);
  const Eigen::VectorXd y = nnls(a, b, &ridged);
  for (int i = 0; i < 3; ++i) CHECK(y(i) >= 0.0);
  const Eigen::VectorXd grad = a.transpose() * (b - a * y);
  for (int i = 0; i < 3; ++i) {
    if (y(i) > 0.0)
      CHECK(std::abs(grad(i)) < 1e-8);
    else
      CHECK(grad(i) < 1e-8);
  }
}

TEST_CASE("four-atom weights are recovered exactly from the exact CF") {
  const MvStableParams p = quarter_mass_params(1.5);
  std::vector<Eigen::VectorXd> taus;
  for (int j = 0; j < 8; ++j) {
    const double ang = kPi * j / 8.0;
    for (double r : {0.7, 1.3})
      taus.push_back(vec2(r * std::cos(ang), r * std::sin(ang)));
  }
  std::vector<Cx> expo;
  for (const auto& tau : taus) expo.push_back(mv_exponent(p, tau));
  const MeasureRecovery rec =
      recover_discrete_measure(taus, expo, 1.5, p.discrete().atoms);
  CHECK_FALSE(rec.ridged);
  CHECK_FALSE(rec.ill_conditioned);
  CHECK(rec.residual < 1e-10);
  for (int j = 0; j < 4; ++j)
    CHECK(std::abs(rec.weights(j) - 0.25) < 1e-6);
}

TEST_CASE("candidate atoms absent from the measure get zero weight") {
  const MvStableParams p = quarter_mass_params(1.5);
  // Candidate set: the four true atoms plus four spurious directions.
  const Eigen::MatrixXd candidates = circle_atoms(8);  // every 45 degrees
  std::vector<Eigen::VectorXd> taus;
  for (int j = 0; j < 10; ++j) {
    const double ang = kPi * (j + 0.3) / 10.0;
    for (double r : {0.6, 1.25})
      taus.push_back(vec2(r * std::cos(ang), r * std::sin(ang)));
  }
  std::vector<Cx> expo;
  for (const auto& tau : taus) expo.push_back(mv_exponent(p, tau));
  const MeasureRecovery rec =
      recover_discrete_measure(taus, expo, 1.5, candidates);
  // Candidates 0, 1, 4, 5 are the true atoms (0, 45, 180, 225 degrees).
  for (int j : {0, 1, 4, 5}) CHECK(std::abs(rec.weights(j) - 0.25) < 1e-6);
  for (int j : {2, 3, 6, 7}) CHECK(rec.weights(j) < 1e-8);
}

TEST_CASE("weights recovered from a noisy empirical CF stay nonnegative") {
  const MvStableParams p = quarter_mass_params(1.5);
  Rng rng(29);
  const Eigen::MatrixXd x = mv_sample(p, 20000, rng);
  std::vector<Eigen::VectorXd> taus;
  for (int j = 0; j < 8; ++j) {
    const double ang = kPi * (j + 0.5) / 8.0;
    taus.push_back(vec2(0.9 * std::cos(ang), 0.9 * std::sin(ang)));
  }
  const auto hat = mv_ecf(x, taus);
  std::vector<Cx> expo;
  for (const auto& value : hat) expo.push_back(-std::log(value));
  const MeasureRecovery rec =
      recover_discrete_measure(taus, expo, 1.5, p.discrete().atoms);
  double total = 0.0;
  for (int j = 0; j < 4; ++j) {
    CHECK(rec.weights(j) >= 0.0);
    CHECK(std::abs(rec.weights(j) - 0.25) < 0.15);
    total += rec.weights(j);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("Gaussian spectral measure converges within two hundred draws") {
  MvStableParams p;
  p.alpha = 1.5;
  p.mu = Eigen::VectorXd::Zero(5);
  GaussianSpectralMeasure g;
  g.omega2 = 1.0;
  g.mass = 1.0;
  g.dim = 5;
  p.measure = g;
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(5);
  tau(0) = 1.0;
  Rng rng(101);
  std::size_t draws = 0;
  const Cx got = mv_exponent(p, tau, &rng, &draws);
  CHECK(draws >= 50);
  CHECK(draws <= 200);
  CHECK(std::abs(got.imag()) == 0.0);
  // Closed-form oracle through the projection scale.
  const ProjectedParams pp = project_params(p, tau);
  const double want = std::pow(pp.sigma, p.alpha);
  CHECK(std::abs(got.real() - want) < 2e-3);

  // Isotropy: equal-norm frequencies give equal exponents up to MC noise.
  Eigen::VectorXd tau2 = Eigen::VectorXd::Zero(5);
  tau2(1) = std::sqrt(0.5);
  tau2(3) = -std::sqrt(0.5);
  Rng rng2(102);
  const Cx other = mv_exponent(p, tau2, &rng2, &draws);
  CHECK(std::abs(other.real() - got.real()) < 3e-3);
}

TEST_CASE("Gaussian spectral measure handles the index-one branch") {
  MvStableParams p;
  p.alpha = 1.0;
  p.mu = Eigen::VectorXd::Zero(3);
  GaussianSpectralMeasure g;
  g.omega2 = 0.5;
  g.mass = 0.8;
  g.dim = 3;
  p.measure = g;
  Eigen::VectorXd tau(3);
  tau << 0.6, -0.3, 0.9;
  Rng rng(7);
  const Cx got = mv_exponent(p, tau, &rng);
  CHECK(got.imag() == 0.0);
  const ProjectedParams pp = project_params(p, tau);
  CHECK(std::abs(got.real() - pp.sigma) < 3e-3);
  CHECK(pp.beta == 0.0);
}

TEST_CASE("projections of the model CF match the projected parameters") {
  // For any direction v, <v, X> is univariate stable; evaluating the joint
  // CF along t v must equal the univariate CF of the projected parameters.
  for (double alpha : {1.5, 1.0}) {
    DiscreteSpectralMeasure m = DiscreteSpectralMeasure::from_angles(
        {0.4, 2.2, 4.4}, Eigen::VectorXd::Constant(3, 0.3));
    m.weights << 0.6, 0.25, 0.45;
    MvStableParams p;
    p.alpha = alpha;
    p.mu = vec2(0.7, -0.2);
    p.measure = m;
    const Eigen::VectorXd v = vec2(0.8, -0.6);
    const ProjectedParams pp = project_params(p, v);
    StableParams uni;
    uni.alpha = alpha;
    uni.beta = pp.beta;
    uni.mu = pp.mu;
    uni.sigma = pp.sigma;
    for (double t : {-1.6, -0.5, 0.4, 1.2}) {
      const Cx want = log_cf(uni, t);
      const Cx got = mv_log_cf(p, Eigen::VectorXd(t * v));
      CHECK(std::abs(got - want) < 1e-12);
    }
  }
}

TEST_CASE("projected scale is homogeneous and degenerate cases are flagged") {
  const MvStableParams p = quarter_mass_params(1.4);
  const Eigen::VectorXd v = vec2(0.3, 0.7);
  const ProjectedParams base = project_params(p, v);
  const ProjectedParams scaled = project_params(p, Eigen::VectorXd(2.5 * v));
  CHECK(scaled.sigma == doctest::Approx(2.5 * base.sigma).epsilon(1e-12));
  CHECK(scaled.beta == doctest::Approx(base.beta).epsilon(1e-12));

  DiscreteSpectralMeasure m;
  m.atoms.resize(1, 2);
  m.atoms << 1, 0;
  m.weights = Eigen::VectorXd::Constant(1, 1.0);
  MvStableParams q;
  q.alpha = 1.4;
  q.mu = Eigen::VectorXd::Zero(2);
  q.measure = m;
  const ProjectedParams deg = project_params(q, vec2(0.0, 1.0));
  CHECK(deg.degenerate);
  const ProjectedParams one_atom = project_params(q, vec2(-0.5, 0.0));
  CHECK(one_atom.beta == doctest::Approx(-1.0));
  CHECK(one_atom.sigma == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("projection estimate recovers index, location and weights") {
  DiscreteSpectralMeasure m = DiscreteSpectralMeasure::from_angles(
      {0.0, 0.5 * kPi, 3.49}, Eigen::VectorXd::Constant(3, 0.3));
  m.weights << 0.5, 0.3, 0.4;
  MvStableParams p;
  p.alpha = 1.5;
  p.mu = vec2(0.3, -0.2);
  p.measure = m;
  Rng rng(23);
  const Eigen::MatrixXd x = mv_sample(p, 40000, rng);
  std::vector<Eigen::VectorXd> dirs;
  for (int j = 0; j < 8; ++j) {
    const double ang = 2.0 * kPi * j / 8.0;
    dirs.push_back(vec2(std::cos(ang), std::sin(ang)));
  }
  const ProjectionEstimate est = projection_estimate(x, dirs, m.atoms);
  CHECK(std::abs(est.alpha - 1.5) < 0.1);
  CHECK((est.mu - p.mu).norm() < 0.1);
  REQUIRE(est.measure.weights.size() == 3);
  CHECK(std::abs(est.measure.weights(0) - 0.5) < 0.1);
  CHECK(std::abs(est.measure.weights(1) - 0.3) < 0.1);
  CHECK(std::abs(est.measure.weights(2) - 0.4) < 0.1);
}

TEST_CASE("top-radius angular measure keeps the largest rows") {
  Eigen::MatrixXd data(6, 2);
  // radii: 5, 4, 3, 2, 1, 4 (tie with row 1; row order breaks the tie)
  data << 5, 0, 0, 4, -3, 0, 0, -2, 1, 0, 4, 0;
  const EmpiricalAngularMeasure m = top_radius_angular_measure(data, 0.5);
  CHECK(m.k == 3);
  CHECK(m.radius_threshold == doctest::Approx(4.0));
  REQUIRE(m.angles.size() == 3);
  // Retained rows: radius 5 (angle 0), first radius-4 row (angle pi/2),
  // and by the index tie-break the second radius-4 row (angle 0).
  CHECK(m.angles[0] == doctest::Approx(0.0));
  CHECK(m.angles[1] == doctest::Approx(0.0));
  CHECK(m.angles[2] == doctest::Approx(0.5 * kPi));
  CHECK(angular_cdf(m, 0.1) == doctest::Approx(2.0 / 3.0));
  CHECK(angular_cdf(m, 2.0 * kPi) == doctest::Approx(1.0));

  const std::string path = "/tmp/test_angular_cdf.csv";
  write_angular_cdf_csv(path, m);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f != nullptr);
  int lines = 0;
  for (int c = std::fgetc(f); c != EOF; c = std::fgetc(f))
    if (c == '\n') ++lines;
  std::fclose(f);
  CHECK(lines == 4);  // header + one row per retained angle
}

TEST_CASE("angular-measure CF with one repeated angle is exact") {
  EmpiricalAngularMeasure m;
  m.angles = {0.9, 0.9, 0.9};
  m.k = 3;
  const Eigen::VectorXd mu = vec2(0.1, -0.4);
  const Eigen::VectorXd tau = vec2(0.8, 0.5);
  Rng rng(13);
  const Cx got = angular_measure_log_cf(m, 1.6, mu, tau, 50, rng);
  const double u = tau(0) * std::cos(0.9) + tau(1) * std::sin(0.9);
  const Cx want = -psi_alpha(u, 1.6) + Cx{0.0, mu.dot(tau)};
  CHECK(std::abs(got - want) < 1e-12);
}

TEST_CASE("angular-measure ABC concentrates near a heavy-tail index") {
  const MvStableParams p = quarter_mass_params(1.5);
  Rng rng(31);
  const Eigen::MatrixXd x = mv_sample(p, 600, rng);
  std::vector<Eigen::VectorXd> taus;
  for (int j = 0; j < 8; ++j) {
    const double ang = 2.0 * kPi * j / 8.0;
    for (double r : {0.6, 1.2})
      taus.push_back(vec2(r * std::cos(ang), r * std::sin(ang)));
  }
  AbcOptions opt;
  opt.iters = 6000;
  opt.burnin = 1500;
  opt.thin = 5;
  opt.seed = 9;
  Eigen::VectorXd init(2);
  init << 1.5, 0.25;
  opt.init = init;
  const AbcResult res = angular_measure_abc(x, taus, opt);
  CHECK(res.chain.size() == (6000 - 1500 + 4) / 5);
  const double alpha_mean = res.chain.mean(res.chain.index_of("alpha"));
  const double kappa_mean = res.chain.mean(res.chain.index_of("kappa"));
  // The top-radius measure estimator is known to run hot on the index;
  // accept anything in the upper half of the stable range at desk scale.
  CHECK(alpha_mean > 1.4);
  CHECK(alpha_mean <= 2.0);
  CHECK(kappa_mean > 2.0 / 600.0);
  CHECK(kappa_mean < 1.0);
  CHECK(res.accept_rate > 0.01);
}

TEST_CASE("principal directions of Gaussian data report index two") {
  Rng rng(3);
  Eigen::MatrixXd x(20000, 2);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    x(t, 0) = rng.normal();
    x(t, 1) = rng.normal();
  }
  const PrincipalDirections pd = principal_directions(x);
  CHECK(pd.eigenvalues(0) >= pd.eigenvalues(1));
  for (int j = 0; j < 2; ++j) {
    CHECK_FALSE(pd.undefined[j]);
    CHECK(pd.alpha_hat(j) > 1.8);
    CHECK(pd.alpha_hat(j) <= 2.0);
  }
}

TEST_CASE("principal-direction index estimate tracks a heavy-tail index") {
  const MvStableParams p = axes_params(1.5, 2.0);  // iid standard coordinates
  // Each replication draws one long sample and evaluates growing prefixes,
  // so the size effect is measured within a common draw stream.
  const int reps = 50;
  double acc3 = 0.0, acc4 = 0.0, acc5 = 0.0;
  int used3 = 0, used4 = 0, used5 = 0;
  Rng base(101);
  for (int r = 0; r < reps; ++r) {
    Rng rng = base.split(r);
    const Eigen::MatrixXd x = mv_sample(p, 100000, rng);
    const PrincipalDirections pd3 = principal_directions(x.topRows(1000));
    const PrincipalDirections pd4 = principal_directions(x.topRows(10000));
    const PrincipalDirections pd5 = principal_directions(x);
    for (int j = 0; j < 2; ++j) {
      if (!pd3.undefined[j]) { acc3 += pd3.alpha_hat(j); ++used3; }
      if (!pd4.undefined[j]) { acc4 += pd4.alpha_hat(j); ++used4; }
      if (!pd5.undefined[j]) { acc5 += pd5.alpha_hat(j); ++used5; }
    }
  }
  REQUIRE(used3 > 0);
  REQUIRE(used4 > 0);
  REQUIRE(used5 > 0);
  const double at_1e4 = acc4 / used4;
  CHECK(std::abs(at_1e4 - 1.5) < 0.3);
  const double bias_1e3 = std::abs(acc3 / used3 - 1.5);
  const double bias_1e4 = std::abs(acc4 / used4 - 1.5);
  const double bias_1e5 = std::abs(acc5 / used5 - 1.5);
  CHECK(bias_1e4 <= bias_1e3 + 0.02);
  CHECK(bias_1e5 <= bias_1e4 + 0.02);
}

TEST_CASE("duplicated coordinates concentrate on the diagonal direction") {
  StableParams uni;
  uni.alpha = 1.5;
  Rng rng(15);
  const std::vector<double> y = sample(uni, 500, rng);
  Eigen::MatrixXd x(500, 2);
  for (int t = 0; t < 500; ++t) x(t, 0) = x(t, 1) = y[t];
  const PrincipalDirections pd = principal_directions(x);
  CHECK(pd.vectors(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK(pd.vectors(1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  // The orthogonal direction carries no mass at all.
  CHECK(pd.eigenvalues(1) < 1e-6);
  CHECK(pd.undefined[1]);
  CHECK(std::isnan(pd.alpha_hat(1)));
}

TEST_CASE("eigenvalues are invariant under rotation of the data") {
  const MvStableParams p = axes_params(1.6, 1.0);
  Rng rng(19);
  const Eigen::MatrixXd x = mv_sample(p, 2000, rng);
  Eigen::MatrixXd rot(2, 2);
  const double c = std::cos(0.7), s = std::sin(0.7);
  rot << c, -s, s, c;
  const PrincipalDirections a = principal_directions(x);
  const PrincipalDirections b = principal_directions(x * rot.transpose());
  CHECK(a.eigenvalues(0) == doctest::Approx(b.eigenvalues(0)).epsilon(1e-9));
  CHECK(a.eigenvalues(1) == doctest::Approx(b.eigenvalues(1)).epsilon(1e-9));
}

TEST_CASE("tiny data leaves the tail index undefined") {
  Eigen::MatrixXd x = 1e-6 * Eigen::MatrixXd::Random(50, 2);
  const PrincipalDirections pd = principal_directions(x);
  CHECK(pd.undefined[0]);
  CHECK(pd.undefined[1]);
}

TEST_CASE("one-margin copula likelihood equals the margin likelihood") {
  StableParams uni;
  uni.alpha = 1.4;
  uni.sigma = 1.2;
  Rng rng(21);
  const std::vector<double> y = sample(uni, 300, rng);
  Eigen::MatrixXd data(300, 1);
  for (int t = 0; t < 300; ++t) data(t, 0) = y[t];
  CopulaParams p;
  p.margins = {uni};
  p.corr = Eigen::MatrixXd::Identity(1, 1);
  const double got = copula_loglik(p, data);
  const double want = stable_loglik(y, uni, 13, 2e-3);
  CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("identity correlation decouples the margins") {
  StableParams m1, m2;
  m1.alpha = 1.3;
  m2.alpha = 1.8;
  m2.mu = 0.4;
  Rng rng(33);
  const std::vector<double> y1 = sample(m1, 250, rng);
  const std::vector<double> y2 = sample(m2, 250, rng);
  Eigen::MatrixXd data(250, 2);
  for (int t = 0; t < 250; ++t) {
    data(t, 0) = y1[t];
    data(t, 1) = y2[t];
  }
  CopulaParams p;
  p.margins = {m1, m2};
  p.corr = Eigen::MatrixXd::Identity(2, 2);
  const double got = copula_loglik(p, data);
  const double want =
      stable_loglik(y1, m1, 13, 2e-3) + stable_loglik(y2, m2, 13, 2e-3);
  CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("extreme observations set the clamp flag") {
  StableParams uni;
  uni.alpha = 1.5;
  Eigen::MatrixXd data(3, 1);
  data << 0.3, -1.2, 1e12;
  CopulaParams p;
  p.margins = {uni};
  p.corr = Eigen::MatrixXd::Identity(1, 1);
  bool clamped = false;
  copula_loglik(p, data, &clamped);
  CHECK(clamped);
}

TEST_CASE("copula likelihood is maximized near the generating correlation") {
  const double rho = 0.6;
  Rng rng(55);
  const int n = 2000;
  Eigen::MatrixXd data(n, 2);
  for (int t = 0; t < n; ++t) {
    const double z1 = rng.normal();
    const double z2 = rho * z1 + std::sqrt(1.0 - rho * rho) * rng.normal();
    // Cauchy margins via the analytic quantile of the normal scores.
    data(t, 0) = std::tan(kPi * (special::norm_cdf(z1) - 0.5));
    data(t, 1) = std::tan(kPi * (special::norm_cdf(z2) - 0.5));
  }
  StableParams cauchy;
  cauchy.alpha = 1.0;
  double best_rho = 0.0;
  double best_ll = -1e300;
  for (double r : {0.3, 0.4, 0.5, 0.55, 0.6, 0.65, 0.7, 0.8}) {
    CopulaParams p;
    p.margins = {cauchy, cauchy};
    p.corr.resize(2, 2);
    p.corr << 1, r, r, 1;
    const double ll = copula_loglik(p, data);
    if (ll > best_ll) {
      best_ll = ll;
      best_rho = r;
    }
  }
  CHECK(std::abs(best_rho - rho) <= 0.05);
}

TEST_CASE("copula sampler stays near independence for independent margins") {
  StableParams uni;
  uni.alpha = 1.3;
  Rng rng(61);
  const int n = 600;
  Eigen::MatrixXd data(n, 2);
  {
    const std::vector<double> y1 = sample(uni, n, rng);
    const std::vector<double> y2 = sample(uni, n, rng);
    for (int t = 0; t < n; ++t) {
      data(t, 0) = y1[t];
      data(t, 1) = y2[t];
    }
  }
  CopulaParams init;
  init.margins = {uni, uni};
  init.corr = Eigen::MatrixXd::Identity(2, 2);
  CopulaMcmcOptions opt;
  opt.iters = 1200;
  opt.burnin = 400;
  opt.thin = 2;
  opt.seed = 5;
  const MhResult res = copula_mcmc(data, init, opt);
  CHECK(res.chain.size() == 400);
  CHECK(res.accept_rate > 0.05);
  CHECK(res.accept_rate < 0.95);
  const double c21 = res.chain.mean(res.chain.index_of("c_21"));
  CHECK(std::abs(c21) < 0.12);
  const double a1 = res.chain.mean(res.chain.index_of("alpha_1"));
  CHECK(std::abs(a1 - 1.3) < 0.2);
  // Every retained draw keeps the correlation inside (-1, 1).
  const std::vector<double> col = res.chain.column("c_21");
  for (double v : col) CHECK(std::abs(v) < 1.0);

  const MhResult replay = copula_mcmc(data, init, opt);
  REQUIRE(replay.chain.size() == res.chain.size());
  CHECK(replay.chain.row(10) == res.chain.row(10));
  CHECK(replay.chain.row(399) == res.chain.row(399));
}

TEST_CASE("spectral measures survive a CSV round trip") {
  DiscreteSpectralMeasure m = DiscreteSpectralMeasure::from_angles(
      {0.3, 2.0, 4.1}, Eigen::VectorXd::Constant(3, 0.4));
  m.weights << 0.5, 0.25, 1.5;
  const std::string path = "/tmp/test_measure_roundtrip.csv";
  write_measure_csv(path, m);
  const DiscreteSpectralMeasure back = read_measure_csv(path);
  REQUIRE(back.size() == 3);
  CHECK((back.atoms - m.atoms).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((back.weights - m.weights).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("direction grids are deterministic unit vectors") {
  const Eigen::MatrixXd c4 = circle_atoms(4);
  CHECK(c4(0, 0) == doctest::Approx(1.0));
  CHECK(c4(1, 1) == doctest::Approx(1.0));
  CHECK(c4(2, 0) == doctest::Approx(-1.0));
  const Eigen::MatrixXd s = sphere_atoms(20, 5);
  REQUIRE(s.rows() == 20);
  for (int j = 0; j < 20; ++j)
    CHECK(s.row(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::MatrixXd again = sphere_atoms(20, 5);
  CHECK((s - again).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd anti = sphere_atoms(20, 5, true);
  REQUIRE(anti.rows() == 40);
  CHECK((anti.topRows(20) + anti.bottomRows(20)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("invalid inputs are rejected") {
  DiscreteSpectralMeasure bad;
  bad.atoms.resize(1, 2);
  bad.atoms << 0.5, 0.5;  // not unit norm
  bad.weights = Eigen::VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(bad.validate(), DataError);

  MvStableParams gp;
  gp.alpha = 1.5;
  gp.mu = Eigen::VectorXd::Zero(2);
  GaussianSpectralMeasure g;
  g.dim = 2;
  gp.measure = g;
  Rng rng(1);
  CHECK_THROWS_AS(mv_sample(gp, 10, rng), DataError);

  Eigen::MatrixXd three(10, 3);
  three.setZero();
  CHECK_THROWS_AS(top_radius_angular_measure(three, 0.5), DataError);
  CHECK_THROWS_AS(angular_measure_abc(three, {}, AbcOptions{}), DataError);

  Eigen::MatrixXd a(3, 2);
  a.setOnes();
  Eigen::VectorXd b(4);
  b.setOnes();
  CHECK_THROWS_AS(nnls(a, b), DataError);

  CHECK_THROWS(read_measure_csv("/tmp/does_not_exist_measure.csv"));

  CopulaParams cp;
  StableParams uni;
  cp.margins = {uni, uni};
  cp.corr.resize(2, 2);
  cp.corr << 1, 0.5, 0.2, 1;  // asymmetric
  Eigen::MatrixXd data(5, 2);
  data.setZero();
  CHECK_THROWS_AS(copula_loglik(cp, data), DataError);
}
