#include "stablecf/msv.hpp"

#include "stablecf/errors.hpp"
#include "stablecf/mixture.hpp"
#include "stablecf/mv.hpp"
#include "stablecf/pchip.hpp"
#include "stablecf/special.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <utility>

namespace stablecf {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
// mean of log e^2 for the Gaussian shock e = sqrt(2) u: log 2 + E log chi^2_1
constexpr double kGaussLogSqMean = -0.5772156649015329;

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows() * m.cols()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[k++] = m(i, j);
  return out;
}

Eigen::MatrixXd unflatten(const std::vector<double>& v, Eigen::Index d) {
  const Eigen::Index n = static_cast<Eigen::Index>(v.size()) / d;
  Eigen::MatrixXd m(n, d);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = v[k++];
  return m;
}

Eigen::VectorXd column_medians(const Eigen::MatrixXd& data) {
  Eigen::VectorXd med(data.cols());
  std::vector<double> col(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      col[static_cast<std::size_t>(i)] = data(i, j);
    std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
    med(j) = col[col.size() / 2];
  }
  return med;
}

struct Ar1Fit {
  double intercept = 0.0;
  double slope = 0.0;
  double resid_var = 0.0;
  double mean = 0.0;
  bool ok = false;
};

// Least squares for w_t = c + b w_{t-1} + e_t.
Ar1Fit ar1_ls(const std::vector<double>& w) {
  Ar1Fit f;
  const std::size_t n = w.size();
  if (n < 8) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    mx += w[t];
    my += w[t + 1];
  }
  const double m = static_cast<double>(n - 1);
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    sxx += (w[t] - mx) * (w[t] - mx);
    sxy += (w[t] - mx) * (w[t + 1] - my);
  }
  if (!(sxx > 1e-12)) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const double r = w[t + 1] - f.intercept - f.slope * w[t];
    rss += r * r;
  }
  f.resid_var = rss / m;
  double tot = 0.0;
  for (double v : w) tot += v;
  f.mean = tot / static_cast<double>(n);
  f.ok = std::isfinite(f.slope) && std::isfinite(f.resid_var);
  return f;
}

// Latent path plus quantile map; `dist` may be null only for the exact
// Gaussian shortcut (alpha, beta) = (2, 0).
MsvPath simulate_with_dist(const MsvParams& p, std::size_t n, Rng& rng,
                           const StableDist* dist) {
  const Eigen::Index d = static_cast<Eigen::Index>(p.dim());
  const Eigen::MatrixXd see = p.sigma.bottomRightCorner(d, d);
  Eigen::MatrixXd V = see;
  for (int it = 0; it < 400; ++it) {
    Eigen::MatrixXd next = p.phi * V * p.phi.transpose() + see;
    const double step = (next - V).cwiseAbs().maxCoeff();
    V = std::move(next);
    if (step < 1e-14) break;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
  const Eigen::MatrixXd vroot =
      es.eigenvectors() *
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> joint(p.sigma);
  if (joint.info() != Eigen::Success)
    throw NumericError("msv_simulate: joint covariance is not positive definite");
  const Eigen::MatrixXd L = joint.matrixL();
  const bool gaussian = (p.alpha == 2.0 && p.beta == 0.0);

  MsvPath path;
  path.y.resize(static_cast<Eigen::Index>(n), d);
  path.h.resize(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
  Eigen::VectorXd h = p.mu + vroot * z;
  Eigen::VectorXd zu(2 * d);
  for (std::size_t t = 0; t < n; ++t) {
    for (Eigen::Index i = 0; i < 2 * d; ++i) zu(i) = rng.normal();
    const Eigen::VectorXd shock = L * zu;  // (u_t, eps_t)
    for (Eigen::Index i = 0; i < d; ++i) {
      const double u = shock(i);
      double e;
      if (gaussian) {
        e = kSqrt2 * u;
      } else {
        const double score =
            std::clamp(special::norm_cdf(u), 1e-12, 1.0 - 1e-12);
        e = dist->quantile(score, nullptr);
      }
      path.h(static_cast<Eigen::Index>(t), i) = h(i);
      path.y(static_cast<Eigen::Index>(t), i) = std::exp(0.5 * h(i)) * e;
    }
    h = p.mu + p.phi * (h - p.mu) + shock.tail(d);
  }
  return path;
}

// Monotone inverse of u = P(a, x) on a fixed grid, cached per dimension.
// Queries must be clamped into the node range by the caller.
const Pchip& radial_inverse(double a) {
  static std::map<long, std::unique_ptr<Pchip>> cache;
  const long key = std::lround(2.0 * a);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const int m = 256;
    const double xmax = 60.0 + 10.0 * a;
    std::vector<double> us, xs;
    us.reserve(m);
    xs.reserve(m);
    double last = -1.0;
    for (int i = 0; i < m; ++i) {
      const double x =
          xmax * std::pow(static_cast<double>(i) / (m - 1), 3.0);
      const double u = special::gamma_p(a, x);
      if (u > last + 1e-15) {
        us.push_back(u);
        xs.push_back(x);
        last = u;
      }
    }
    it = cache.emplace(key, std::make_unique<Pchip>(us, xs)).first;
  }
  return *it->second;
}

}  // namespace

bool MsvParams::valid() const {
  const Eigen::Index d = mu.size();
  if (d < 1) return false;
  if (phi.rows() != d || phi.cols() != d) return false;
  if (sigma.rows() != 2 * d || sigma.cols() != 2 * d) return false;
  if (!(alpha > 0.0 && alpha <= 2.0)) return false;
  if (!(beta >= -1.0 && beta <= 1.0)) return false;
  const Eigen::VectorXcd ev = phi.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) >= 1.0) return false;
  for (Eigen::Index i = 0; i < d; ++i)
    if (std::abs(sigma(i, i) - 1.0) > 1e-9) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  return llt.info() == Eigen::Success;
}

MsvPath msv_simulate(const MsvParams& p, std::size_t n, Rng& rng) {
  if (!p.valid()) throw DataError("msv_simulate: invalid parameters");
  if (n == 0) throw DataError("msv_simulate: n must be positive");
  if (p.alpha == 2.0 && p.beta == 0.0)
    return simulate_with_dist(p, n, rng, nullptr);
  const StableDist dist(StableParams{p.alpha, p.beta, 0.0, 1.0});
  return simulate_with_dist(p, n, rng, &dist);
}

std::vector<Eigen::MatrixXd> manf_directions(std::size_t count,
                                             std::size_t rows,
                                             std::size_t cols,
                                             std::uint64_t seed,
                                             TauNormalization norm) {
  if (count == 0 || rows == 0 || cols == 0)
    throw DataError("manf_directions: count, rows, cols must be positive");
  Rng rng(0x3a9df00d5eedULL ^ seed);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  const double floor_sum = 0.2 * std::sqrt(static_cast<double>(rows * cols));
  for (std::size_t g = 0; g < count; ++g) {
    Eigen::MatrixXd m(rows, cols);
    for (;;) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
      if (norm == TauNormalization::L2) {
        const double f = m.norm();
        if (f > 1e-12) {
          m /= f;
          break;
        }
      } else {
        // Entries summing to one blow up when the draw nearly cancels;
        // redraw those (deterministic per seed).
        const double s = m.sum();
        if (std::abs(s) > floor_sum) {
          m /= s;
          break;
        }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

double manf_loglik(const MsvParams& p, const Eigen::MatrixXd& data,
                   const std::vector<Eigen::MatrixXd>& t_set,
                   std::size_t sims, Rng& rng) {
  if (!p.valid()) throw DataError("manf_loglik: invalid parameters");
  if (sims < 2) throw DataError("manf_loglik: need at least 2 simulations");
  if (t_set.empty()) throw DataError("manf_loglik: empty direction set");
  if (data.rows() < 2 ||
      data.cols() != static_cast<Eigen::Index>(p.dim()))
    throw DataError("manf_loglik: data shape does not match the parameters");
  const std::size_t n = static_cast<std::size_t>(data.rows());
  const Eigen::VectorXd zhat = block_ecf(data, t_set);
  const Eigen::Index m = zhat.size();

  std::unique_ptr<StableDist> dist;
  if (!(p.alpha == 2.0 && p.beta == 0.0))
    dist = std::make_unique<StableDist>(
        StableParams{p.alpha, p.beta, 0.0, 1.0});

  Eigen::MatrixXd summaries(static_cast<Eigen::Index>(sims), m);
  for (std::size_t r = 0; r < sims; ++r) {
    const MsvPath path = simulate_with_dist(p, n, rng, dist.get());
    summaries.row(static_cast<Eigen::Index>(r)) =
        block_ecf(path.y, t_set).transpose();
  }
  const Eigen::VectorXd zbar = summaries.colwise().mean().transpose();
  const Eigen::MatrixXd centered = summaries.rowwise() - zbar.transpose();
  const Eigen::MatrixXd omega =
      centered.transpose() * centered / static_cast<double>(sims - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
  const double lam_max = std::max(es.eigenvalues().maxCoeff(), 1e-300);
  const double lam_floor = lam_max * 1e-10;
  const Eigen::VectorXd w = es.eigenvectors().transpose() * (zhat - zbar);
  double logdet = 0.0, quad = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lam = std::max(es.eigenvalues()(i), lam_floor);
    logdet += std::log(lam);
    quad += w(i) * w(i) / lam;
  }
  return -0.5 * logdet - 0.5 * quad;
}

MsvFit fit_msv_manf(const Eigen::MatrixXd& data, const MsvManfConfig& cfg) {
  const Eigen::Index d = data.cols();
  const Eigen::Index n = data.rows();
  if (d < 1 || n < 50)
    throw DataError("fit_msv_manf: need at least 50 rows");
  if (cfg.sims < 2) throw DataError("fit_msv_manf: sims must be >= 2");
  const std::vector<Eigen::MatrixXd> t_set =
      manf_directions(cfg.freq_count, static_cast<std::size_t>(d), cfg.block,
                      cfg.seed ^ 0x9b1f00dULL, cfg.tau_norm);

  const Eigen::Index base = 3 * d;
  const Eigen::Index p_dim = base + (cfg.fit_shapes ? 2 : 0);
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < d; ++i)
    names.push_back("mu_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < d; ++i)
    names.push_back("phi_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < d; ++i)
    names.push_back("log_s2_" + std::to_string(i + 1));
  if (cfg.fit_shapes) {
    names.push_back("alpha");
    names.push_back("beta");
  }

  const double ls_lo = std::log(1e-4), ls_hi = std::log(4.0);
  const double amin = cfg.alpha_min, amax = cfg.alpha_max;
  auto log_target = [&, d](const Eigen::VectorXd& th) -> double {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double mu = th(i), phi = th(d + i), ls = th(2 * d + i);
      if (std::abs(phi) >= 0.999 || ls < ls_lo || ls > ls_hi)
        return -std::numeric_limits<double>::infinity();
      lp += -mu * mu / 8.0;
      lp += -(phi - 0.5) * (phi - 0.5) / 0.08;
    }
    double alpha = cfg.alpha, beta = cfg.beta;
    if (cfg.fit_shapes) {
      alpha = th(base);
      beta = th(base + 1);
      if (alpha <= amin || alpha > amax || beta < -1.0 || beta > 1.0)
        return -std::numeric_limits<double>::infinity();
    }
    MsvParams mp;
    mp.mu = th.segment(0, d);
    mp.phi = Eigen::MatrixXd(th.segment(d, d).asDiagonal());
    mp.sigma = Eigen::MatrixXd::Identity(2 * d, 2 * d);
    for (Eigen::Index i = 0; i < d; ++i)
      mp.sigma(d + i, d + i) = std::exp(th(2 * d + i));
    mp.alpha = alpha;
    mp.beta = beta;
    // Common random numbers: one fixed simulation seed makes the surface
    // deterministic across evaluations.
    Rng crn(cfg.seed ^ 0x11c59b5eULL);
    return lp + manf_loglik(mp, data, t_set, cfg.sims, crn);
  };

  Eigen::VectorXd init(p_dim);
  for (Eigen::Index j = 0; j < d; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = data(i, j);
      acc += std::log(std::max(y * y, 1e-300));
    }
    init(j) = acc / static_cast<double>(n) - kGaussLogSqMean;
    init(d + j) = 0.5;
    init(2 * d + j) = std::log(0.25);
  }
  if (cfg.fit_shapes) {
    init(base) = std::clamp(1.8, amin + 0.01, amax);
    init(base + 1) = 0.0;
  }

  Eigen::VectorXd steps(p_dim);
  if (!cfg.steps.empty()) {
    if (static_cast<Eigen::Index>(cfg.steps.size()) != p_dim)
      throw DataError("fit_msv_manf: steps size does not match parameters");
    for (Eigen::Index i = 0; i < p_dim; ++i)
      steps(i) = cfg.steps[static_cast<std::size_t>(i)];
  } else {
    for (Eigen::Index i = 0; i < d; ++i) {
      steps(i) = 0.06;
      steps(d + i) = 0.05;
      steps(2 * d + i) = 0.12;
    }
    if (cfg.fit_shapes) {
      steps(base) = 0.03;
      steps(base + 1) = 0.08;
    }
  }

  AbcOptions opt;
  opt.iters = cfg.iters;
  opt.burnin = cfg.burnin;
  opt.thin = cfg.thin;
  opt.seed = cfg.seed;
  opt.init = init;
  MhResult res =
      metropolis_chain(log_target, gaussian_rw_proposal(steps), names, opt);
  MsvFit fit(names);
  fit.chain = std::move(res.chain);
  fit.accept_rate = res.accept_rate;
  return fit;
}

// ---------------------------------------------------------------------------
// Spectral MSV

std::size_t SpectralMsvParams::dim() const {
  if (const auto* nl = std::get_if<SpectralNormalLaw>(&law)) return nl->dim;
  return static_cast<std::size_t>(
      std::get<SpectralDiscreteLaw>(law).atoms.cols());
}

bool SpectralMsvParams::valid() const {
  if (!(alpha > 0.0 && alpha <= 2.0) || alpha == 1.0) return false;
  if (!(beta >= -1.0 && beta <= 1.0)) return false;
  if (!(sigma > 0.0)) return false;
  const std::size_t d = dim();
  if (d < 1) return false;
  if (mu.size() != 0 && static_cast<std::size_t>(mu.size()) != d) return false;
  if (const auto* nl = std::get_if<SpectralNormalLaw>(&law)) {
    return std::abs(nl->lag) < 1.0 && nl->phi >= 0.0 && nl->mass > 0.0 &&
           nl->lepage_atoms >= 1;
  }
  const auto& dl = std::get<SpectralDiscreteLaw>(law);
  const Eigen::Index nAtoms = dl.atoms.rows();
  if (nAtoms < 1 || dl.delta.size() != nAtoms || dl.lag.size() != nAtoms)
    return false;
  if (!(dl.phi >= 0.0)) return false;
  for (Eigen::Index i = 0; i < nAtoms; ++i) {
    if (std::abs(dl.lag(i)) >= 1.0) return false;
    if (std::abs(dl.atoms.row(i).norm() - 1.0) > 1e-6) return false;
  }
  return true;
}

Eigen::MatrixXd spectral_msv_simulate(const SpectralMsvParams& p,
                                      std::size_t n, Rng& rng) {
  if (!p.valid())
    throw DataError("spectral_msv_simulate: invalid parameters");
  if (n == 0) throw DataError("spectral_msv_simulate: n must be positive");
  const Eigen::Index d = static_cast<Eigen::Index>(p.dim());
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), d);
  const double inv_alpha = 1.0 / p.alpha;

  if (const auto* nl = std::get_if<SpectralNormalLaw>(&p.law)) {
    const std::size_t J = nl->lepage_atoms;
    const double a = 0.5 * static_cast<double>(d);
    const Pchip* inv = (d == 2) ? nullptr : &radial_inverse(a);
    const double wj = std::pow(nl->mass / static_cast<double>(J), inv_alpha);
    double w = nl->delta / (1.0 - nl->lag);
    if (nl->phi > 0.0)
      w += std::sqrt(nl->phi / (1.0 - nl->lag * nl->lag)) * rng.normal();
    Eigen::VectorXd dir(d), row(d);
    for (std::size_t t = 0; t < n; ++t) {
      const double omega2 = std::exp(w);
      const double c = gamma_p(a, 1.0 / (2.0 * omega2));
      row.setZero();
      for (std::size_t j = 0; j < J; ++j) {
        double norm2 = 0.0;
        do {
          norm2 = 0.0;
          for (Eigen::Index i = 0; i < d; ++i) {
            dir(i) = rng.normal();
            norm2 += dir(i) * dir(i);
          }
        } while (norm2 < 1e-24);
        dir /= std::sqrt(norm2);
        const double q = rng.uniform() * c;
        double g;
        if (d == 2) {
          g = -std::log1p(-q);
        } else {
          const double lo = inv->knots().front(), hi = inv->knots().back();
          g = (*inv)(std::clamp(q, lo, hi));
        }
        const double r = std::min(std::sqrt(2.0 * omega2 * g), 1.0);
        row += (wj * r * sample_standard(p.alpha, p.beta, rng)) * dir;
      }
      y.row(static_cast<Eigen::Index>(t)) = p.sigma * row.transpose();
      w = nl->delta + nl->lag * w +
          (nl->phi > 0.0 ? std::sqrt(nl->phi) * rng.normal() : 0.0);
    }
  } else {
    const auto& dl = std::get<SpectralDiscreteLaw>(p.law);
    const Eigen::Index nAtoms = dl.atoms.rows();
    Eigen::VectorXd g(nAtoms);
    for (Eigen::Index i = 0; i < nAtoms; ++i) {
      g(i) = dl.delta(i) / (1.0 - dl.lag(i));
      if (dl.phi > 0.0)
        g(i) += std::sqrt(dl.phi / (1.0 - dl.lag(i) * dl.lag(i))) *
                rng.normal();
    }
    Eigen::VectorXd row(d);
    for (std::size_t t = 0; t < n; ++t) {
      row.setZero();
      for (Eigen::Index i = 0; i < nAtoms; ++i)
        row += (std::exp(g(i) * inv_alpha) *
                sample_standard(p.alpha, p.beta, rng)) *
               dl.atoms.row(i).transpose();
      y.row(static_cast<Eigen::Index>(t)) = p.sigma * row.transpose();
      for (Eigen::Index i = 0; i < nAtoms; ++i)
        g(i) = dl.delta(i) + dl.lag(i) * g(i) +
               (dl.phi > 0.0 ? std::sqrt(dl.phi) * rng.normal() : 0.0);
    }
  }
  if (p.mu.size() != 0) y.rowwise() += p.mu.transpose();
  return y;
}

double implied_omega2(const Eigen::MatrixXd& atoms,
                      const Eigen::VectorXd& weights) {
  if (atoms.rows() != weights.size() || atoms.rows() == 0)
    throw DataError("implied_omega2: atom/weight shapes disagree");
  const double total = weights.sum();
  if (!(total > 0.0))
    throw DataError("implied_omega2: weights must carry positive mass");
  const Eigen::VectorXd sbar = (atoms.transpose() * weights) / total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < atoms.rows(); ++i)
    acc += weights(i) * (atoms.row(i).transpose() - sbar).squaredNorm();
  return acc;
}

namespace {

// Data-crafted center for the spectral proposals: AR(1) statistics of a
// log-squared volatility proxy plus a quick tail-index estimate.
struct SpectralCenter {
  double delta = 0.0;
  double lag = 0.5;
  double sqrt_phi = 0.1;
};

SpectralCenter center_from_series(const std::vector<double>& w, double dims) {
  SpectralCenter c;
  const Ar1Fit f = ar1_ls(w);
  if (!f.ok) return c;
  c.lag = std::clamp(f.slope, -0.9, 0.97);
  c.delta = (1.0 - c.lag) * (f.mean - std::log(std::max(dims, 1.0)));
  c.sqrt_phi =
      std::clamp(0.3 * std::sqrt(std::max(f.resid_var, 1e-4)), 0.01, 1.0);
  return c;
}

double quick_alpha(const std::vector<double>& x, double amin, double amax) {
  if (x.size() < 20) return 0.5 * (amin + amax);
  const double spread = robust_spread(x);
  std::vector<double> taus(8);
  for (std::size_t k = 0; k < taus.size(); ++k)
    taus[k] = (0.15 + 1.05 * static_cast<double>(k) / 7.0) / spread;
  try {
    const BackMapResult est = ecf_to_stable(x, taus);
    if (est.params.valid())
      return std::clamp(est.params.alpha, amin + 0.02, amax - 0.01);
  } catch (const Error&) {
  }
  return 0.5 * (amin + amax);
}

}  // namespace

SpectralMsvFit fit_spectral_msv(const Eigen::MatrixXd& data,
                                SpectralVariant variant,
                                SpectralProposalKind kind,
                                const SpectralMsvConfig& cfg) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (n < 60 || d < 1)
    throw DataError("fit_spectral_msv: need at least 60 rows");
  const Eigen::VectorXd loc = column_medians(data);
  Eigen::MatrixXd centered = data;
  centered.rowwise() -= loc.transpose();
  const std::vector<double> flat = flatten(centered);
  const double spread = robust_spread(flat);
  const std::vector<Eigen::MatrixXd> taus = tau_matrix_grid(
      cfg.freq_count, static_cast<std::size_t>(d), cfg.block,
      cfg.tau_lo / spread, cfg.tau_hi / spread, cfg.seed ^ 0x5bec7a11ULL);

  const std::size_t n_atoms = cfg.atoms;
  Eigen::MatrixXd atom_set;
  if (variant == SpectralVariant::Discrete)
    atom_set =
        sphere_atoms(static_cast<int>(n_atoms), static_cast<int>(d));
  const Eigen::Index na = static_cast<Eigen::Index>(n_atoms);
  const Eigen::Index p_dim =
      variant == SpectralVariant::Normal ? 4 : 2 * na + 2;
  const Eigen::Index i_phi = p_dim - 2;  // sqrt_phi slot
  const Eigen::Index i_alpha = p_dim - 1;
  const double amin = cfg.alpha_min, amax = cfg.alpha_max;

  auto make_params = [variant, d, atom_set, na,
                      J = cfg.lepage_atoms](const Eigen::VectorXd& th) {
    SpectralMsvParams sp;
    if (variant == SpectralVariant::Normal) {
      SpectralNormalLaw law;
      law.delta = th(0);
      law.lag = th(1);
      law.phi = th(2) * th(2);
      law.mass = 1.0;
      law.dim = static_cast<std::size_t>(d);
      law.lepage_atoms = J;
      sp.law = law;
      sp.alpha = th(3);
    } else {
      SpectralDiscreteLaw law;
      law.atoms = atom_set;
      law.delta = th.segment(0, na);
      law.lag = th.segment(na, na);
      law.phi = th(2 * na) * th(2 * na);
      sp.law = law;
      sp.alpha = th(2 * na + 1);
    }
    return sp;
  };

  AbcModel model;
  model.n = static_cast<std::size_t>(n);
  model.simulate = [make_params](const Eigen::VectorXd& th, std::size_t len,
                                 Rng& rng) {
    return flatten(spectral_msv_simulate(make_params(th), len, rng));
  };
  model.summarize = [taus, d](const std::vector<double>& s) {
    return block_ecf(unflatten(s, d), taus);
  };
  model.distance = max_modulus_distance;

  AbcPrior prior;
  prior.log_density = [variant, na, i_phi, i_alpha, amin,
                       amax](const Eigen::VectorXd& th) {
    const double sqrt_phi = th(i_phi), alpha = th(i_alpha);
    if (sqrt_phi < 1e-4 || sqrt_phi > 1.5 || alpha <= amin || alpha > amax)
      return -std::numeric_limits<double>::infinity();
    double lp = 0.0;
    const Eigen::Index blocks = variant == SpectralVariant::Normal ? 1 : na;
    for (Eigen::Index i = 0; i < blocks; ++i) {
      const double delta = th(i), lag = th(blocks + i);
      if (std::abs(lag) >= 0.99)
        return -std::numeric_limits<double>::infinity();
      lp += -0.5 * delta * delta;
    }
    return lp;
  };
  prior.sample = [variant, na, p_dim, amin, amax](Rng& rng) {
    Eigen::VectorXd th(p_dim);
    const Eigen::Index blocks = variant == SpectralVariant::Normal ? 1 : na;
    for (Eigen::Index i = 0; i < blocks; ++i) {
      th(i) = rng.normal();
      th(blocks + i) = rng.uniform(-0.99, 0.99);
    }
    th(p_dim - 2) = rng.uniform(1e-4, 1.5);
    th(p_dim - 1) = rng.uniform(amin, amax);
    return th;
  };

  // Independence-component center and scale from the data.
  Eigen::VectorXd center(p_dim);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p_dim, p_dim);
  double dof = cfg.proposal_dof;
  std::vector<double> coord0(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t)
    coord0[static_cast<std::size_t>(t)] = centered(t, 0);

  auto fill_center = [&](const Eigen::MatrixXd& rows_mat,
                         Eigen::VectorXd& out) {
    std::vector<double> w(static_cast<std::size_t>(rows_mat.rows()));
    if (variant == SpectralVariant::Normal) {
      for (Eigen::Index t = 0; t < rows_mat.rows(); ++t)
        w[static_cast<std::size_t>(t)] = std::log(
            std::max(rows_mat.row(t).squaredNorm(), 1e-300));
      const SpectralCenter c =
          center_from_series(w, static_cast<double>(d));
      out(0) = c.delta;
      out(1) = c.lag;
      out(2) = c.sqrt_phi;
    } else {
      double pooled_phi = 0.0;
      for (Eigen::Index i = 0; i < na; ++i) {
        for (Eigen::Index t = 0; t < rows_mat.rows(); ++t) {
          const double proj = rows_mat.row(t).dot(atom_set.row(i));
          w[static_cast<std::size_t>(t)] =
              std::log(std::max(proj * proj, 1e-300));
        }
        const SpectralCenter c = center_from_series(w, 1.0);
        out(i) = c.delta;
        out(na + i) = c.lag;
        pooled_phi += c.sqrt_phi;
      }
      out(2 * na) = pooled_phi / static_cast<double>(na);
    }
  };

  if (kind == SpectralProposalKind::Subsample) {
    std::size_t P = cfg.subsamples
                        ? cfg.subsamples
                        : std::clamp<std::size_t>(
                              static_cast<std::size_t>(n) / 75, 8, 40);
    if (variant == SpectralVariant::Discrete && P <= 2 * n_atoms)
      throw DataError(
          "fit_spectral_msv: the discrete-variant subsample proposal "
          "requires P > 2N subsamples (P=" +
          std::to_string(P) + ", N=" + std::to_string(n_atoms) +
          "); raise config.subsamples or lower config.atoms");
    std::vector<Eigen::VectorXd> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t)
      rows.push_back(centered.row(t).transpose());
    auto fit_cb =
        [&](const std::vector<Eigen::VectorXd>& sub) -> SubsampleFit {
      SubsampleFit sf;
      if (sub.size() < 12) {
        sf.ok = false;
        return sf;
      }
      Eigen::MatrixXd mat(static_cast<Eigen::Index>(sub.size()), d);
      std::vector<double> c0(sub.size());
      for (std::size_t t = 0; t < sub.size(); ++t) {
        mat.row(static_cast<Eigen::Index>(t)) = sub[t].transpose();
        c0[t] = sub[t](0);
      }
      sf.theta.resize(p_dim);
      fill_center(mat, sf.theta);
      sf.theta(i_alpha) = quick_alpha(c0, amin, amax);
      Eigen::VectorXd diag(p_dim);
      const Eigen::Index blocks =
          variant == SpectralVariant::Normal ? 1 : na;
      for (Eigen::Index i = 0; i < blocks; ++i) {
        diag(i) = 0.09;
        diag(blocks + i) = 0.0225;
      }
      diag(i_phi) = 0.0225;
      diag(i_alpha) = 0.04;
      sf.cov = diag.asDiagonal();
      return sf;
    };
    const SubsampleProposal sp = subsample_proposal(rows, P, fit_cb);
    center = sp.mean;
    cov = sp.cov;
    dof = sp.dof;
  } else {
    fill_center(centered, center);
    const PrincipalDirections pd = principal_directions(centered);
    center(i_alpha) =
        (!pd.undefined.empty() && pd.undefined[0])
            ? 0.5 * (amin + amax)
            : std::clamp(pd.alpha_hat(0), amin + 0.05, amax - 0.01);
    Eigen::VectorXd diag(p_dim);
    const Eigen::Index blocks = variant == SpectralVariant::Normal ? 1 : na;
    for (Eigen::Index i = 0; i < blocks; ++i) {
      diag(i) = 0.16;
      diag(blocks + i) = 0.04;
    }
    diag(i_phi) = 0.04;
    diag(i_alpha) = 0.09;
    cov = diag.asDiagonal();
  }

  // Clamp the center into the prior support before using it as the start.
  Eigen::VectorXd init = center;
  {
    const Eigen::Index blocks = variant == SpectralVariant::Normal ? 1 : na;
    for (Eigen::Index i = 0; i < blocks; ++i)
      init(blocks + i) = std::clamp(init(blocks + i), -0.98, 0.98);
    init(i_phi) = std::clamp(init(i_phi), 1e-3, 1.4);
    init(i_alpha) = std::clamp(init(i_alpha), amin + 1e-3, amax);
  }

  Eigen::VectorXd rw_steps(p_dim);
  {
    const Eigen::Index blocks = variant == SpectralVariant::Normal ? 1 : na;
    for (Eigen::Index i = 0; i < blocks; ++i) {
      rw_steps(i) = 0.08;
      rw_steps(blocks + i) = 0.04;
    }
    rw_steps(i_phi) = 0.04;
    rw_steps(i_alpha) = 0.04;
  }
  const AbcProposal proposal = mixture_proposal(
      student_t_proposal(center, cov, dof),
      gaussian_rw_density_proposal(rw_steps), cfg.independence_weight);

  std::vector<std::string> names;
  if (variant == SpectralVariant::Normal) {
    names = {"delta", "lag", "sqrt_phi", "alpha"};
  } else {
    for (Eigen::Index i = 0; i < na; ++i)
      names.push_back("delta_" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < na; ++i)
      names.push_back("lag_" + std::to_string(i + 1));
    names.push_back("sqrt_phi");
    names.push_back("alpha");
  }

  AbcOptions opt;
  opt.iters = cfg.iters;
  opt.burnin = cfg.burnin;
  opt.thin = cfg.thin;
  opt.seed = cfg.seed;
  opt.epsilon = cfg.epsilon;
  opt.adapt = cfg.adapt;
  opt.target_rate = cfg.target_rate;
  opt.init = init;
  AbcResult res = run_abc(flat, model, proposal, prior, names, opt);

  SpectralMsvFit fit;
  fit.chain = std::move(res.chain);
  fit.accept_rate = res.accept_rate;
  fit.final_epsilon = res.final_epsilon;
  if (variant == SpectralVariant::Discrete) {
    Eigen::VectorXd gbar(na);
    for (Eigen::Index i = 0; i < na; ++i) {
      const auto dcol = fit.chain.column(static_cast<std::size_t>(i));
      const auto lcol = fit.chain.column(static_cast<std::size_t>(na + i));
      double dm = 0.0, lm = 0.0;
      for (double v : dcol) dm += v;
      for (double v : lcol) lm += v;
      dm /= static_cast<double>(dcol.size());
      lm /= static_cast<double>(lcol.size());
      double pm = 0.0;
      const auto pcol = fit.chain.column("sqrt_phi");
      for (double v : pcol) pm += v * v;
      pm /= static_cast<double>(pcol.size());
      gbar(i) =
          std::exp(dm / (1.0 - lm) + pm / (2.0 * (1.0 - lm * lm)));
    }
    fit.implied_omega2 = implied_omega2(atom_set, gbar);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Direct MSV

DirectMsvFit fit_direct_msv(const Eigen::MatrixXd& data,
                            const DirectMsvConfig& cfg) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (n < 60 || d < 1)
    throw DataError("fit_direct_msv: need at least 60 rows");
  const Eigen::VectorXd loc = column_medians(data);
  Eigen::MatrixXd centered = data;
  centered.rowwise() -= loc.transpose();
  const std::vector<double> flat = flatten(centered);
  const double spread = robust_spread(flat);
  const std::vector<Eigen::MatrixXd> taus = tau_matrix_grid(
      cfg.freq_count, static_cast<std::size_t>(d), cfg.block,
      cfg.tau_lo / spread, cfg.tau_hi / spread, cfg.seed ^ 0xd12ec7ULL);

  const Eigen::Index J = static_cast<Eigen::Index>(cfg.atoms);
  const Eigen::MatrixXd atom_grid =
      sphere_atoms(static_cast<int>(cfg.atoms), static_cast<int>(d));
  const bool move = cfg.move_atoms;
  // layout: mu(d) | phi(d) | log_omega2 | log_g(J) | alpha | [raw atoms J*d]
  const Eigen::Index i_lw = 2 * d;
  const Eigen::Index i_g = 2 * d + 1;
  const Eigen::Index i_alpha = i_g + J;
  const Eigen::Index p_dim = i_alpha + 1 + (move ? J * d : 0);
  const double amin = cfg.alpha_min, amax = cfg.alpha_max;
  const double lw_lo = std::log(1e-4), lw_hi = std::log(4.0);

  AbcModel model;
  model.n = static_cast<std::size_t>(n);
  model.simulate = [d, J, atom_grid, move, i_lw, i_g, i_alpha](
                       const Eigen::VectorXd& th, std::size_t len,
                       Rng& rng) {
    const double omega2 = std::exp(th(i_lw));
    const double alpha = th(i_alpha);
    const double inv_alpha = 1.0 / alpha;
    Eigen::MatrixXd atoms = atom_grid;
    if (move) {
      for (Eigen::Index j = 0; j < J; ++j) {
        Eigen::VectorXd raw = th.segment(i_alpha + 1 + j * d, d);
        const double nr = raw.norm();
        atoms.row(j) =
            (nr > 1e-12 ? raw / nr : atom_grid.row(j).transpose())
                .transpose();
      }
    }
    Eigen::VectorXd h(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double phi = th(d + i);
      h(i) = std::sqrt(omega2 / (1.0 - phi * phi)) * rng.normal();
    }
    std::vector<double> out(len * static_cast<std::size_t>(d));
    Eigen::VectorXd s(d);
    std::size_t k = 0;
    for (std::size_t t = 0; t < len; ++t) {
      s.setZero();
      for (Eigen::Index j = 0; j < J; ++j)
        s += (std::exp(th(i_g + j) * inv_alpha) *
              sample_standard(alpha, 1.0, rng)) *
             atoms.row(j).transpose();
      for (Eigen::Index i = 0; i < d; ++i)
        out[k++] = th(i) + std::exp(0.5 * h(i)) * s(i);
      for (Eigen::Index i = 0; i < d; ++i)
        h(i) = th(d + i) * h(i) + std::sqrt(omega2) * rng.normal();
    }
    return out;
  };
  model.summarize = [taus, d](const std::vector<double>& s) {
    return block_ecf(unflatten(s, d), taus);
  };
  model.distance = max_modulus_distance;

  AbcPrior prior;
  prior.log_density = [d, J, move, i_lw, i_g, i_alpha, amin, amax, lw_lo,
                       lw_hi](const Eigen::VectorXd& th) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::abs(th(d + i)) >= 0.99)
        return -std::numeric_limits<double>::infinity();
      lp += -th(i) * th(i) / 8.0;
    }
    if (th(i_lw) < lw_lo || th(i_lw) > lw_hi)
      return -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < J; ++j)
      if (th(i_g + j) < -12.0 || th(i_g + j) > 8.0)
        return -std::numeric_limits<double>::infinity();
    const double alpha = th(i_alpha);
    if (alpha <= amin || alpha > amax)
      return -std::numeric_limits<double>::infinity();
    if (move)
      for (Eigen::Index j = i_alpha + 1; j < th.size(); ++j)
        lp += -0.5 * th(j) * th(j);
    return lp;
  };
  prior.sample = [d, J, move, p_dim, i_lw, i_g, i_alpha, amin, amax, lw_lo,
                  lw_hi](Rng& rng) {
    Eigen::VectorXd th(p_dim);
    for (Eigen::Index i = 0; i < d; ++i) {
      th(i) = 2.0 * rng.normal();
      th(d + i) = rng.uniform(-0.99, 0.99);
    }
    th(i_lw) = rng.uniform(lw_lo, lw_hi);
    for (Eigen::Index j = 0; j < J; ++j) th(i_g + j) = rng.uniform(-12.0, 8.0);
    th(i_alpha) = rng.uniform(amin, amax);
    if (move)
      for (Eigen::Index j = i_alpha + 1; j < p_dim; ++j) th(j) = rng.normal();
    return th;
  };

  Eigen::VectorXd init(p_dim), steps(p_dim);
  const double g0 =
      std::log(std::max(std::pow(spread, 1.7) / static_cast<double>(J),
                        1e-10));
  for (Eigen::Index i = 0; i < d; ++i) {
    init(i) = 0.0;
    init(d + i) = 0.5;
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t)
      col[static_cast<std::size_t>(t)] = centered(t, i);
    steps(i) = 0.05 * robust_spread(col);
    steps(d + i) = 0.05;
  }
  init(i_lw) = std::log(0.2);
  steps(i_lw) = 0.15;
  for (Eigen::Index j = 0; j < J; ++j) {
    init(i_g + j) = std::clamp(g0, -11.0, 7.0);
    steps(i_g + j) = 0.15;
  }
  init(i_alpha) = std::clamp(0.5 * (amin + amax), amin + 1e-3, amax);
  steps(i_alpha) = 0.05;
  if (move)
    for (Eigen::Index j = 0; j < J; ++j) {
      init.segment(i_alpha + 1 + j * d, d) = atom_grid.row(j).transpose();
      steps.segment(i_alpha + 1 + j * d, d).setConstant(0.08);
    }
  if (!cfg.steps.empty()) {
    if (static_cast<Eigen::Index>(cfg.steps.size()) != p_dim)
      throw DataError("fit_direct_msv: steps size does not match parameters");
    for (Eigen::Index i = 0; i < p_dim; ++i)
      steps(i) = cfg.steps[static_cast<std::size_t>(i)];
  }

  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < d; ++i)
    names.push_back("mu_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < d; ++i)
    names.push_back("phi_" + std::to_string(i + 1));
  names.push_back("log_omega2");
  for (Eigen::Index j = 0; j < J; ++j)
    names.push_back("log_g_" + std::to_string(j + 1));
  names.push_back("alpha");
  if (move)
    for (Eigen::Index j = 0; j < J; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        names.push_back("atom_" + std::to_string(j + 1) + "_" +
                        std::to_string(i + 1));

  AbcOptions opt;
  opt.iters = cfg.iters;
  opt.burnin = cfg.burnin;
  opt.thin = cfg.thin;
  opt.seed = cfg.seed;
  opt.epsilon = cfg.epsilon;
  opt.adapt = cfg.adapt;
  opt.target_rate = cfg.target_rate;
  opt.init = init;
  AbcResult res =
      run_abc(flat, model, gaussian_rw_proposal(steps), prior, names, opt);

  // Report omega2 and g on their natural scales; locations were fitted on
  // the centered series, so fold the median back in.
  std::vector<std::string> out_names = names;
  out_names[static_cast<std::size_t>(i_lw)] = "omega2";
  for (Eigen::Index j = 0; j < J; ++j)
    out_names[static_cast<std::size_t>(i_g + j)] =
        "g_" + std::to_string(j + 1);
  DirectMsvFit fit;
  Chain out(out_names);
  for (std::size_t r = 0; r < res.chain.size(); ++r) {
    std::vector<double> row = res.chain.row(r);
    for (Eigen::Index i = 0; i < d; ++i)
      row[static_cast<std::size_t>(i)] += loc(i);
    row[static_cast<std::size_t>(i_lw)] =
        std::exp(row[static_cast<std::size_t>(i_lw)]);
    for (Eigen::Index j = 0; j < J; ++j)
      row[static_cast<std::size_t>(i_g + j)] =
          std::exp(row[static_cast<std::size_t>(i_g + j)]);
    out.push(row);
  }
  fit.chain = std::move(out);
  fit.accept_rate = res.accept_rate;
  fit.final_epsilon = res.final_epsilon;
  if (move && fit.chain.size() > 0) {
    Eigen::MatrixXd atoms(J, d);
    for (Eigen::Index j = 0; j < J; ++j) {
      Eigen::VectorXd raw(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto col = fit.chain.column(
            static_cast<std::size_t>(i_alpha + 1 + j * d + i));
        double m = 0.0;
        for (double v : col) m += v;
        raw(i) = m / static_cast<double>(col.size());
      }
      const double nr = raw.norm();
      atoms.row(j) =
          (nr > 1e-12 ? raw / nr : atom_grid.row(j).transpose()).transpose();
    }
    fit.atoms = atoms;
  } else {
    fit.atoms = atom_grid;
  }
  return fit;
}

}  // namespace stablecf
