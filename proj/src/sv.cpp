#include "stablecf/sv.hpp"

#include "stablecf/ecf.hpp"
#include "stablecf/errors.hpp"
#include "stablecf/mixture.hpp"
#include "stablecf/optim.hpp"
#include "stablecf/special.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <numbers>

namespace stablecf {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
// Mean and variance of log chi^2_1.
constexpr double kLogChiSqMean = -1.2703628454614782;
constexpr double kLogChiSqVar = 4.934802200544679;

double clamped_logsq(double y) {
  double a = std::abs(y);
  if (a < 1e-150) a = 1e-150;
  return 2.0 * std::log(a);
}

bool gaussian_innovation(const StableParams& p) {
  return p.alpha == 2.0 && p.beta == 0.0 && p.mu == 0.0 && p.sigma > 0.0;
}

double column_sd(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

// Shared memoized surrogate for the law of log eps^2 under standardized
// stable eps.  Keyed on a rounded (alpha, beta) cell so repeated Metropolis
// visits reuse the fit; each cell is fitted with its own deterministic
// stream, so the cache content does not depend on visit order.
class LogSqMixtureCache {
 public:
  explicit LogSqMixtureCache(int components) : m_(components) {}

  const MixtureModel& get(double alpha, double beta) {
    const int ia = static_cast<int>(std::lround(alpha / 0.05));
    const int ib = static_cast<int>(std::lround(beta / 0.1));
    auto key = std::make_pair(ia, ib);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double a = 0.05 * ia;
    const double b = std::clamp(0.1 * ib, -1.0, 1.0);
    Rng rng(0x10655cf2ULL ^ (static_cast<std::uint64_t>(ia + 4096) << 20) ^
            static_cast<std::uint64_t>(ib + 4096));
    MixtureFit fit = fit_logsq_mixture(a, b, m_, rng);
    return cache_.emplace(key, fit.model).first->second;
  }

 private:
  int m_;
  std::map<std::pair<int, int>, MixtureModel> cache_;
};

}  // namespace

bool SvParams::valid() const {
  if (!(std::abs(rho) < 1.0)) return false;
  if (!(omega2 >= 0.0) || !std::isfinite(omega2)) return false;
  if (!(psi > -1.0 && psi < 1.0)) return false;
  if (!innovation.valid()) return false;
  if (psi != 0.0 && !gaussian_innovation(innovation)) return false;
  return true;
}

SvPath sv_simulate(const SvParams& p, std::size_t n, Rng& rng) {
  if (!p.valid())
    throw DataError(
        "sv_simulate: invalid parameters (|rho| < 1, omega2 >= 0, psi in "
        "(-1,1) required; nonzero psi needs alpha = 2, beta = 0, mu = 0)");
  if (n == 0) throw DataError("sv_simulate: n must be positive");
  SvPath path;
  path.y.resize(n);
  path.h.resize(n);
  const double mu_h = p.delta / (1.0 - p.rho);
  const double omega = std::sqrt(p.omega2);
  const double stat_sd = omega / std::sqrt(1.0 - p.rho * p.rho);
  path.h[0] = mu_h + stat_sd * rng.normal();
  const double root = std::sqrt(std::max(0.0, 1.0 - p.psi * p.psi));
  for (std::size_t t = 0; t < n; ++t) {
    const double e = sample_one(p.innovation, rng);
    path.y[t] = std::exp(0.5 * path.h[t]) * e;
    if (t + 1 < n) {
      const double z = rng.normal();
      double shock = z;
      if (p.psi != 0.0) {
        const double xi = e / (kSqrt2 * p.innovation.sigma);
        shock = p.psi * xi + root * z;
      }
      path.h[t + 1] = p.delta + p.rho * path.h[t] + omega * shock;
    }
  }
  return path;
}

std::complex<double> sv_gaussian_joint_cf(const SvParams& p,
                                          const std::vector<double>& taus,
                                          bool* ok) {
  if (!p.valid() || !gaussian_innovation(p.innovation))
    throw DataError(
        "sv_gaussian_joint_cf: needs valid parameters with Gaussian "
        "innovations (alpha = 2, beta = 0, mu = 0)");
  if (taus.empty()) throw DataError("sv_gaussian_joint_cf: empty frequency vector");
  if (ok) *ok = true;
  const std::size_t k = taus.size();
  const double mu_h = p.delta / (1.0 - p.rho);
  // Innovation eps = c * xi with xi standard normal shifts the log-squared
  // series by the constant 2 log c.
  const double logc = std::log(kSqrt2 * p.innovation.sigma);

  double a1 = 0.0, b = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    a1 += taus[j];
    b += taus[j] * std::pow(p.rho, static_cast<double>(j));
  }
  // c[s] = sum_{j > s} tau_j rho^{j-1-s}, 1-based; c[k] = 0.
  std::vector<double> c(k, 0.0);
  for (std::size_t s = k - 1; s-- > 0;)
    c[s] = p.rho * c[s + 1] + taus[s + 1];

  const std::complex<double> i1(0.0, 1.0);
  std::complex<double> logphi =
      i1 * (mu_h + 2.0 * logc) * a1 -
      p.omega2 * b * b / (2.0 * (1.0 - p.rho * p.rho));
  double csq = 0.0;
  for (std::size_t s = 0; s + 1 < k; ++s) csq += c[s] * c[s];
  logphi -= 0.5 * p.omega2 * (1.0 - p.psi * p.psi) * csq;

  const double log_gamma_half = 0.5723649429247001;  // log Gamma(1/2)
  const double psi2w2 = p.omega2 * p.psi * p.psi;
  for (std::size_t s = 0; s < k; ++s) {
    const std::complex<double> a(0.5, taus[s]);
    logphi += i1 * taus[s] * std::numbers::ln2 + special::log_gamma(a) -
              log_gamma_half;
    const double arg = -0.5 * psi2w2 * c[s] * c[s];
    if (arg != 0.0) {
      bool conv = true;
      std::complex<double> f = special::hyp1f1(a, 0.5, arg, 1e-12, 500, &conv);
      if (!conv && ok) *ok = false;
      logphi += std::log(f);
    }
  }
  return std::exp(logphi);
}

std::vector<Eigen::MatrixXd> tau_matrix_grid(std::size_t count,
                                             std::size_t rows,
                                             std::size_t cols, double lo,
                                             double hi, std::uint64_t seed) {
  if (count == 0 || rows == 0 || cols == 0)
    throw DataError("tau_matrix_grid: count, rows and cols must be positive");
  if (!(lo > 0.0) || hi < lo)
    throw DataError("tau_matrix_grid: need 0 < lo <= hi");
  Rng rng(0x7a05a3c1d2e4f607ULL ^ seed);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  for (std::size_t g = 0; g < count; ++g) {
    Eigen::MatrixXd t(rows, cols);
    double norm2 = 0.0;
    do {
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t(i, j) = rng.normal();
      norm2 = t.norm();
    } while (norm2 < 1e-12);
    const double radius =
        count == 1 ? lo
                   : lo + (hi - lo) * static_cast<double>(g) /
                             static_cast<double>(count - 1);
    out.push_back(t * (radius / norm2));
  }
  return out;
}

Eigen::VectorXd block_ecf(const Eigen::MatrixXd& data,
                          const std::vector<Eigen::MatrixXd>& taus) {
  if (taus.empty()) throw DataError("block_ecf: empty frequency set");
  const std::size_t d = static_cast<std::size_t>(data.cols());
  const std::size_t bsz = static_cast<std::size_t>(taus.front().cols());
  for (const auto& t : taus)
    if (static_cast<std::size_t>(t.rows()) != d ||
        static_cast<std::size_t>(t.cols()) != bsz)
      throw DataError("block_ecf: frequency matrices must share shape d x b");
  const std::size_t n = static_cast<std::size_t>(data.rows());
  if (n < bsz) throw DataError("block_ecf: series shorter than block length");
  const std::size_t nb = n - bsz + 1;
  const std::size_t g = taus.size();
  Eigen::VectorXd out(2 * g);
  // <T, block_t>_F = sum_j data.row(t+j) . T.col(j); precompute the per-row
  // projections r_j(t) = data.row(t) . T.col(j) in one pass per T.
  for (std::size_t m = 0; m < g; ++m) {
    Eigen::MatrixXd proj = data * taus[m];  // n x b
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < nb; ++t) {
      double angle = 0.0;
      for (std::size_t j = 0; j < bsz; ++j)
        angle += proj(static_cast<Eigen::Index>(t + j),
                      static_cast<Eigen::Index>(j));
      re += std::cos(angle);
      im += std::sin(angle);
    }
    out[static_cast<Eigen::Index>(m)] = re / static_cast<double>(nb);
    out[static_cast<Eigen::Index>(g + m)] = im / static_cast<double>(nb);
  }
  return out;
}

Eigen::VectorXd block_ecf(const std::vector<double>& x,
                          const std::vector<Eigen::MatrixXd>& taus) {
  Eigen::MatrixXd data =
      Eigen::Map<const Eigen::VectorXd>(x.data(),
                                        static_cast<Eigen::Index>(x.size()));
  return block_ecf(data, taus);
}

double robust_spread(const std::vector<double>& x) {
  if (x.empty()) throw DataError("robust_spread: empty input");
  std::vector<double> tmp(x);
  auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
  std::nth_element(tmp.begin(), mid, tmp.end());
  const double med = *mid;
  for (double& v : tmp) v = std::abs(v - med);
  std::nth_element(tmp.begin(), mid, tmp.end());
  const double mad = *mid;
  if (mad > 1e-12) return 1.4826 * mad;
  const double sd = column_sd(x);
  return sd > 1e-12 ? sd : 1.0;
}

namespace {

// ---------------------------------------------------------------------------
// SV: indicator-augmented Gibbs sampler on X_t = h_t + log eps_t^2.

struct SvGibbsState {
  std::vector<double> h;
  double delta, rho, omega2, alpha, beta;
};

// Forward-filter backward-sample for the linear-Gaussian state model
//   obs[t] = h_t + N(mean[t], var[t]),  h_t = delta + rho h_{t-1} + N(0, w2),
// with the stationary prior on h_1.
void ffbs(const std::vector<double>& x, const std::vector<double>& mean,
          const std::vector<double>& var, double delta, double rho, double w2,
          std::vector<double>& h, Rng& rng) {
  const std::size_t n = x.size();
  std::vector<double> fm(n), fp(n);
  double pred_m = delta / (1.0 - rho);
  double pred_p = w2 / std::max(1e-12, 1.0 - rho * rho);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      pred_m = delta + rho * fm[t - 1];
      pred_p = rho * rho * fp[t - 1] + w2;
    }
    const double resid = x[t] - mean[t] - pred_m;
    const double s = pred_p + var[t];
    const double gain = s > 0.0 ? pred_p / s : 0.0;
    fm[t] = pred_m + gain * resid;
    fp[t] = std::max(0.0, (1.0 - gain) * pred_p);
  }
  h[n - 1] = fm[n - 1] + std::sqrt(std::max(0.0, fp[n - 1])) * rng.normal();
  for (std::size_t t = n - 1; t-- > 0;) {
    const double denom = rho * rho * fp[t] + w2;
    if (denom <= 0.0) {
      h[t] = fm[t];
      continue;
    }
    const double gain = rho * fp[t] / denom;
    const double m = fm[t] + gain * (h[t + 1] - delta - rho * fm[t]);
    const double v = std::max(0.0, fp[t] - gain * rho * fp[t]);
    h[t] = m + std::sqrt(v) * rng.normal();
  }
}

SvFit fit_sv_gibbs(const std::vector<double>& y, const SvFitConfig& cfg) {
  const std::size_t n = y.size();
  if (n < 30) throw DataError("fit_sv_stable: need at least 30 observations");
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = clamped_logsq(y[t]);

  Rng rng(cfg.seed);
  LogSqMixtureCache mixtures(cfg.mixture_components);
  const CharGrid grid = CharGrid::koutrouvelis();

  // Priors: (delta, rho) ~ N((0, 0.5), diag(1, 0.2^2)) truncated to
  // |rho| < 1; omega2 ~ IG(1.1, 0.0275); flat (alpha, beta) on the box.
  const double prior_delta_mean = 0.0, prior_delta_var = 1.0;
  const double prior_rho_mean = 0.5, prior_rho_var = 0.04;
  const double ig_a = 1.1, ig_b = 0.0275;

  SvGibbsState st;
  st.h.assign(n, 0.0);
  // Initialize from the log-squared series level.
  double xbar = 0.0;
  for (double v : x) xbar += v;
  xbar /= static_cast<double>(n);
  st.rho = 0.9;
  st.delta = (xbar - kLogChiSqMean) * (1.0 - st.rho);
  st.omega2 = 0.05;
  st.alpha = std::clamp(1.7, cfg.alpha_min, cfg.alpha_max);
  st.beta = 0.0;
  for (std::size_t t = 0; t < n; ++t) st.h[t] = xbar - kLogChiSqMean;

  std::vector<double> obs_mean(n), obs_var(n);
  std::vector<double> resid(n);
  SvFit fit{Chain({"delta", "rho", "omega2", "alpha", "beta"})};
  std::size_t shape_acc = 0, shape_tot = 0;

  for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
    const MixtureModel& mix = mixtures.get(st.alpha, st.beta);
    const std::size_t m = mix.size();

    // 1. Component indicators of log eps^2 given h.
    std::vector<double> logw(m);
    for (std::size_t t = 0; t < n; ++t) {
      const double u = x[t] - st.h[t];
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        const double z = (u - mix.means[j]) / mix.sds[j];
        logw[j] = std::log(mix.weights[j]) - std::log(mix.sds[j]) -
                  0.5 * z * z;
        best = std::max(best, logw[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < m; ++j) total += std::exp(logw[j] - best);
      double u01 = rng.uniform() * total;
      std::size_t pick = m - 1;
      for (std::size_t j = 0; j < m; ++j) {
        u01 -= std::exp(logw[j] - best);
        if (u01 <= 0.0) {
          pick = j;
          break;
        }
      }
      obs_mean[t] = mix.means[pick];
      obs_var[t] = mix.sds[pick] * mix.sds[pick];
    }

    // 2. Latent volatility by FFBS.
    ffbs(x, obs_mean, obs_var, st.delta, st.rho, st.omega2, st.h, rng);

    // 3. Conjugate (delta, rho) regression h_t on (1, h_{t-1}), t >= 2.
    {
      double s11 = 0.0, s1h = 0.0, shh = 0.0, s1y = 0.0, shy = 0.0;
      for (std::size_t t = 1; t < n; ++t) {
        const double hp = st.h[t - 1];
        s11 += 1.0;
        s1h += hp;
        shh += hp * hp;
        s1y += st.h[t];
        shy += hp * st.h[t];
      }
      Eigen::Matrix2d prec;
      prec << s11 / st.omega2 + 1.0 / prior_delta_var, s1h / st.omega2,
          s1h / st.omega2, shh / st.omega2 + 1.0 / prior_rho_var;
      Eigen::Vector2d rhs(s1y / st.omega2 +
                              prior_delta_mean / prior_delta_var,
                          shy / st.omega2 + prior_rho_mean / prior_rho_var);
      Eigen::LLT<Eigen::Matrix2d> llt(prec);
      Eigen::Vector2d mean = llt.solve(rhs);
      // Draw N(mean, prec^{-1}): solve L' z = normal pair.
      for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::Vector2d z(rng.normal(), rng.normal());
        Eigen::Vector2d draw =
            mean + llt.matrixU().solve(z);
        if (std::abs(draw[1]) < 0.999) {
          st.delta = draw[0];
          st.rho = draw[1];
          break;
        }
      }
    }

    // 4. omega2 by inverse gamma on the AR residuals.
    {
      double rss = 0.0;
      for (std::size_t t = 1; t < n; ++t) {
        const double r = st.h[t] - st.delta - st.rho * st.h[t - 1];
        rss += r * r;
      }
      const double a = ig_a + 0.5 * static_cast<double>(n - 1);
      const double bb = ig_b + 0.5 * rss;
      st.omega2 = bb / rng.gamma(a);
    }

    // 5. (alpha, beta) Metropolis on the ECF quasi-likelihood of the
    //    standardized residuals (recomputed every sweep: h moved).
    {
      for (std::size_t t = 0; t < n; ++t)
        resid[t] = y[t] * std::exp(-0.5 * st.h[t]);
      const Eigen::VectorXd zhat = ecf_stacked(resid, grid);
      const double cur_shape_ll = anf_loglik(
          StableParams{st.alpha, st.beta, 0.0, 1.0}, zhat, n, grid);
      const double pa = st.alpha + cfg.step_alpha * rng.normal();
      const double pb = st.beta + cfg.step_beta * rng.normal();
      ++shape_tot;
      if (pa > cfg.alpha_min && pa <= cfg.alpha_max && pb >= -1.0 &&
          pb <= 1.0) {
        const double prop_ll =
            anf_loglik(StableParams{pa, pb, 0.0, 1.0}, zhat, n, grid);
        if (std::log(rng.uniform()) < prop_ll - cur_shape_ll) {
          st.alpha = pa;
          st.beta = pb;
          ++shape_acc;
        }
      }
    }

    if (iter >= cfg.burnin && (iter - cfg.burnin) % cfg.thin == 0)
      fit.chain.push({st.delta, st.rho, st.omega2, st.alpha, st.beta});
  }

  fit.shape_accept_rate =
      shape_tot ? static_cast<double>(shape_acc) / shape_tot : 0.0;
  fit.accept_rate = fit.shape_accept_rate;
  if (fit.chain.size() > 1) {
    const double rho_sd = column_sd(fit.chain.column("rho"));
    fit.rho_uninformative = rho_sd > 0.75 * std::sqrt(prior_rho_var);
  }
  return fit;
}

SvFit fit_sv_abc(const std::vector<double>& y, const SvFitConfig& cfg) {
  const std::size_t n = y.size();
  if (n < 30) throw DataError("fit_sv_stable: need at least 30 observations");
  // Two block-ECF stacks: one on the raw returns (keeps the sign and hence
  // skewness information that the log-squared transform discards) and one
  // on the log-squared series (volatility level and persistence).
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = clamped_logsq(y[t]);
  const double scale_y = robust_spread(y);
  const double scale_x = robust_spread(x);
  const std::vector<Eigen::MatrixXd> taus_y =
      tau_matrix_grid(cfg.freq_count, 1, cfg.block, cfg.tau_lo / scale_y,
                      cfg.tau_hi / scale_y, cfg.seed ^ 0x5ca1eULL);
  const std::vector<Eigen::MatrixXd> taus_x =
      tau_matrix_grid(cfg.freq_count, 1, cfg.block, cfg.tau_lo / scale_x,
                      cfg.tau_hi / scale_x, cfg.seed ^ 0x10395ca1eULL);

  AbcModel model;
  model.n = n;
  model.simulate = [](const Eigen::VectorXd& th, std::size_t len,
                      Rng& rng) {
    SvParams p;
    p.delta = th[0];
    p.rho = th[1];
    p.omega2 = std::exp(th[2]);
    p.innovation = StableParams{th[3], th[4], 0.0, 1.0};
    return sv_simulate(p, len, rng).y;
  };
  const std::size_t g = cfg.freq_count;
  model.summarize = [taus_y, taus_x, g](const std::vector<double>& series) {
    const std::size_t len = series.size();
    std::vector<double> logsq(len);
    for (std::size_t t = 0; t < len; ++t) logsq[t] = clamped_logsq(series[t]);
    const Eigen::VectorXd a = block_ecf(series, taus_y);
    const Eigen::VectorXd b = block_ecf(logsq, taus_x);
    // Interleave as [Re_a; Re_b; Im_a; Im_b] so the modulus distance pairs
    // entry k with entry k + 2g.
    Eigen::VectorXd out(4 * g);
    const Eigen::Index gi = static_cast<Eigen::Index>(g);
    out.segment(0, gi) = a.segment(0, gi);
    out.segment(gi, gi) = b.segment(0, gi);
    out.segment(2 * gi, gi) = a.segment(gi, gi);
    out.segment(3 * gi, gi) = b.segment(gi, gi);
    return out;
  };
  model.distance = max_modulus_distance;

  const double amin = cfg.alpha_min, amax = cfg.alpha_max;
  const double lw_lo = std::log(1e-4), lw_hi = std::log(4.0);
  AbcPrior prior;
  prior.log_density = [amin, amax, lw_lo, lw_hi](const Eigen::VectorXd& th) {
    if (std::abs(th[1]) >= 0.99) return -std::numeric_limits<double>::infinity();
    if (th[2] < lw_lo || th[2] > lw_hi)
      return -std::numeric_limits<double>::infinity();
    if (th[3] <= amin || th[3] > amax)
      return -std::numeric_limits<double>::infinity();
    if (th[4] < -1.0 || th[4] > 1.0)
      return -std::numeric_limits<double>::infinity();
    return -0.5 * th[0] * th[0];  // delta ~ N(0,1); the rest flat
  };
  prior.sample = [amin, amax, lw_lo, lw_hi](Rng& rng) {
    Eigen::VectorXd th(5);
    th[0] = rng.normal();
    th[1] = rng.uniform(-0.99, 0.99);
    th[2] = rng.uniform(lw_lo, lw_hi);
    th[3] = rng.uniform(amin, amax);
    th[4] = rng.uniform(-1.0, 1.0);
    return th;
  };

  Eigen::VectorXd steps =
      Eigen::Map<const Eigen::VectorXd>(cfg.abc_steps.data(), 5);
  AbcOptions opt;
  opt.iters = cfg.iters;
  opt.burnin = cfg.burnin;
  opt.thin = cfg.thin;
  opt.seed = cfg.seed;
  opt.epsilon = cfg.epsilon;
  opt.adapt = cfg.adapt;
  opt.target_rate = cfg.target_rate;
  AbcResult res = run_abc(y, model, gaussian_rw_proposal(steps), prior,
                          {"delta", "rho", "log_omega2", "alpha", "beta"},
                          opt);

  SvFit fit{Chain({"delta", "rho", "omega2", "alpha", "beta"})};
  for (std::size_t i = 0; i < res.chain.size(); ++i) {
    const auto& r = res.chain.row(i);
    fit.chain.push({r[0], r[1], std::exp(r[2]), r[3], r[4]});
  }
  fit.accept_rate = res.accept_rate;
  fit.final_epsilon = res.final_epsilon;
  if (fit.chain.size() > 1) {
    const double rho_sd = column_sd(fit.chain.column("rho"));
    fit.rho_uninformative = rho_sd > 0.75 * (1.98 / std::sqrt(12.0));
  }
  return fit;
}

}  // namespace

SvFit fit_sv_stable(const std::vector<double>& y, SvMethod method,
                    const SvFitConfig& config) {
  return method == SvMethod::MixtureGibbs ? fit_sv_gibbs(y, config)
                                          : fit_sv_abc(y, config);
}

// ---------------------------------------------------------------------------
// GARCH

bool GarchParams::valid() const {
  return a0 > 0.0 && a1 >= 0.0 && a2 >= 0.0 && std::isfinite(mu) &&
         innovation.valid();
}

std::vector<double> garch_simulate(const GarchParams& p, std::size_t n,
                                   Rng& rng, std::size_t warmup) {
  if (!p.valid()) throw DataError("garch_simulate: invalid parameters");
  if (n == 0) throw DataError("garch_simulate: n must be positive");
  const std::size_t total = n + warmup;
  std::vector<double> out(n);
  // Explosive settings (feasible under heavy tails) are allowed; the
  // recursion is capped far above any physical scale so the path stays
  // finite instead of overflowing to inf/NaN.
  constexpr double kCap = 1e280;
  double h = p.a0 / std::max(1.0 - p.a2, 0.05);
  double prev_dev2 = h;  // squared deviation of the pre-sample observation
  for (std::size_t t = 0; t < total; ++t) {
    if (t > 0) h = std::min(p.a0 + p.a1 * prev_dev2 + p.a2 * h, kCap);
    const double e = sample_one(p.innovation, rng);
    const double xt = p.mu + std::sqrt(h) * e;
    prev_dev2 = std::min((xt - p.mu) * (xt - p.mu), kCap);
    if (t >= warmup) out[t - warmup] = xt;
  }
  return out;
}

namespace {

// Volatility recursion given observed data; h_1 from an initial window.
void garch_filter(const std::vector<double>& x, double mu, double a0,
                  double a1, double a2, std::size_t init_window,
                  std::vector<double>& h) {
  const std::size_t n = x.size();
  h.resize(n);
  double h1 = 0.0;
  const std::size_t w = std::min(init_window, n);
  for (std::size_t t = 0; t < w; ++t) h1 += (x[t] - mu) * (x[t] - mu);
  h1 = std::max(h1 / static_cast<double>(w), 1e-12);
  h[0] = h1;
  for (std::size_t t = 1; t < n; ++t) {
    const double dev = x[t - 1] - mu;
    h[t] = a0 + a1 * std::min(dev * dev, 1e280) + a2 * h[t - 1];
    h[t] = std::clamp(h[t], 1e-300, 1e280);
  }
}

GarchFit finalize_garch(Chain&& raw, double accept, double eps) {
  GarchFit fit{Chain({"a0", "a1", "a2", "alpha", "beta"})};
  std::size_t explosive = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw.row(i);
    const double a0 = std::exp(r[0]);
    fit.chain.push({a0, r[1], r[2], r[3], r[4]});
    if (r[1] + r[2] >= 1.0) ++explosive;
  }
  fit.accept_rate = accept;
  fit.final_epsilon = eps;
  fit.explosive_share =
      raw.size() ? static_cast<double>(explosive) / raw.size() : 0.0;
  return fit;
}

GarchFit fit_garch_abc(const std::vector<double>& x,
                       const GarchFitConfig& cfg) {
  const std::size_t n = x.size();
  if (n < 30) throw DataError("fit_garch_stable: need at least 30 observations");
  const double mu = cfg.mu;
  // First differences of log((x_t - mu)^2) stay stationary even when the
  // volatility recursion drifts (a1 + a2 >= 1 is admissible under heavy
  // tails), so they anchor the summary.  Raw-series blocks add sign and
  // level information but carry no signal once the path's scale wanders
  // over orders of magnitude, so they join the stack only when the observed
  // series looks scale-stable across its two halves.
  std::vector<double> du0(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t)
    du0[t] = clamped_logsq(x[t + 1] - mu) - clamped_logsq(x[t] - mu);
  const double scale_du = robust_spread(du0);
  std::vector<double> first_half(x.begin(), x.begin() + n / 2);
  std::vector<double> second_half(x.begin() + n / 2, x.end());
  const double half_ratio =
      robust_spread(first_half) / std::max(robust_spread(second_half), 1e-300);
  const bool use_raw = half_ratio > 0.01 && half_ratio < 100.0;
  const std::vector<Eigen::MatrixXd> taus_du =
      tau_matrix_grid(cfg.freq_count, 1, cfg.block, cfg.tau_lo / scale_du,
                      cfg.tau_hi / scale_du, cfg.seed ^ 0x6a3cULL);
  std::vector<Eigen::MatrixXd> taus_y;
  if (use_raw) {
    const double scale_y = robust_spread(x);
    taus_y =
        tau_matrix_grid(cfg.freq_count, 1, cfg.block, cfg.tau_lo / scale_y,
                        cfg.tau_hi / scale_y, cfg.seed ^ 0x6a3c0000ULL);
  }
  const std::size_t warm = cfg.warmup;

  AbcModel model;
  model.n = n;
  model.simulate = [mu, warm](const Eigen::VectorXd& th, std::size_t len,
                              Rng& rng) {
    GarchParams p;
    p.a0 = std::exp(th[0]);
    p.a1 = th[1];
    p.a2 = th[2];
    p.mu = mu;
    p.innovation = StableParams{th[3], th[4], 0.0, 1.0};
    return garch_simulate(p, len, rng, warm);
  };
  const std::size_t g = cfg.freq_count;
  model.summarize = [taus_du, taus_y, g, mu,
                     use_raw](const std::vector<double>& series) {
    const std::size_t len = series.size();
    std::vector<double> du(len - 1);
    for (std::size_t t = 0; t + 1 < len; ++t)
      du[t] =
          clamped_logsq(series[t + 1] - mu) - clamped_logsq(series[t] - mu);
    const Eigen::VectorXd a = block_ecf(du, taus_du);
    const Eigen::Index gi = static_cast<Eigen::Index>(g);
    if (!use_raw) return a;
    const Eigen::VectorXd b = block_ecf(series, taus_y);
    Eigen::VectorXd out(4 * gi);
    out.segment(0, gi) = a.segment(0, gi);
    out.segment(gi, gi) = b.segment(0, gi);
    out.segment(2 * gi, gi) = a.segment(gi, gi);
    out.segment(3 * gi, gi) = b.segment(gi, gi);
    return out;
  };
  model.distance = max_modulus_distance;

  const double amin = cfg.alpha_min, amax = cfg.alpha_max;
  const double la_lo = std::log(1e-5), la_hi = 0.0;
  AbcPrior prior;
  prior.log_density = [amin, amax, la_lo, la_hi](const Eigen::VectorXd& th) {
    const bool ok = th[0] >= la_lo && th[0] <= la_hi && th[1] >= 0.0 &&
                    th[1] <= 1.0 && th[2] >= 0.0 && th[2] <= 1.0 &&
                    th[3] > amin && th[3] <= amax && th[4] >= -1.0 &&
                    th[4] <= 1.0;
    return ok ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  prior.sample = [amin, amax, la_lo, la_hi](Rng& rng) {
    Eigen::VectorXd th(5);
    th[0] = rng.uniform(la_lo, la_hi);
    th[1] = rng.uniform(0.0, 1.0);
    th[2] = rng.uniform(0.0, 1.0);
    th[3] = rng.uniform(amin, amax);
    th[4] = rng.uniform(-1.0, 1.0);
    return th;
  };

  Eigen::VectorXd steps =
      Eigen::Map<const Eigen::VectorXd>(cfg.abc_steps.data(), 5);
  AbcOptions opt;
  opt.iters = cfg.iters;
  opt.burnin = cfg.burnin;
  opt.thin = cfg.thin;
  opt.seed = cfg.seed;
  opt.epsilon = cfg.epsilon;
  opt.adapt = cfg.adapt;
  opt.target_rate = cfg.target_rate;
  AbcResult res = run_abc(x, model, gaussian_rw_proposal(steps), prior,
                          {"log_a0", "a1", "a2", "alpha", "beta"}, opt);
  return finalize_garch(std::move(res.chain), res.accept_rate,
                        res.final_epsilon);
}

// Two-block Metropolis-within-Gibbs, mirroring the SV sampler's division of
// labor: the volatility-recursion block (log a0, a1, a2) is scored by the
// normal-mixture pseudo-likelihood of log((x_t - mu)^2) - log h_t(theta),
// whose observation-side Jacobian is parameter-free, while the shape block
// (alpha, beta) is scored by the ECF quasi-likelihood of the standardized
// residuals (x_t - mu) / sqrt(h_t).  Each block's step scale adapts toward
// 25% acceptance during burn-in and is frozen afterwards.
GarchFit fit_garch_mixture(const std::vector<double>& x,
                           const GarchFitConfig& cfg) {
  const std::size_t n = x.size();
  if (n < 30) throw DataError("fit_garch_stable: need at least 30 observations");
  LogSqMixtureCache mixtures(cfg.mixture_components);
  std::vector<double> u(n);
  for (std::size_t t = 0; t < n; ++t) u[t] = clamped_logsq(x[t] - cfg.mu);

  const double amin = cfg.alpha_min, amax = cfg.alpha_max;
  const double la_lo = std::log(1e-5), la_hi = 0.0;
  const double mu = cfg.mu;
  const std::size_t init_window = cfg.variance_init_window;
  const CharGrid grid = CharGrid::koutrouvelis();

  auto vol_ll = [&](const Eigen::VectorXd& v, double alpha,
                    double beta) -> double {
    if (v[0] < la_lo || v[0] > la_hi || v[1] < 0.0 || v[1] > 1.0 ||
        v[2] < 0.0 || v[2] > 1.0)
      return -std::numeric_limits<double>::infinity();
    const MixtureModel& mix = mixtures.get(alpha, beta);
    std::vector<double> h;
    garch_filter(x, mu, std::exp(v[0]), v[1], v[2], init_window, h);
    double ll = 0.0;
    const std::size_t m = mix.size();
    for (std::size_t t = 0; t < n; ++t) {
      const double z0 = u[t] - std::log(h[t]);
      double dens = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double z = (z0 - mix.means[j]) / mix.sds[j];
        dens += mix.weights[j] / mix.sds[j] * std::exp(-0.5 * z * z);
      }
      ll += std::log(std::max(dens, 1e-300));
    }
    return ll;
  };

  // Initialize from a moment-style guess: moderate persistence.
  Eigen::VectorXd vol(3);
  double v0 = 0.0;
  const std::size_t w = std::min<std::size_t>(n, 200);
  for (std::size_t t = 0; t < w; ++t) v0 += (x[t] - mu) * (x[t] - mu);
  v0 = std::max(v0 / static_cast<double>(w), 1e-8);
  vol << std::log(std::clamp(0.05 * v0, 2e-5, 0.5)), 0.1, 0.8;
  double alpha = std::clamp(1.7, amin + 0.01, amax);
  double beta = 0.0;

  Rng rng(cfg.seed);
  double cur_vol_ll = vol_ll(vol, alpha, beta);
  if (!std::isfinite(cur_vol_ll))
    throw DataError("fit_garch_stable: initial state has non-finite target");

  std::vector<double> h, resid(n);
  auto shape_ll = [&](double a, double b) -> double {
    const Eigen::VectorXd zhat = ecf_stacked(resid, grid);
    return anf_loglik(StableParams{a, b, 0.0, 1.0}, zhat, n, grid);
  };

  double mult_vol = 1.0, mult_shape = 1.0;
  std::size_t vwin_acc = 0, swin_acc = 0, win_n = 0;
  std::size_t post_acc = 0, post_n = 0;
  Chain raw({"log_a0", "a1", "a2", "alpha", "beta"});
  for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
    // Volatility block.
    {
      Eigen::VectorXd prop = vol;
      for (int j = 0; j < 3; ++j)
        prop[j] +=
            mult_vol * cfg.steps[static_cast<std::size_t>(j)] * rng.normal();
      const double lp = vol_ll(prop, alpha, beta);
      const bool accept =
          std::isfinite(lp) && std::log(rng.uniform()) < lp - cur_vol_ll;
      if (accept) {
        vol = prop;
        cur_vol_ll = lp;
        ++vwin_acc;
      }
      if (iter >= cfg.burnin) {
        ++post_n;
        if (accept) ++post_acc;
      }
    }
    // Shape block on the standardized residuals of the current recursion.
    {
      garch_filter(x, mu, std::exp(vol[0]), vol[1], vol[2], init_window, h);
      for (std::size_t t = 0; t < n; ++t)
        resid[t] = (x[t] - mu) / std::sqrt(h[t]);
      const double cur_ll = shape_ll(alpha, beta);
      const double pa = alpha + mult_shape * cfg.steps[3] * rng.normal();
      const double pb = beta + mult_shape * cfg.steps[4] * rng.normal();
      if (pa > amin && pa <= amax && pb >= -1.0 && pb <= 1.0) {
        const double lp = shape_ll(pa, pb);
        if (std::log(rng.uniform()) < lp - cur_ll) {
          alpha = pa;
          beta = pb;
          // The mixture surrogate moved with (alpha, beta).
          cur_vol_ll = vol_ll(vol, alpha, beta);
          ++swin_acc;
        }
      }
    }
    ++win_n;
    if (iter < cfg.burnin && win_n == 100) {
      mult_vol = std::clamp(
          mult_vol * std::exp(0.5 * (vwin_acc / 100.0 - 0.25)), 1e-3, 1e3);
      mult_shape = std::clamp(
          mult_shape * std::exp(0.5 * (swin_acc / 100.0 - 0.25)), 1e-3, 1e3);
      vwin_acc = swin_acc = 0;
      win_n = 0;
    }
    if (iter >= cfg.burnin && (iter - cfg.burnin) % cfg.thin == 0)
      raw.push({vol[0], vol[1], vol[2], alpha, beta});
  }
  const double accept_rate =
      post_n ? static_cast<double>(post_acc) / post_n : 0.0;
  return finalize_garch(std::move(raw), accept_rate, 0.0);
}

}  // namespace

GarchFit fit_garch_stable(const std::vector<double>& x, GarchMethod method,
                          const GarchFitConfig& config) {
  return method == GarchMethod::Abc ? fit_garch_abc(x, config)
                                    : fit_garch_mixture(x, config);
}

// ---------------------------------------------------------------------------
// Gaussian quasi-likelihood oracle on the log-squared series.

SvQmlFit sv_kalman_qml(const std::vector<double>& logsq) {
  const std::size_t n = logsq.size();
  if (n < 20) throw DataError("sv_kalman_qml: need at least 20 observations");
  auto negll = [&](const Eigen::VectorXd& th) -> double {
    const double delta = th[0];
    const double rho = std::tanh(th[1]);
    const double w2 = std::exp(th[2]);
    double pred_m = delta / (1.0 - rho);
    double pred_p = w2 / std::max(1e-10, 1.0 - rho * rho);
    double ll = 0.0;
    double fm = 0.0, fp = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) {
        pred_m = delta + rho * fm;
        pred_p = rho * rho * fp + w2;
      }
      const double s = pred_p + kLogChiSqVar;
      const double r = logsq[t] - kLogChiSqMean - pred_m;
      ll += -0.5 * std::log(2.0 * std::numbers::pi * s) - 0.5 * r * r / s;
      const double gain = pred_p / s;
      fm = pred_m + gain * r;
      fp = (1.0 - gain) * pred_p;
    }
    return -ll;
  };
  double m0 = 0.0;
  for (double v : logsq) m0 += v;
  m0 /= static_cast<double>(n);
  Eigen::VectorXd th0(3);
  th0 << (m0 - kLogChiSqMean) * (1.0 - 0.9), std::atanh(0.9), std::log(0.05);
  OptimOptions oo;
  oo.max_iter = 4000;
  oo.tol = 1e-12;
  OptimResult best = nelder_mead(negll, th0, oo);
  // One restart from a low-persistence start guards against local minima.
  Eigen::VectorXd alt(3);
  alt << m0 - kLogChiSqMean, std::atanh(0.2), std::log(0.5);
  OptimResult second = nelder_mead(negll, alt, oo);
  if (second.f < best.f) best = second;
  SvQmlFit out;
  out.delta = best.x[0];
  out.rho = std::tanh(best.x[1]);
  out.omega2 = std::exp(best.x[2]);
  out.loglik = -best.f;
  out.converged = best.converged;
  return out;
}

}  // namespace stablecf
