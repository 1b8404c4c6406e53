#include "stablecf/abc.hpp"

#include "stablecf/ecf.hpp"
#include "stablecf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace stablecf {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Eigen::VectorXd AbcModel::summary(const std::vector<double>& data) const {
  if (summarize) return summarize(data);
  if (taus.empty())
    throw DataError("default CF summary needs a frequency grid");
  return cf_summary(data, taus);
}

double AbcModel::summary_distance(const Eigen::VectorXd& a,
                                  const Eigen::VectorXd& b) const {
  if (distance) return distance(a, b);
  return max_modulus_distance(a, b);
}

Eigen::VectorXd cf_summary(const std::vector<double>& data,
                           const std::vector<double>& taus) {
  auto phat = ecf(data, taus);
  const Eigen::Index k = static_cast<Eigen::Index>(taus.size());
  Eigen::VectorXd out(2 * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out(i) = phat[static_cast<std::size_t>(i)].real();
    out(k + i) = phat[static_cast<std::size_t>(i)].imag();
  }
  return out;
}

double max_modulus_distance(const Eigen::VectorXd& a,
                            const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw DataError("summary vectors differ in length");
  if (a.size() % 2 != 0)
    throw DataError("max-modulus distance needs stacked (Re, Im) summaries");
  const Eigen::Index k = a.size() / 2;
  double d = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double dre = a(i) - b(i);
    const double dim = a(k + i) - b(k + i);
    const double m = std::sqrt(dre * dre + dim * dim);
    // A non-finite summary (overflowed simulation) can never be "close".
    if (!std::isfinite(m)) return std::numeric_limits<double>::infinity();
    d = std::max(d, m);
  }
  return d;
}

double log_cf_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw DataError("summary vectors differ in length");
  if (a.size() % 2 != 0)
    throw DataError("log-CF distance needs stacked (Re, Im) summaries");
  const Eigen::Index k = a.size() / 2;
  double d = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const std::complex<double> pa(a(i), a(k + i));
    const std::complex<double> pb(b(i), b(k + i));
    if (std::abs(pa) < 1e-12 || std::abs(pb) < 1e-12)
      return std::numeric_limits<double>::infinity();
    d = std::max(d, std::abs(std::log(pa) - std::log(pb)));
  }
  return d;
}

AbcProposal gaussian_rw_proposal(const Eigen::VectorXd& steps) {
  if (steps.size() == 0 || steps.minCoeff() <= 0.0)
    throw DataError("random-walk step sizes must be positive");
  AbcProposal q;
  q.sample = [steps](const Eigen::VectorXd& from, Rng& rng) {
    Eigen::VectorXd to = from;
    for (Eigen::Index i = 0; i < to.size(); ++i)
      to(i) += steps(i) * rng.normal();
    return to;
  };
  return q;
}

AbcProposal gaussian_rw_density_proposal(const Eigen::VectorXd& steps) {
  AbcProposal q = gaussian_rw_proposal(steps);
  q.log_density = [steps](const Eigen::VectorXd& to,
                          const Eigen::VectorXd& from) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < to.size(); ++i) {
      const double z = (to(i) - from(i)) / steps(i);
      lp += -0.5 * z * z - std::log(steps(i));
    }
    return lp - 0.5 * static_cast<double>(to.size()) *
                    std::log(2.0 * std::numbers::pi);
  };
  return q;
}

AbcProposal mixture_proposal(const AbcProposal& a, const AbcProposal& b,
                             double weight) {
  if (!(weight > 0.0 && weight < 1.0))
    throw DataError("mixture weight must lie strictly inside (0, 1)");
  if (!a.log_density || !b.log_density)
    throw DataError("mixture components must supply log_density");
  AbcProposal q;
  q.sample = [a, b, weight](const Eigen::VectorXd& from, Rng& rng) {
    return rng.uniform() < weight ? a.sample(from, rng) : b.sample(from, rng);
  };
  q.log_density = [a, b, weight](const Eigen::VectorXd& to,
                                 const Eigen::VectorXd& from) {
    const double la = std::log(weight) + a.log_density(to, from);
    const double lb = std::log1p(-weight) + b.log_density(to, from);
    const double m = std::max(la, lb);
    return m + std::log(std::exp(la - m) + std::exp(lb - m));
  };
  return q;
}

double mvt_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov, double dof) {
  const Eigen::Index p = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("proposal covariance is not positive definite");
  const Eigen::VectorXd r = x - mean;
  const Eigen::VectorXd w = llt.matrixL().solve(r);
  const double quad = w.squaredNorm();
  double half_log_det = 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    half_log_det += std::log(llt.matrixL()(i, i));
  const double pd = static_cast<double>(p);
  return std::lgamma(0.5 * (dof + pd)) - std::lgamma(0.5 * dof) -
         0.5 * pd * std::log(dof * std::numbers::pi) - half_log_det -
         0.5 * (dof + pd) * std::log1p(quad / dof);
}

AbcProposal student_t_proposal(const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, double dof) {
  if (!(dof > 0.0)) throw DataError("Student-t dof must be positive");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("proposal covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  AbcProposal q;
  q.sample = [mean, L, dof](const Eigen::VectorXd&, Rng& rng) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const double scale = std::sqrt(dof / rng.chisq(dof));
    return Eigen::VectorXd(mean + scale * (L * z));
  };
  q.log_density = [mean, cov, dof](const Eigen::VectorXd& to,
                                   const Eigen::VectorXd&) {
    return mvt_logpdf(to, mean, cov, dof);
  };
  return q;
}

Eigen::MatrixXd wishart_sample(const Eigen::MatrixXd& scale, double dof,
                               Rng& rng) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p) throw DataError("Wishart scale must be square");
  if (!(dof > static_cast<double>(p) - 1.0))
    throw DataError("Wishart dof must exceed dimension - 1");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw NumericError("Wishart scale is not positive definite");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    A(i, i) = std::sqrt(rng.chisq(dof - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  const Eigen::MatrixXd LA = llt.matrixL() * A;
  return LA * LA.transpose();
}

AbcStepResult abc_mh_step(const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& observed_summary,
                          const AbcModel& model, const AbcProposal& proposal,
                          const AbcPrior& prior, double epsilon, Rng& rng) {
  AbcStepResult out;
  out.theta = theta;
  const Eigen::VectorXd cand = proposal.sample(theta, rng);
  const double lp_cand = prior.log_density(cand);
  if (!(lp_cand > kNegInf)) {
    out.out_of_support = true;
    return out;
  }
  double dist = 0.0;
  if (std::isfinite(epsilon)) {
    auto synthetic = model.simulate(cand, model.n, rng);
    dist = model.summary_distance(model.summary(synthetic), observed_summary);
  }
  out.dist = dist;
  if (dist > epsilon) return out;
  double log_a = lp_cand - prior.log_density(theta);
  if (proposal.log_density)
    log_a += proposal.log_density(theta, cand) -
             proposal.log_density(cand, theta);
  if (log_a >= 0.0 || rng.uniform() < std::exp(log_a)) {
    out.theta = cand;
    out.accepted = true;
  }
  return out;
}

double adapt_epsilon(double rate, double epsilon, double target, double eta) {
  // rate below target => tolerance too tight => epsilon must grow
  return epsilon * std::exp(eta * (target - rate));
}

AbcResult run_abc(const std::vector<double>& data, const AbcModel& model,
                  const AbcProposal& proposal, const AbcPrior& prior,
                  const std::vector<std::string>& names,
                  const AbcOptions& options) {
  if (!prior.log_density) throw DataError("prior log density is required");
  if (!proposal.sample) throw DataError("proposal sampler is required");
  if (options.burnin >= options.iters)
    throw DataError("burn-in must be shorter than the run");
  if (options.thin == 0) throw DataError("thinning must be at least 1");
  Rng rng(options.seed);
  Eigen::VectorXd theta;
  if (options.init.size() > 0) {
    theta = options.init;
  } else {
    if (!prior.sample) throw DataError("no initial state and no prior sampler");
    theta = prior.sample(rng);
  }
  if (static_cast<std::size_t>(theta.size()) != names.size())
    throw DataError("parameter names and state dimension differ");
  if (!(prior.log_density(theta) > kNegInf))
    throw DataError("initial state outside prior support");

  const bool needs_sim = !(std::isinf(options.epsilon) && options.epsilon > 0);
  if (needs_sim && !model.simulate)
    throw DataError("model simulator is required for finite tolerance");
  const Eigen::VectorXd s_obs =
      needs_sim ? model.summary(data) : Eigen::VectorXd();

  double eps = options.epsilon;
  if (std::isnan(eps)) {
    // pilot: median prior-predictive distance
    if (!prior.sample)
      throw DataError("pilot tolerance initialization needs a prior sampler");
    std::vector<double> dists;
    for (int i = 0; i < 50; ++i) {
      const Eigen::VectorXd t = prior.sample(rng);
      auto synthetic = model.simulate(t, model.n, rng);
      dists.push_back(
          model.summary_distance(model.summary(synthetic), s_obs));
    }
    std::sort(dists.begin(), dists.end());
    eps = dists[dists.size() / 2];
  }

  AbcResult res(names);
  res.seed = options.seed;
  res.thin = options.thin;
  res.epsilon_trace.reserve(options.iters);
  std::size_t window_steps = 0, window_accepts = 0;
  std::size_t post_steps = 0, post_accepts = 0;
  std::vector<double> row(names.size());
  for (std::size_t it = 0; it < options.iters; ++it) {
    auto st = abc_mh_step(theta, s_obs, model, proposal, prior, eps, rng);
    theta = st.theta;
    if (st.out_of_support) ++res.out_of_support;
    res.epsilon_trace.push_back(eps);
    if (it < options.burnin) {
      if (options.adapt) {
        ++window_steps;
        window_accepts += st.accepted ? 1 : 0;
        if (window_steps == options.adapt_window) {
          const double rate = static_cast<double>(window_accepts) /
                              static_cast<double>(window_steps);
          eps = adapt_epsilon(rate, eps, options.target_rate, options.eta);
          window_steps = window_accepts = 0;
        }
      }
    } else {
      ++post_steps;
      post_accepts += st.accepted ? 1 : 0;
      if ((it - options.burnin) % options.thin == 0) {
        for (std::size_t j = 0; j < row.size(); ++j)
          row[j] = theta(static_cast<Eigen::Index>(j));
        res.chain.push(row);
      }
    }
  }
  res.final_epsilon = eps;
  res.accept_rate = post_steps == 0 ? 0.0
                                    : static_cast<double>(post_accepts) /
                                          static_cast<double>(post_steps);
  return res;
}

MhResult metropolis_chain(
    const std::function<double(const Eigen::VectorXd&)>& log_target,
    const AbcProposal& proposal, const std::vector<std::string>& names,
    const AbcOptions& options) {
  if (options.init.size() == 0)
    throw DataError("Metropolis runner needs an initial state");
  if (options.burnin >= options.iters)
    throw DataError("burn-in must be shorter than the run");
  if (options.thin == 0) throw DataError("thinning must be at least 1");
  Rng rng(options.seed);
  Eigen::VectorXd theta = options.init;
  double lp = log_target(theta);
  if (!std::isfinite(lp))
    throw DataError("initial state has non-finite log target");
  MhResult res(names);
  std::size_t post_steps = 0, post_accepts = 0;
  std::vector<double> row(names.size());
  for (std::size_t it = 0; it < options.iters; ++it) {
    const Eigen::VectorXd cand = proposal.sample(theta, rng);
    double lp_cand = log_target(cand);
    bool accepted = false;
    if (std::isfinite(lp_cand)) {
      double log_a = lp_cand - lp;
      if (proposal.log_density)
        log_a += proposal.log_density(theta, cand) -
                 proposal.log_density(cand, theta);
      if (log_a >= 0.0 || rng.uniform() < std::exp(log_a)) {
        theta = cand;
        lp = lp_cand;
        accepted = true;
      }
    }
    if (it >= options.burnin) {
      ++post_steps;
      post_accepts += accepted ? 1 : 0;
      if ((it - options.burnin) % options.thin == 0) {
        for (std::size_t j = 0; j < row.size(); ++j)
          row[j] = theta(static_cast<Eigen::Index>(j));
        res.chain.push(row);
      }
    }
  }
  res.accept_rate = post_steps == 0 ? 0.0
                                    : static_cast<double>(post_accepts) /
                                          static_cast<double>(post_steps);
  return res;
}

namespace {

SubsampleProposal blend_subsample_fits(const std::vector<SubsampleFit>& fits,
                                       std::size_t n_rows,
                                       std::size_t dropped) {
  if (fits.size() < 2)
    throw DataError("fewer than 2 subsample fits survived");
  const Eigen::Index p = fits.front().theta.size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const auto& f : fits) {
    if (f.theta.size() != p || f.cov.rows() != p || f.cov.cols() != p)
      throw DataError("subsample fits disagree in dimension");
    mean += f.theta;
  }
  mean /= static_cast<double>(fits.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  for (const auto& f : fits) {
    const Eigen::VectorXd d = f.theta - mean;
    cov += f.cov + d * d.transpose();
  }
  cov /= 2.0 * static_cast<double>(fits.size());
  SubsampleProposal out;
  out.mean = mean;
  out.cov = cov;
  out.dof = std::max(3.0, static_cast<double>(n_rows) -
                              static_cast<double>(p));
  out.used = fits.size();
  out.dropped = dropped;
  return out;
}

}  // namespace

SubsampleProposal subsample_proposal(
    const std::vector<Eigen::VectorXd>& rows, std::size_t P,
    const std::function<SubsampleFit(const std::vector<Eigen::VectorXd>&)>&
        fit) {
  if (P < 2) throw DataError("need at least 2 subsamples");
  if (rows.size() < P) throw DataError("fewer observations than subsamples");
  std::vector<SubsampleFit> fits;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t lo = i * rows.size() / P;
    const std::size_t hi = (i + 1) * rows.size() / P;
    std::vector<Eigen::VectorXd> part(rows.begin() + lo, rows.begin() + hi);
    SubsampleFit f = fit(part);
    if (f.ok)
      fits.push_back(std::move(f));
    else
      ++dropped;
  }
  return blend_subsample_fits(fits, rows.size(), dropped);
}

SubsampleProposal subsample_proposal(
    const std::vector<double>& data, std::size_t P,
    const std::function<SubsampleFit(const std::vector<double>&)>& fit) {
  if (P < 2) throw DataError("need at least 2 subsamples");
  if (data.size() < P) throw DataError("fewer observations than subsamples");
  std::vector<SubsampleFit> fits;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t lo = i * data.size() / P;
    const std::size_t hi = (i + 1) * data.size() / P;
    std::vector<double> part(data.begin() + lo, data.begin() + hi);
    SubsampleFit f = fit(part);
    if (f.ok)
      fits.push_back(std::move(f));
    else
      ++dropped;
  }
  return blend_subsample_fits(fits, data.size(), dropped);
}

}  // namespace stablecf
