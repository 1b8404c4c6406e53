#include "stablecf/ecf.hpp"

#include "stablecf/csv.hpp"
#include "stablecf/errors.hpp"
#include "stablecf/parallel.hpp"
#include "stablecf/special.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

namespace stablecf {

using std::numbers::pi;

CharGrid::CharGrid(std::vector<double> taus) : taus_(std::move(taus)) {
  if (taus_.empty() || taus_.size() > 50)
    throw DataError("grid size must be in [1, 50]");
  double prev = 0.0;
  for (double t : taus_) {
    if (!(t > prev)) throw DataError("grid points must be strictly increasing and positive");
    prev = t;
  }
}

CharGrid CharGrid::from_increments(double tau1, const std::vector<double>& h) {
  if (!(tau1 > 0.0)) throw DataError("tau_1 must be positive");
  std::vector<double> taus{tau1};
  for (double hj : h) {
    if (hj == 0.0) throw DataError("zero grid increment");
    taus.push_back(taus.back() + hj * hj);
  }
  return CharGrid(std::move(taus));
}

CharGrid CharGrid::koutrouvelis() {
  std::vector<double> taus(15);
  for (int k = 1; k <= 15; ++k) taus[k - 1] = pi * k / 25.0;
  return CharGrid(std::move(taus));
}

CharGrid CharGrid::scaled(double a, int count) {
  if (!(a > 0.0) || count < 1) throw DataError("bad scaled-grid parameters");
  std::vector<double> taus(count);
  for (int k = 1; k <= count; ++k)
    taus[k - 1] = a * static_cast<double>(k) / static_cast<double>(count);
  return CharGrid(std::move(taus));
}

std::vector<double> CharGrid::increments() const {
  std::vector<double> h;
  for (std::size_t j = 1; j < taus_.size(); ++j)
    h.push_back(std::sqrt(taus_[j] - taus_[j - 1]));
  return h;
}

std::vector<std::complex<double>> ecf(const std::vector<double>& data,
                                      const std::vector<double>& taus) {
  if (data.empty()) throw DataError("ecf of empty sample");
  std::vector<std::complex<double>> out(taus.size());
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t j = 0; j < taus.size(); ++j) {
    double re = 0.0, im = 0.0;
    for (double y : data) {
      re += std::cos(taus[j] * y);
      im += std::sin(taus[j] * y);
    }
    out[j] = {re * inv_n, im * inv_n};
  }
  return out;
}

Eigen::VectorXd ecf_stacked(const std::vector<double>& data,
                            const CharGrid& grid) {
  const std::size_t K = grid.size();
  auto phi = ecf(data, grid.taus());
  Eigen::VectorXd z(2 * K + 1);
  z(0) = 1.0;  // Re phi-hat at tau = 0 exactly
  for (std::size_t k = 0; k < K; ++k) {
    z(1 + k) = phi[k].real();
    z(1 + K + k) = phi[k].imag();
  }
  return z;
}

Eigen::VectorXd cf_stacked(const StableParams& p, const CharGrid& grid) {
  const std::size_t K = grid.size();
  Eigen::VectorXd z(2 * K + 1);
  z(0) = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto v = cf(p, grid.taus()[k]);
    z(1 + k) = v.real();
    z(1 + K + k) = v.imag();
  }
  return z;
}

std::vector<double> default_d_grid() {
  std::vector<double> taus(10);
  for (int i = 0; i < 10; ++i) taus[i] = -0.5 + static_cast<double>(i) / 9.0;
  return taus;
}

std::vector<double> wide_d_grid() {
  std::vector<double> taus(20);
  for (int i = 0; i < 20; ++i)
    taus[i] = -2.0 + 4.0 * static_cast<double>(i) / 19.0;
  return taus;
}

double d_statistic(const std::vector<double>& data, const StableParams& p,
                   const std::vector<double>& taus, DNorm norm) {
  if (taus.empty()) throw DataError("empty distance grid");
  auto phi_hat = ecf(data, taus);
  double worst = 0.0;
  for (std::size_t j = 0; j < taus.size(); ++j) {
    const auto diff = cf(p, taus[j]) - phi_hat[j];
    const double v = norm == DNorm::Modulus
                         ? std::abs(diff)
                         : std::max(std::abs(diff.real()), std::abs(diff.imag()));
    worst = std::max(worst, v);
  }
  return worst;
}

double CriticalValueTable::at(double level) const {
  for (const auto& r : rows)
    if (std::abs(r.level - level) < 1e-12) return r.value;
  throw DataError("level not present in critical value table");
}

CriticalValueTable critical_value_table(const StableParams& p, std::size_t n,
                                        const std::vector<double>& taus,
                                        std::size_t nsim,
                                        const std::vector<double>& levels,
                                        std::uint64_t seed, DNorm norm,
                                        int threads,
                                        const std::string& grid_id) {
  if (nsim < 1000) throw DataError("critical value table needs nsim >= 1000");
  if (n < 1) throw DataError("sample size must be positive");
  std::vector<double> ds(nsim);
  parallel_for(
      nsim,
      [&](std::size_t r) {
        Rng rng(seed, r);
        auto y = sample(p, n, rng);
        ds[r] = d_statistic(y, p, taus, norm);
      },
      threads);
  CriticalValueTable table;
  table.params = p;
  table.n = n;
  table.nsim = nsim;
  table.seed = seed;
  table.grid_id = grid_id;
  for (double lvl : levels)
    table.rows.push_back({lvl, empirical_quantile(ds, lvl)});
  return table;
}

void append_critical_values_csv(const CriticalValueTable& table,
                                const std::string& path) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot open " + path + " for writing");
  if (fresh) out << "alpha,beta,n,level,grid_id,value,nsim,seed\n";
  std::string gid = table.grid_id;
  std::replace(gid.begin(), gid.end(), ',', ';');
  for (const auto& r : table.rows) {
    out << csv::format_double(table.params.alpha) << ','
        << csv::format_double(table.params.beta) << ',' << table.n << ','
        << csv::format_double(r.level) << ',' << gid << ','
        << csv::format_double(r.value) << ',' << table.nsim << ','
        << table.seed << '\n';
  }
}

namespace {

// Covariance of the stacked (cos, sin) averages from the model CF.
Eigen::MatrixXd stacked_cov(const StableParams& p, const CharGrid& grid) {
  const std::size_t K = grid.size();
  const std::size_t d = 2 * K + 1;
  // Points tau_0 = 0, tau_1..tau_K for the Re rows; tau_1..tau_K for Im.
  std::vector<double> pts(K + 1);
  pts[0] = 0.0;
  for (std::size_t k = 0; k < K; ++k) pts[k + 1] = grid.taus()[k];
  auto re = [&](double t) { return cf(p, t).real(); };
  auto im = [&](double t) { return cf(p, t).imag(); };
  std::vector<double> re1(K + 1), im1(K + 1);
  for (std::size_t i = 0; i <= K; ++i) {
    const auto v = cf(p, pts[i]);
    re1[i] = v.real();
    im1[i] = v.imag();
    if (!std::isfinite(re1[i]) || !std::isfinite(im1[i]))
      throw NumericError("non-finite CF while assembling ECF covariance");
  }
  Eigen::MatrixXd sigma(d, d);
  for (std::size_t i = 0; i <= K; ++i) {
    for (std::size_t j = 0; j <= K; ++j) {
      const double a = 0.5 * (re(pts[i] - pts[j]) + re(pts[i] + pts[j])) -
                       re1[i] * re1[j];
      sigma(i, j) = a;
    }
    for (std::size_t j = 1; j <= K; ++j) {
      const double b = 0.5 * (im(pts[i] + pts[j]) - im(pts[i] - pts[j])) -
                       re1[i] * im1[j];
      sigma(i, K + j) = b;
      sigma(K + j, i) = b;
    }
  }
  for (std::size_t i = 1; i <= K; ++i)
    for (std::size_t j = 1; j <= K; ++j) {
      const double c = 0.5 * (re(pts[i] - pts[j]) - re(pts[i] + pts[j])) -
                       im1[i] * im1[j];
      sigma(K + i, K + j) = c;
    }
  if (!sigma.allFinite())
    throw NumericError("non-finite CF while assembling ECF covariance");
  return sigma;
}

constexpr double kSingularFloor = 1e-6;

}  // namespace

double AnfCov::log_det() const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) s += std::log(values(i));
  return s;
}

double AnfCov::quad(const Eigen::VectorXd& r) const {
  const Eigen::VectorXd w = vectors.transpose() * r;
  double q = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    q += w(i) * w(i) / values(i);
  return q;
}

AnfCov anf_covariance(const StableParams& p, const CharGrid& grid,
                      double reg_eps) {
  if (!p.valid()) throw DataError("invalid stable parameters");
  AnfCov cov;
  cov.sigma = stacked_cov(p, grid);
  cov.reg_eps = reg_eps;
  Eigen::MatrixXd reg = cov.sigma;
  reg.diagonal().array() += reg_eps;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reg);
  cov.vectors = es.eigenvectors();
  cov.values = es.eigenvalues().cwiseMax(kSingularFloor);
  return cov;
}

double anf_loglik(const StableParams& p, const Eigen::VectorXd& zhat,
                  std::size_t n, const CharGrid& grid, double reg_eps) {
  const AnfCov cov = anf_covariance(p, grid, reg_eps);
  const Eigen::VectorXd r = zhat - cf_stacked(p, grid);
  return -0.5 * cov.log_det() -
         0.5 * static_cast<double>(n) * cov.quad(r);
}

double anf_loglik(const StableParams& p, const std::vector<double>& data,
                  const CharGrid& grid, double reg_eps) {
  return anf_loglik(p, ecf_stacked(data, grid), data.size(), grid, reg_eps);
}

double log_mean_exp(const std::vector<double>& x) {
  if (x.empty()) throw DataError("log_mean_exp of empty vector");
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(x.size()));
}

double refined_loglik(const StableParams& p, const Eigen::VectorXd& zhat,
                      std::size_t n, const CharGrid& grid, RefinedKind kind,
                      const std::vector<double>& scales,
                      std::vector<double> weights, double reg_eps) {
  const std::size_t g = scales.size();
  if (g < 1) throw DataError("refined likelihood needs at least one component");
  if (weights.empty()) weights.assign(g, 1.0 / static_cast<double>(g));
  if (weights.size() != g) throw DataError("weight count mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw DataError("component weights must be positive");
    wsum += w;
  }
  const AnfCov cov = anf_covariance(p, grid, reg_eps);
  const Eigen::VectorXd r = zhat - cf_stacked(p, grid);
  const double q = cov.quad(r);
  const double logdet = cov.log_det();
  const double dim = static_cast<double>(2 * grid.size() + 1);
  const double nn = static_cast<double>(n);
  std::vector<double> terms(g);
  for (std::size_t i = 0; i < g; ++i) {
    const double lw = std::log(weights[i] / wsum);
    if (kind == RefinedKind::NormalMixture) {
      const double h = scales[i];
      if (!(h > 0.0)) throw DataError("variance multipliers must be positive");
      terms[i] = lw - 0.5 * dim * std::log(2.0 * pi) - 0.5 * logdet +
                 0.5 * dim * std::log(nn / h) - nn * q / (2.0 * h);
    } else {
      const double nu = scales[i];
      if (!(nu > 2.0)) throw DataError("Student degrees of freedom must exceed 2");
      // multivariate Student-t with scale matrix (regularized Sigma)/n
      terms[i] = lw + std::lgamma(0.5 * (nu + dim)) - std::lgamma(0.5 * nu) -
                 0.5 * dim * std::log(nu * pi) -
                 0.5 * (logdet - dim * std::log(nn)) -
                 0.5 * (nu + dim) * std::log1p(nn * q / nu);
    }
  }
  return special::log_sum_exp(terms.data(), static_cast<int>(terms.size()));
}

double refined_loglik(const StableParams& p, const std::vector<double>& data,
                      const CharGrid& grid, RefinedKind kind,
                      const std::vector<double>& scales,
                      std::vector<double> weights, double reg_eps) {
  return refined_loglik(p, ecf_stacked(data, grid), data.size(), grid, kind,
                        scales, std::move(weights), reg_eps);
}

namespace {

// 1/2 log |M| with eigenvalues floored at 1e-12; flags when flooring bites.
double half_log_det_floored(const Eigen::MatrixXd& m, bool* adjusted) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  double s = 0.0;
  bool flag = false;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double lam = es.eigenvalues()(i);
    if (lam < 1e-12) {
      lam = 1e-12;
      flag = true;
    }
    s += std::log(lam);
  }
  if (adjusted) *adjusted = flag;
  return 0.5 * s;
}

}  // namespace

LaplaceResult laplace_log_marginal(
    const std::function<double(const Eigen::VectorXd&)>& loglik,
    const std::function<double(const Eigen::VectorXd&)>& log_prior,
    const Eigen::VectorXd& mode, const Eigen::MatrixXd& curvature) {
  LaplaceResult res;
  const double d = static_cast<double>(mode.size());
  res.value = loglik(mode) + log_prior(mode) + 0.5 * d * std::log(2.0 * pi) -
              half_log_det_floored(curvature, &res.curvature_adjusted);
  return res;
}

double sim_corrected_log_marginal(const std::vector<double>& loglik_draws,
                                  const Eigen::MatrixXd& covariance) {
  const double d = static_cast<double>(covariance.rows());
  bool adjusted = false;
  return log_mean_exp(loglik_draws) + 0.5 * d * std::log(2.0 * pi) +
         half_log_det_floored(covariance, &adjusted);
}

double GridPrior::log_k_prior(int k) const {
  if (k < 1 || k > kmax) return -std::numeric_limits<double>::infinity();
  if (!poisson_k) return -std::log(static_cast<double>(kmax));
  auto raw = [&](int j) {
    return static_cast<double>(j) * std::log(lambda) - lambda -
           std::lgamma(static_cast<double>(j) + 1.0);
  };
  double norm = 0.0;
  for (int j = 1; j <= kmax; ++j) norm += std::exp(raw(j));
  return raw(k) - std::log(norm);
}

double GridPrior::log_grid_density(const CharGrid& grid) const {
  const double tau1 = grid.taus().front();
  if (tau1 < tau1_min || tau1 > tau1_max)
    return -std::numeric_limits<double>::infinity();
  double lp = -std::log(tau1) - std::log(std::log(tau1_max / tau1_min));
  for (double h : grid.increments())
    lp += -0.5 * std::log(2.0 * pi * omega * omega) -
          0.5 * h * h / (omega * omega);
  return lp;
}

namespace {

struct AnfState {
  double alpha, beta, mu, log_sigma;
  double tau1 = 0.0;
  std::vector<double> h;  // squared-root increments

  StableParams params(Form form) const {
    return StableParams{alpha, beta, mu, std::exp(log_sigma), form};
  }
  CharGrid grid() const { return CharGrid::from_increments(tau1, h); }
};

}  // namespace

AnfFit fit_anf(const std::vector<double>& data, const CharGrid& grid,
               const AnfOptions& opt, Rng& rng) {
  if (data.empty()) throw DataError("fit_anf needs data");
  if (!(opt.init.alpha > 0.0)) throw DataError("bad initial parameters");

  AnfState st;
  st.alpha = opt.init.alpha;
  st.beta = opt.init.beta;
  st.mu = opt.init.mu;
  st.log_sigma = std::log(opt.init.sigma);
  st.tau1 = grid.taus().front();
  st.h = grid.increments();
  const Form form = opt.init.form;

  auto loglik = [&](const StableParams& p, const Eigen::VectorXd& zhat,
                    const CharGrid& g) {
    if (opt.use_refined)
      return refined_loglik(p, zhat, data.size(), g, opt.refined_kind,
                            opt.refined_scales, {}, opt.reg_eps);
    return anf_loglik(p, zhat, data.size(), g, opt.reg_eps);
  };
  auto log_theta_prior = [&](const AnfState& s) {
    if (s.alpha < opt.alpha_min || s.alpha > opt.alpha_max ||
        std::abs(s.beta) > 1.0)
      return -std::numeric_limits<double>::infinity();
    return -s.log_sigma;  // p(sigma) ~ 1/sigma
  };
  auto log_grid_prior = [&](const AnfState& s) {
    if (!opt.learn_grid) return 0.0;
    if (s.tau1 < opt.grid_prior.tau1_min || s.tau1 > opt.grid_prior.tau1_max)
      return -std::numeric_limits<double>::infinity();
    double lp = -std::log(s.tau1) +
                opt.grid_prior.log_k_prior(static_cast<int>(s.h.size()) + 1);
    const double om2 = opt.grid_prior.omega * opt.grid_prior.omega;
    for (double hj : s.h) lp += -0.5 * hj * hj / om2;
    return lp;
  };

  CharGrid cur_grid = st.grid();
  Eigen::VectorXd zhat = ecf_stacked(data, cur_grid);
  double cur_ll = loglik(st.params(form), zhat, cur_grid);
  double cur_lp = log_theta_prior(st) + log_grid_prior(st);

  std::vector<std::string> names{"alpha", "beta", "mu", "sigma"};
  if (opt.learn_grid) names.push_back("K");
  AnfFit fit;
  fit.chain = Chain(names);

  std::size_t acc_theta = 0, try_theta = 0;
  std::size_t acc_grid = 0, try_grid = 0;
  std::size_t acc_k = 0, try_k = 0;

  for (std::size_t it = 0; it < opt.iters; ++it) {
    // ---- parameter move -------------------------------------------------
    {
      AnfState prop = st;
      if (opt.estimate_alpha) prop.alpha += opt.step_alpha * rng.normal();
      if (opt.estimate_beta) prop.beta += opt.step_beta * rng.normal();
      if (opt.estimate_mu) prop.mu += opt.step_mu * rng.normal();
      if (opt.estimate_sigma)
        prop.log_sigma += opt.step_log_sigma * rng.normal();
      ++try_theta;
      const double plp = log_theta_prior(prop) + log_grid_prior(prop);
      if (std::isfinite(plp)) {
        const double pll = loglik(prop.params(form), zhat, cur_grid);
        if (std::log(rng.uniform()) < pll + plp - cur_ll - cur_lp) {
          st = prop;
          cur_ll = pll;
          cur_lp = plp;
          ++acc_theta;
        }
      }
    }
    // ---- grid shape move ------------------------------------------------
    if (opt.learn_grid) {
      AnfState prop = st;
      const std::size_t which = rng.uniform_int(1 + st.h.size());
      if (which == 0)
        prop.tau1 *= std::exp(opt.step_tau1 * rng.normal());
      else
        prop.h[which - 1] += opt.step_h * rng.normal();
      ++try_grid;
      const double plp = log_theta_prior(prop) + log_grid_prior(prop);
      bool ok = std::isfinite(plp);
      CharGrid pg = cur_grid;
      if (ok) {
        try {
          pg = prop.grid();
        } catch (const DataError&) {
          ok = false;
        }
      }
      if (ok) {
        // log tau1 random walk: Jacobian factor tau1'/tau1
        const double log_jac =
            which == 0 ? std::log(prop.tau1 / st.tau1) : 0.0;
        const Eigen::VectorXd pz = ecf_stacked(data, pg);
        const double pll = loglik(prop.params(form), pz, pg);
        if (std::log(rng.uniform()) < pll + plp + log_jac - cur_ll - cur_lp) {
          st = prop;
          cur_grid = pg;
          zhat = pz;
          cur_ll = pll;
          cur_lp = plp;
          ++acc_grid;
        }
      }
    }
    // ---- grid size move -------------------------------------------------
    if (opt.learn_grid) {
      ++try_k;
      const bool birth = rng.uniform() < 0.5;
      AnfState prop = st;
      bool ok = true;
      if (birth) {
        if (static_cast<int>(st.h.size()) + 2 > opt.grid_prior.kmax)
          ok = false;
        else
          prop.h.push_back(opt.grid_prior.omega * rng.normal());
      } else {
        if (st.h.empty())
          ok = false;
        else
          prop.h.pop_back();
      }
      if (ok && birth && prop.h.back() == 0.0) ok = false;
      if (ok) {
        CharGrid pg = cur_grid;
        try {
          pg = prop.grid();
        } catch (const DataError&) {
          ok = false;
        }
        if (ok) {
          // Birth draws the new increment from its prior, so the increment
          // density cancels and only the K-prior ratio remains.
          const int k_cur = static_cast<int>(st.h.size()) + 1;
          const int k_prop = static_cast<int>(prop.h.size()) + 1;
          const double lr = opt.grid_prior.log_k_prior(k_prop) -
                            opt.grid_prior.log_k_prior(k_cur);
          const Eigen::VectorXd pz = ecf_stacked(data, pg);
          const double pll = loglik(prop.params(form), pz, pg);
          if (std::log(rng.uniform()) < pll - cur_ll + lr) {
            st = prop;
            cur_grid = pg;
            zhat = pz;
            cur_ll = pll;
            cur_lp = log_theta_prior(st) + log_grid_prior(st);
            ++acc_k;
          }
        }
      }
    }
    // ---- record ---------------------------------------------------------
    if (it >= opt.burnin && (it - opt.burnin) % opt.thin == 0) {
      std::vector<double> row{st.alpha, st.beta, st.mu,
                              std::exp(st.log_sigma)};
      if (opt.learn_grid)
        row.push_back(static_cast<double>(st.h.size()) + 1.0);
      fit.chain.push(row);
    }
  }
  fit.accept_theta =
      try_theta ? static_cast<double>(acc_theta) / try_theta : 0.0;
  fit.accept_grid = try_grid ? static_cast<double>(acc_grid) / try_grid : 0.0;
  fit.accept_k = try_k ? static_cast<double>(acc_k) / try_k : 0.0;
  fit.final_grid = cur_grid;
  return fit;
}

}  // namespace stablecf
