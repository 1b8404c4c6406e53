#include "stablecf/mixture.hpp"

#include "stablecf/csv.hpp"
#include "stablecf/ecf.hpp"
#include "stablecf/errors.hpp"
#include "stablecf/optim.hpp"
#include "stablecf/parallel.hpp"
#include "stablecf/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace stablecf {

using std::numbers::pi;

namespace {
constexpr double kLogRoot2Pi = 0.91893853320467274;
constexpr double kWeightFloor = 1e-7;
constexpr double kSdFloor = 1e-3;
constexpr double kEulerGamma = 0.57721566490153286;

double log_normal_pdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -kLogRoot2Pi - std::log(sd) - 0.5 * z * z;
}
}  // namespace

bool MixtureModel::valid() const {
  if (weights.empty() || weights.size() != means.size() ||
      weights.size() != sds.size())
    return false;
  double total = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(weights[j] >= 0.0) || !(sds[j] > 0.0)) return false;
    total += weights[j];
  }
  return std::abs(total - 1.0) <= 1e-12;
}

double MixtureModel::pdf(double x) const {
  double s = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j)
    s += weights[j] * std::exp(log_normal_pdf(x, means[j], sds[j]));
  return s;
}

double MixtureModel::mean() const {
  double s = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * means[j];
  return s;
}

double MixtureModel::sample(Rng& rng) const {
  double u = rng.uniform();
  std::size_t j = 0;
  for (; j + 1 < weights.size(); ++j) {
    if (u < weights[j]) break;
    u -= weights[j];
  }
  return means[j] + sds[j] * rng.normal();
}

void MixtureModel::canonicalize() {
  std::vector<std::size_t> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (means[a] != means[b]) return means[a] < means[b];
    return sds[a] < sds[b];
  });
  MixtureModel out;
  for (std::size_t k : idx) {
    out.weights.push_back(weights[k]);
    out.means.push_back(means[k]);
    out.sds.push_back(sds[k]);
  }
  *this = std::move(out);
}

std::complex<double> mixture_cf(const MixtureModel& mix, double tau) {
  std::complex<double> s{0.0, 0.0};
  for (std::size_t j = 0; j < mix.weights.size(); ++j) {
    const double damp = std::exp(-0.5 * mix.sds[j] * mix.sds[j] * tau * tau);
    s += mix.weights[j] * damp *
         std::complex<double>(std::cos(mix.means[j] * tau),
                              std::sin(mix.means[j] * tau));
  }
  return s;
}

namespace {

// Quadrature nodes on the density table restricted to [-W, W], with
// trapezoid weights folded into f.
struct Quad {
  std::vector<double> x;
  std::vector<double> cw;   // f(x_k) * w_k
  double total = 0.0;       // sum cw ~ mass of f on the domain
  double base = 0.0;        // sum cw log f
  double hw = 0.0;          // domain half width
};

Quad make_quad(const StableParams& p, double half_width) {
  const double hw =
      half_width > 0.0 ? half_width : (p.alpha <= 1.3 ? 16.0 : 12.0);
  // Skewed cases shift the table off center; widen the spacing until the
  // table covers the requested domain.
  StableDist dist(p, 16, 5e-4);
  double h = 5e-4;
  for (double cand : {5e-4, 7e-4, 1e-3, 2e-3}) {
    if (cand != 5e-4) dist = StableDist(p, 16, cand);
    h = cand;
    if (dist.table_lo() <= -hw && dist.table_hi() >= hw) break;
  }
  if (dist.table_lo() > -hw || dist.table_hi() < hw)
    throw DataError("mixture projection domain exceeds the density table");
  const int stride = std::max(1, static_cast<int>(std::lround(8e-3 / h)));
  Quad q;
  q.hw = hw;
  const double x0 = dist.table_lo();
  const long first = std::lround(std::ceil((-hw - x0) / h));
  long k = first;
  while (x0 + static_cast<double>(k) * h <= hw + 1e-12) {
    q.x.push_back(x0 + static_cast<double>(k) * h);
    k += stride;
  }
  const double dx = stride * h;
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    const double w = (i == 0 || i + 1 == q.x.size()) ? 0.5 * dx : dx;
    const double f = dist.pdf(q.x[i]);
    const double cw = f * w;
    q.cw.push_back(cw);
    q.total += cw;
    if (f > 0.0) q.base += cw * std::log(f);
  }
  return q;
}

// Mixture mass on the quadrature domain.
double mixture_domain_mass(const Quad& q, const MixtureModel& mix) {
  double m = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j)
    m += mix.weights[j] *
         (special::norm_cdf((q.hw - mix.means[j]) / mix.sds[j]) -
          special::norm_cdf((-q.hw - mix.means[j]) / mix.sds[j]));
  return std::max(m, 1e-300);
}

double quad_cross_entropy(const Quad& q, const MixtureModel& mix) {
  // sum_k cw_k log mix(x_k), clamped away from log(0)
  double s = 0.0;
  const std::size_t m = mix.size();
  for (std::size_t k = 0; k < q.x.size(); ++k) {
    if (q.cw[k] == 0.0) continue;
    double best = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (mix.weights[j] <= 0.0) continue;
      const double t = std::log(mix.weights[j]) +
                       log_normal_pdf(q.x[k], mix.means[j], mix.sds[j]);
      if (t > best) {
        acc = acc * std::exp(best - t) + 1.0;
        best = t;
      } else {
        acc += std::exp(t - best);
      }
    }
    const double lp = best + std::log(acc);
    s += q.cw[k] * std::max(lp, -745.0);
  }
  return s;
}

// KL divergence between the density and the mixture, both renormalized to
// the quadrature domain; this keeps the objective non-negative even when the
// mixture places more of its mass inside the window than the heavy-tailed
// target does.
double quad_kl_raw(const Quad& q, const MixtureModel& mix) {
  return (q.base - quad_cross_entropy(q, mix)) / q.total +
         std::log(mixture_domain_mass(q, mix) / q.total);
}

double quad_kl(const Quad& q, const MixtureModel& mix) {
  return std::max(quad_kl_raw(q, mix), 0.0);
}

// One EM pass to a local optimum of the weighted likelihood.
MixtureModel em_fit(const Quad& q, MixtureModel mix, int max_iter = 400) {
  const std::size_t m = mix.size();
  double prev = -std::numeric_limits<double>::infinity();
  std::vector<double> lw(m), W(m), MU(m), S2(m), lp(m);
  for (int iter = 0; iter < max_iter; ++iter) {
    for (std::size_t j = 0; j < m; ++j) {
      lw[j] = mix.weights[j] > 0.0 ? std::log(mix.weights[j]) : -1e30;
      W[j] = MU[j] = S2[j] = 0.0;
    }
    double obj = 0.0;
    for (std::size_t k = 0; k < q.x.size(); ++k) {
      if (q.cw[k] == 0.0) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        lp[j] = lw[j] + log_normal_pdf(q.x[k], mix.means[j], mix.sds[j]);
        best = std::max(best, lp[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        lp[j] = std::exp(lp[j] - best);
        z += lp[j];
      }
      obj += q.cw[k] * (best + std::log(z));
      const double scale = q.cw[k] / z;
      for (std::size_t j = 0; j < m; ++j) {
        const double c = scale * lp[j];
        W[j] += c;
        MU[j] += c * q.x[k];
        S2[j] += c * q.x[k] * q.x[k];
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (W[j] <= 0.0) continue;  // dead component; pruning handles it
      mix.weights[j] = W[j] / q.total;
      mix.means[j] = MU[j] / W[j];
      const double var = S2[j] / W[j] - mix.means[j] * mix.means[j];
      mix.sds[j] = std::sqrt(std::max(var, kSdFloor * kSdFloor));
    }
    if (obj - prev < 1e-12 * (1.0 + std::abs(obj)) && iter > 5) break;
    prev = obj;
  }
  return mix;
}

// (logits_{1..m-1}, means, log sds) <-> mixture, for quasi-Newton polish.
Eigen::VectorXd pack(const MixtureModel& mix) {
  const std::size_t m = mix.size();
  Eigen::VectorXd v(3 * m - 1);
  for (std::size_t j = 0; j + 1 < m; ++j)
    v(j) = std::log(std::max(mix.weights[j], 1e-12) /
                    std::max(mix.weights[m - 1], 1e-12));
  for (std::size_t j = 0; j < m; ++j) {
    v(m - 1 + j) = mix.means[j];
    v(2 * m - 1 + j) = std::log(mix.sds[j]);
  }
  return v;
}

MixtureModel unpack(const Eigen::VectorXd& v, std::size_t m) {
  MixtureModel mix;
  mix.weights.resize(m);
  mix.means.resize(m);
  mix.sds.resize(m);
  double z = 1.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    mix.weights[j] = std::exp(std::min(v(j), 50.0));
    z += mix.weights[j];
  }
  mix.weights[m - 1] = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    mix.weights[j] /= z;
    mix.means[j] = v(m - 1 + j);
    mix.sds[j] = std::exp(std::clamp(v(2 * m - 1 + j), -12.0, 12.0));
  }
  return mix;
}

// Deterministic initializations: quantile splits, scale ladders, jitters.
std::vector<MixtureModel> initial_models(const Quad& q, int m) {
  // weighted mean / sd / quantiles of the quadrature measure
  double mean = 0.0;
  for (std::size_t k = 0; k < q.x.size(); ++k) mean += q.cw[k] * q.x[k];
  mean /= q.total;
  double var = 0.0;
  for (std::size_t k = 0; k < q.x.size(); ++k)
    var += q.cw[k] * (q.x[k] - mean) * (q.x[k] - mean);
  var /= q.total;
  const double sd = std::sqrt(std::max(var, 1e-6));

  auto quantile = [&](double u) {
    double acc = 0.0;
    for (std::size_t k = 0; k < q.x.size(); ++k) {
      acc += q.cw[k] / q.total;
      if (acc >= u) return q.x[k];
    }
    return q.x.back();
  };

  std::vector<MixtureModel> inits;
  // 1-2: quantile split with two width scalings
  for (double widen : {1.0, 2.0}) {
    MixtureModel mix;
    for (int j = 0; j < m; ++j) {
      mix.weights.push_back(1.0 / m);
      mix.means.push_back(quantile((j + 0.5) / m));
      mix.sds.push_back(std::max(widen * sd / m, 2.0 * kSdFloor));
    }
    inits.push_back(mix);
  }
  // 3-4: centered scale ladders (normal scale mixtures)
  for (double ratio : {1.6, 2.5}) {
    MixtureModel mix;
    for (int j = 0; j < m; ++j) {
      mix.weights.push_back(1.0 / m);
      mix.means.push_back(mean);
      mix.sds.push_back(std::max(
          0.6 * sd * std::pow(ratio, j - 0.5 * (m - 1)), 2.0 * kSdFloor));
    }
    inits.push_back(mix);
  }
  // 5-8: jittered copies
  Rng jitter(271828);
  for (int r = 0; r < 4; ++r) {
    MixtureModel mix = inits[r % inits.size()];
    for (int j = 0; j < m; ++j) {
      mix.means[j] += 0.3 * sd * jitter.normal();
      mix.sds[j] *= std::exp(0.3 * jitter.normal());
      mix.sds[j] = std::max(mix.sds[j], 2.0 * kSdFloor);
    }
    inits.push_back(mix);
  }
  return inits;
}

bool has_degenerate_component(const MixtureModel& mix) {
  if (mix.size() <= 1) return false;
  for (std::size_t j = 0; j < mix.size(); ++j)
    if (mix.weights[j] < kWeightFloor || mix.sds[j] <= 1.01 * kSdFloor)
      return true;
  return false;
}

// Splitting the heaviest component into two identical halves leaves the
// density (and hence the divergence) unchanged, so seeding each level with
// this split makes the best objective non-increasing in the component count.
MixtureModel split_duplicate(const MixtureModel& prev) {
  std::size_t j = 0;
  for (std::size_t c = 1; c < prev.size(); ++c)
    if (prev.weights[c] > prev.weights[j]) j = c;
  MixtureModel out = prev;
  out.weights[j] *= 0.5;
  out.weights.push_back(out.weights[j]);
  out.means.push_back(out.means[j]);
  out.sds.push_back(out.sds[j]);
  return out;
}

// A genuinely separated split of the widest component, so EM can explore a
// different basin than the duplicate seed.
MixtureModel split_perturbed(const MixtureModel& prev) {
  std::size_t j = 0;
  for (std::size_t c = 1; c < prev.size(); ++c)
    if (prev.weights[c] * prev.sds[c] > prev.weights[j] * prev.sds[j]) j = c;
  MixtureModel out = prev;
  const double mu = out.means[j], sd = out.sds[j];
  out.weights[j] *= 0.5;
  out.means[j] = mu - 0.5 * sd;
  out.sds[j] = 0.75 * sd;
  out.weights.push_back(out.weights[j]);
  out.means.push_back(mu + 0.5 * sd);
  out.sds.push_back(0.75 * sd);
  return out;
}

MixtureModel fit_level(const Quad& q, int m, const MixtureModel* prev) {
  auto inits = initial_models(q, m);
  MixtureModel exact_split;
  if (prev != nullptr && static_cast<int>(prev->size()) + 1 == m) {
    exact_split = split_duplicate(*prev);
    inits.push_back(exact_split);
    inits.push_back(split_perturbed(*prev));
  }
  MixtureModel em_best;
  double em_best_kl = std::numeric_limits<double>::infinity();
  for (auto& init : inits) {
    MixtureModel cand = em_fit(q, init);
    const double kl = quad_kl_raw(q, cand);
    if (kl < em_best_kl) {
      em_best_kl = kl;
      em_best = cand;
    }
  }
  MixtureModel best = em_best;
  double best_kl = em_best_kl;
  if (m > 1) {
    // quasi-Newton polish of the best EM start; never polish the duplicate
    // split, whose identical components form a saddle the line search
    // cannot leave
    const std::size_t mm = static_cast<std::size_t>(m);
    ObjectiveFn f = [&](const Eigen::VectorXd& v) {
      return quad_kl_raw(q, unpack(v, mm));
    };
    OptimOptions opt;
    opt.max_iter = 150;
    opt.tol = 1e-12;
    auto res = bfgs(f, pack(em_best), opt);
    if (res.f < best_kl) {
      best = unpack(res.x, mm);
      best_kl = res.f;
    }
  }
  if (exact_split.size() > 0 && quad_kl_raw(q, exact_split) < best_kl)
    best = exact_split;
  return best;
}

MixtureFit fit_mixture_kl_quad(const Quad& q, int m, int requested) {
  std::vector<MixtureModel> levels;
  levels.reserve(static_cast<std::size_t>(m));
  for (int level = 1; level <= m; ++level) {
    const MixtureModel* prev = levels.empty() ? nullptr : &levels.back();
    levels.push_back(fit_level(q, level, prev));
  }
  // drop back to the largest component count without a vanishing component
  int chosen = m;
  while (chosen > 1 &&
         has_degenerate_component(levels[static_cast<std::size_t>(chosen) - 1]))
    --chosen;
  MixtureModel best = levels[static_cast<std::size_t>(chosen) - 1];
  best.canonicalize();
  MixtureFit fit;
  fit.model = best;
  fit.objective = quad_kl(q, best);
  fit.requested_m = requested;
  fit.pruned = chosen != requested;
  return fit;
}

}  // namespace

MixtureFit fit_mixture_kl(const StableParams& p, int m, double half_width) {
  if (!p.valid()) throw DataError("invalid stable parameters");
  if (m < 1 || m > 15) throw DataError("component count must be in [1, 15]");
  Quad q = make_quad(p, half_width);
  return fit_mixture_kl_quad(q, m, m);
}

BackMapResult cf_values_to_stable(const std::vector<double>& taus,
                                  const std::vector<std::complex<double>>& target,
                                  const StableParams* warm) {
  if (taus.size() < 4)
    throw DataError("CF-matching grid needs at least 4 points");
  if (target.size() != taus.size())
    throw DataError("CF targets and grid differ in length");
  auto to_params = [](const Eigen::VectorXd& v) {
    return StableParams{std::min(v(0), 2.0), std::clamp(v(1), -1.0, 1.0),
                        v(2), v(3), Form::Zolotarev};
  };
  ObjectiveFn obj = [&](const Eigen::VectorXd& v) {
    const StableParams p = to_params(v);
    double s = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i)
      s += std::norm(cf(p, taus[i]) - target[i]);
    return s;
  };
  Eigen::VectorXd lo(4), hi(4);
  lo << 0.05, -1.04, -std::numeric_limits<double>::infinity(), 1e-8;
  hi << 2.08, 1.04, std::numeric_limits<double>::infinity(),
      std::numeric_limits<double>::infinity();
  BoxTransform box(lo, hi);

  // scale guess from the CF decay at the largest frequency; location guess
  // from the phase slope at the smallest one
  const double tk = taus.back();
  const double mod = std::abs(target.back());
  double sigma0 =
      mod > 1e-12 ? std::pow(-std::log(mod), 1.0 / 1.5) / std::abs(tk) : 1.0;
  sigma0 = std::clamp(sigma0, 1e-3, 1e3);
  const double mu0 =
      taus.front() != 0.0 ? std::arg(target.front()) / taus.front() : 0.0;

  std::vector<Eigen::VectorXd> starts;
  if (warm) {
    Eigen::VectorXd v(4);
    v << std::clamp(warm->alpha, 0.1, 2.05), std::clamp(warm->beta, -1.0, 1.0),
        warm->mu, std::max(warm->sigma, 1e-6);
    starts.push_back(v);
  }
  for (double a0 : {1.6, 1.2, 1.95}) {
    Eigen::VectorXd v(4);
    v << a0, 0.0, mu0, sigma0;
    starts.push_back(v);
  }
  OptimOptions opt;
  opt.max_iter = 400;
  opt.tol = 1e-14;
  OptimResult best;
  for (const auto& s : starts) {
    auto r = box.minimize(obj, s, opt);
    if (r.f < best.f) best = r;
    if (best.f < 1e-12) break;  // good enough; skip extra starts
  }
  BackMapResult out;
  out.params = to_params(best.x);
  out.objective = best.f;
  out.flagged = best.f > 1e-2;
  return out;
}

namespace {

BackMapResult backmap_one(const MixtureModel& mix,
                          const std::vector<double>& taus,
                          const StableParams* warm) {
  std::vector<std::complex<double>> target(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i)
    target[i] = mixture_cf(mix, taus[i]);
  return cf_values_to_stable(taus, target, warm);
}

}  // namespace

std::vector<BackMapResult> mixture_draws_to_stable(
    const std::vector<MixtureModel>& draws, const std::vector<double>& taus) {
  if (taus.size() < 4)
    throw DataError("CF-matching grid needs at least 4 points");
  std::vector<BackMapResult> out;
  out.reserve(draws.size());
  const StableParams* warm = nullptr;
  for (const auto& mix : draws) {
    out.push_back(backmap_one(mix, taus, warm));
    warm = &out.back().params;
  }
  return out;
}

BackMapResult mixture_to_stable(const MixtureModel& mix,
                                const std::vector<double>& taus) {
  if (taus.size() < 4)
    throw DataError("CF-matching grid needs at least 4 points");
  return backmap_one(mix, taus, nullptr);
}

BackMapResult ecf_to_stable(const std::vector<double>& data,
                            const std::vector<double>& taus) {
  if (data.empty()) throw DataError("empty data");
  auto phat = ecf(data, taus);
  return cf_values_to_stable(taus, phat, nullptr);
}

double stable_log_abs_mean(double alpha, double beta) {
  if (!(alpha > 0.0) || alpha > 2.0 || std::abs(beta) > 1.0)
    throw DataError("invalid stable parameters");
  if (std::abs(alpha - 1.0) < 1e-6 && beta != 0.0)
    throw DataError("log-mean identity not available at alpha = 1 with skew");
  const double t = beta * std::tan(0.5 * pi * alpha);
  return kEulerGamma * (1.0 / alpha - 1.0) +
         std::log1p(t * t) / (2.0 * alpha);
}

namespace {

std::vector<MixtureModel> logsq_inits(const std::vector<double>& u, int m) {
  std::vector<double> sorted = u;
  std::sort(sorted.begin(), sorted.end());
  auto quant = [&](double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    return sorted[static_cast<std::size_t>(pos)];
  };
  std::vector<MixtureModel> inits;
  for (double widen : {1.0, 2.0}) {
    MixtureModel mix;
    for (int j = 0; j < m; ++j) {
      const double lo = quant(static_cast<double>(j) / m);
      const double hi = quant(static_cast<double>(j + 1) / m - 1e-9);
      mix.weights.push_back(1.0 / m);
      mix.means.push_back(0.5 * (lo + hi));
      mix.sds.push_back(std::max(widen * (hi - lo) / 2.0, 0.3));
    }
    inits.push_back(mix);
  }
  Rng jitter(314159);
  for (int r = 0; r < 4; ++r) {
    MixtureModel mix = inits[r % 2];
    for (int j = 0; j < m; ++j) {
      mix.means[j] += jitter.normal();
      mix.sds[j] *= std::exp(0.4 * jitter.normal());
    }
    inits.push_back(mix);
  }
  return inits;
}

}  // namespace

MixtureFit fit_logsq_mixture(double alpha, double beta, int m, Rng& rng,
                             std::size_t s, std::vector<double> taus) {
  if (!(alpha > 0.0) || alpha > 2.0 || std::abs(beta) > 1.0)
    throw DataError("invalid stable parameters");
  if (m < 1 || m > 15) throw DataError("component count must be in [1, 15]");
  if (s < 10000) throw DataError("log-squared fit needs at least 10^4 draws");
  if (taus.empty()) {
    taus.resize(100);
    for (int i = 0; i < 100; ++i)
      taus[i] = -0.5 + static_cast<double>(i) / 99.0;
  }
  std::vector<double> u(s);
  for (std::size_t i = 0; i < s; ++i) {
    double eps = sample_standard(alpha, beta, rng);
    while (eps * eps < 1e-300) eps = sample_standard(alpha, beta, rng);
    u[i] = std::log(eps * eps);
  }
  const auto target = ecf(u, taus);

  auto ls_obj = [&](const MixtureModel& mix) {
    double acc = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i)
      acc += std::norm(mixture_cf(mix, taus[i]) - target[i]);
    return acc;
  };

  int mm = m;
  bool pruned = false;
  while (true) {
    MixtureModel best;
    double best_f = std::numeric_limits<double>::infinity();
    for (auto& init : logsq_inits(u, mm)) {
      ObjectiveFn f = [&](const Eigen::VectorXd& v) {
        return ls_obj(unpack(v, static_cast<std::size_t>(mm)));
      };
      OptimOptions opt;
      opt.max_iter = 300;
      opt.tol = 1e-13;
      auto r0 = nelder_mead(f, pack(init), opt);
      auto r1 = bfgs(f, r0.x, opt);
      const auto& r = r1.f <= r0.f ? r1 : r0;
      if (r.f < best_f) {
        best_f = r.f;
        best = unpack(r.x, static_cast<std::size_t>(mm));
      }
    }
    if (has_degenerate_component(best) && mm > 1) {
      --mm;
      pruned = true;
      continue;
    }
    best.canonicalize();
    MixtureFit fit;
    fit.model = best;
    fit.objective = best_f;
    fit.requested_m = m;
    fit.pruned = pruned;
    return fit;
  }
}

MixtureTable::MixtureTable(std::vector<double> alphas,
                           std::vector<double> betas,
                           std::vector<MixtureModel> nodes)
    : alphas_(std::move(alphas)),
      betas_(std::move(betas)),
      nodes_(std::move(nodes)) {
  if (alphas_.empty() || betas_.empty() ||
      nodes_.size() != alphas_.size() * betas_.size())
    throw DataError("mixture table shape mismatch");
  for (std::size_t i = 1; i < alphas_.size(); ++i)
    if (!(alphas_[i] > alphas_[i - 1]))
      throw DataError("table alphas must increase");
  for (std::size_t j = 1; j < betas_.size(); ++j)
    if (!(betas_[j] > betas_[j - 1])) throw DataError("table betas must increase");
  const std::size_t m = nodes_.front().size();
  for (const auto& node : nodes_)
    if (!node.valid() || node.size() != m)
      throw DataError("mixture table nodes must share a component count");
}

const MixtureModel& MixtureTable::at(std::size_t i, std::size_t j) const {
  if (i >= alphas_.size() || j >= betas_.size())
    throw DataError("mixture table index out of range");
  return nodes_[i * betas_.size() + j];
}

MixtureModel MixtureTable::interpolate(double alpha, double beta) const {
  const double a = std::clamp(alpha, alphas_.front(), alphas_.back());
  const double b = std::clamp(beta, betas_.front(), betas_.back());
  auto cell = [](const std::vector<double>& g, double v) {
    std::size_t i =
        std::upper_bound(g.begin(), g.end(), v) - g.begin();
    i = std::clamp<std::size_t>(i, 1, g.size() - 1);
    const double t = (v - g[i - 1]) / (g[i] - g[i - 1]);
    return std::pair<std::size_t, double>(i - 1, std::clamp(t, 0.0, 1.0));
  };
  if (alphas_.size() == 1 && betas_.size() == 1) return nodes_.front();
  const auto [ia, ta] = alphas_.size() > 1
                            ? cell(alphas_, a)
                            : std::pair<std::size_t, double>(0, 0.0);
  const auto [ib, tb] = betas_.size() > 1
                            ? cell(betas_, b)
                            : std::pair<std::size_t, double>(0, 0.0);
  const std::size_t ia1 = std::min(ia + 1, alphas_.size() - 1);
  const std::size_t ib1 = std::min(ib + 1, betas_.size() - 1);
  const MixtureModel& n00 = at(ia, ib);
  const MixtureModel& n01 = at(ia, ib1);
  const MixtureModel& n10 = at(ia1, ib);
  const MixtureModel& n11 = at(ia1, ib1);
  MixtureModel out;
  const std::size_t m = n00.size();
  double wsum = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    auto blend = [&](auto get) {
      const double v0 = (1.0 - tb) * get(n00) + tb * get(n01);
      const double v1 = (1.0 - tb) * get(n10) + tb * get(n11);
      return (1.0 - ta) * v0 + ta * v1;
    };
    out.weights.push_back(
        blend([&](const MixtureModel& n) { return n.weights[c]; }));
    out.means.push_back(
        blend([&](const MixtureModel& n) { return n.means[c]; }));
    out.sds.push_back(blend([&](const MixtureModel& n) { return n.sds[c]; }));
    wsum += out.weights.back();
  }
  for (auto& w : out.weights) w /= wsum;
  return out;
}

void MixtureTable::write(const std::string& path) const {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < alphas_.size(); ++i)
    for (std::size_t j = 0; j < betas_.size(); ++j) {
      const MixtureModel& node = at(i, j);
      for (std::size_t c = 0; c < node.size(); ++c)
        rows.push_back({alphas_[i], betas_[j], static_cast<double>(c),
                        node.weights[c], node.means[c], node.sds[c]});
    }
  csv::write(path, {"alpha", "beta", "component", "weight", "mean", "sd"},
             rows);
}

MixtureTable MixtureTable::read(const std::string& path) {
  auto t = csv::read(path);
  const int ca = t.col("alpha"), cb = t.col("beta"), cc = t.col("component");
  const int cw = t.col("weight"), cm = t.col("mean"), cs = t.col("sd");
  if (ca < 0 || cb < 0 || cc < 0 || cw < 0 || cm < 0 || cs < 0)
    throw DataError("mixture table file misses required columns");
  std::vector<double> alphas, betas;
  for (const auto& r : t.rows) {
    if (alphas.empty() || r[ca] > alphas.back()) alphas.push_back(r[ca]);
    if (r[ca] == t.rows.front()[ca]) {
      if (betas.empty() || r[cb] > betas.back()) betas.push_back(r[cb]);
    }
  }
  std::vector<MixtureModel> nodes(alphas.size() * betas.size());
  auto find_idx = [](const std::vector<double>& g, double v) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] == v) return i;
    throw DataError("mixture table rows are not grid-aligned");
  };
  for (const auto& r : t.rows) {
    const std::size_t i = find_idx(alphas, r[ca]);
    const std::size_t j = find_idx(betas, r[cb]);
    MixtureModel& node = nodes[i * betas.size() + j];
    node.weights.push_back(r[cw]);
    node.means.push_back(r[cm]);
    node.sds.push_back(r[cs]);
  }
  return MixtureTable(std::move(alphas), std::move(betas), std::move(nodes));
}

std::vector<double> default_table_alphas() {
  std::vector<double> v(51);
  for (int i = 0; i < 51; ++i) v[i] = 1.20 + 0.014 * i;
  return v;
}

std::vector<double> default_table_betas() {
  std::vector<double> v(51);
  for (int i = 0; i < 51; ++i) v[i] = -0.90 + 0.036 * i;
  return v;
}

MixtureTable build_mixture_table(const std::vector<double>& alphas,
                                 const std::vector<double>& betas, int m,
                                 int threads) {
  std::vector<MixtureModel> nodes(alphas.size() * betas.size());
  parallel_for(
      nodes.size(),
      [&](std::size_t idx) {
        const double a = alphas[idx / betas.size()];
        const double b = betas[idx % betas.size()];
        nodes[idx] =
            fit_mixture_kl(StableParams{a, b, 0.0, 1.0, Form::Zolotarev}, m)
                .model;
      },
      threads);
  return MixtureTable(alphas, betas, std::move(nodes));
}

}  // namespace stablecf
