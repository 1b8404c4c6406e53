#include "stablecf/stable.hpp"

#include "stablecf/errors.hpp"
#include "stablecf/fftwrap.hpp"
#include "stablecf/special.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stablecf {

using std::numbers::pi;

bool alpha_is_one(double alpha) { return std::abs(alpha - 1.0) < kBranchEps; }

namespace {

std::complex<double> log_cf_zolotarev(const StableParams& p, double tau) {
  if (tau == 0.0) return {0.0, 0.0};
  const double at = std::abs(tau);
  const double sg = tau > 0.0 ? 1.0 : -1.0;
  if (alpha_is_one(p.alpha)) {
    const double re = -p.sigma * at;
    const double im =
        p.mu * tau - p.sigma * at * p.beta * sg * (2.0 / pi) * std::log(at);
    return {re, im};
  }
  const double ta = std::tan(0.5 * pi * p.alpha);
  const double amp = std::pow(p.sigma * at, p.alpha);
  return {-amp, p.mu * tau + amp * p.beta * sg * ta};
}

std::complex<double> log_cf_nolan(const StableParams& p, double tau) {
  if (tau == 0.0) return {0.0, 0.0};
  const double at = std::abs(tau);
  const double sg = tau > 0.0 ? 1.0 : -1.0;
  const double sat = p.sigma * at;
  if (alpha_is_one(p.alpha)) {
    const double re = -sat;
    const double im = p.mu * tau - sat * p.beta * sg * (2.0 / pi) * std::log(sat);
    return {re, im};
  }
  const double ta = std::tan(0.5 * pi * p.alpha);
  const double amp = std::pow(sat, p.alpha);
  const double im_corr =
      amp * p.beta * sg * ta * (std::pow(sat, 1.0 - p.alpha) - 1.0);
  return {-amp, p.mu * tau - im_corr};
}

}  // namespace

std::complex<double> log_cf(const StableParams& p, double tau) {
  return p.form == Form::Zolotarev ? log_cf_zolotarev(p, tau)
                                   : log_cf_nolan(p, tau);
}

std::complex<double> cf(const StableParams& p, double tau) {
  return std::exp(log_cf(p, tau));
}

StableParams to_zolotarev(const StableParams& p) {
  if (p.form == Form::Zolotarev) return p;
  StableParams q = p;
  q.form = Form::Zolotarev;
  if (alpha_is_one(p.alpha)) {
    q.mu = p.mu - (2.0 / pi) * p.beta * p.sigma * std::log(p.sigma);
  } else {
    q.mu = p.mu - p.beta * p.sigma * std::tan(0.5 * pi * p.alpha);
  }
  return q;
}

StableParams to_nolan(const StableParams& p) {
  if (p.form == Form::Nolan) return p;
  StableParams q = p;
  q.form = Form::Nolan;
  if (alpha_is_one(p.alpha)) {
    q.mu = p.mu + (2.0 / pi) * p.beta * p.sigma * std::log(p.sigma);
  } else {
    q.mu = p.mu + p.beta * p.sigma * std::tan(0.5 * pi * p.alpha);
  }
  return q;
}

double DensityTable::trapezoid_mass() const {
  if (values.size() < 2) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  s -= 0.5 * (values.front() + values.back());
  return s * h;
}

double DensityTable::interpolate(double x) const {
  const double t = (x - x0) / h;
  if (t < 0.0 || t > static_cast<double>(values.size() - 1)) return 0.0;
  const std::size_t k =
      std::min<std::size_t>(static_cast<std::size_t>(t), values.size() - 2);
  const double frac = t - static_cast<double>(k);
  return values[k] * (1.0 - frac) + values[k + 1] * frac;
}

DensityTable density_fft(const StableParams& p, int n_log2, double h) {
  if (!p.valid()) throw DataError("density_fft: invalid stable parameters");
  if (n_log2 < 10 || n_log2 > 20)
    throw DataError("density_fft: n_log2 must lie in [10, 20]");
  if (!(h > 0.0)) throw DataError("density_fft: spacing h must be positive");

  const std::size_t n = std::size_t{1} << n_log2;
  const double nd = static_cast<double>(n);
  std::vector<std::complex<double>> buf(n);
  const double dtau = 2.0 * pi / (h * nd);
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = dtau * (static_cast<double>(k) - 0.5 * nd);
    std::complex<double> v = std::exp(log_cf(p, tau));
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericError("density_fft: non-finite CF value");
    buf[k] = (k % 2 == 0) ? v : -v;
  }
  fft_forward(buf);

  DensityTable out;
  out.params = p;
  out.h = h;
  out.x0 = -0.5 * nd * h;
  out.values.resize(n);
  const double scale = 1.0 / (h * nd);
  const double sign_half = ((n / 2) % 2 == 0) ? 1.0 : -1.0;
  double max_imag = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double sgn = (k % 2 == 0) ? sign_half : -sign_half;
    const std::complex<double> f = scale * sgn * buf[k];
    max_imag = std::max(max_imag, std::abs(f.imag()));
    double v = f.real();
    if (v < 0.0) {
      if (v < -1e-10)
        throw NumericError(
            "density_fft: ordinate below -1e-10; table resolution unsuitable "
            "for these parameters");
      v = 0.0;
    }
    out.values[k] = v;
  }
  if (max_imag >= 1e-8)
    throw NumericError("density_fft: imaginary residue exceeds 1e-8");
  return out;
}

StableDist::StableDist(const StableParams& p, int n_log2, double h,
                       TailMode tails)
    : params_(p), tails_(tails) {
  if (!p.valid()) throw DataError("StableDist: invalid stable parameters");
  const StableParams s0 = to_nolan(p);
  delta0_ = s0.mu;
  sigma_ = s0.sigma;
  StableParams std0;
  std0.alpha = p.alpha;
  std0.beta = p.beta;
  std0.mu = 0.0;
  std0.sigma = 1.0;
  std0.form = Form::Nolan;
  DensityTable table = density_fft(std0, n_log2, h);
  x0_ = table.x0;
  h_ = table.h;
  dens_ = std::move(table.values);
  const std::size_t n = dens_.size();
  const double zlo = x0_;
  const double zhi = x0_ + static_cast<double>(n - 1) * h_;

  double m0 = 0.0, m1 = 0.0;
  if (tails_ == TailMode::Pareto) {
    // The FFT table is the periodized density (period n h): mass beyond the
    // span is folded back in.  Strip the folded images before appending
    // explicit power tails, or the tail mass would be counted twice.  The
    // images are removed with the closed-form asymptotic amplitudes; the
    // tail continuation is then re-matched at the cleaned edges so density
    // and tails connect continuously.
    const double period = static_cast<double>(n) * h_;
    // Density tail ~ alpha C(alpha) (1 + beta sgn x)/2 |x|^{-alpha-1}; the
    // /2 belongs to the survival-function constant convention used by
    // stable_tail_constant.
    const double amp = 0.5 * p.alpha * special::stable_tail_constant(p.alpha);
    const double th_neg = amp * (1.0 - p.beta);
    const double th_pos = amp * (1.0 + p.beta);
    if (th_neg > 0.0 || th_pos > 0.0) {
      constexpr int kImages = 8;
      for (std::size_t k = 0; k < n; ++k) {
        const double z = x0_ + static_cast<double>(k) * h_;
        double fold = 0.0;
        for (int img = 1; img <= kImages; ++img) {
          const double zr = z + img * period;  // image of the right tail
          const double zl = img * period - z;  // image of the left tail
          fold += th_pos * std::pow(zr, -p.alpha - 1.0);
          fold += th_neg * std::pow(zl, -p.alpha - 1.0);
        }
        // Midpoint-rule remainder of the image sums beyond kImages:
        // sum_{img>K} g(img) ~ integral_{K+1/2}^inf g(t) dt.
        const double far = (kImages + 0.5) * period;
        fold += th_pos * std::pow(z + far, -p.alpha) / (p.alpha * period);
        fold += th_neg * std::pow(far - z, -p.alpha) / (p.alpha * period);
        dens_[k] = std::max(dens_[k] - fold, 0.0);
      }
    }
    A_neg_ = dens_.front() * std::pow(-zlo, p.alpha + 1.0);
    A_pos_ = dens_.back() * std::pow(zhi, p.alpha + 1.0);
    m0 = dens_.front() * (-zlo) / p.alpha;
    m1 = dens_.back() * zhi / p.alpha;
  }
  std::vector<double> cum(n);
  cum[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k)
    cum[k] = cum[k - 1] + 0.5 * h_ * (dens_[k - 1] + dens_[k]);
  const double total = m0 + cum.back() + m1;
  if (!(total > 0.0)) throw NumericError("StableDist: zero total mass");
  norm_ = total;
  cdf_.resize(n);
  for (std::size_t k = 0; k < n; ++k) cdf_[k] = (m0 + cum[k]) / total;
  mass_lo_ = m0 / total;
  mass_hi_ = m1 / total;

  // Keep only strictly increasing CDF knots (extreme tails of very light
  // distributions can have zero trapezoid increments in double precision).
  std::vector<double> xs, us;
  xs.reserve(n);
  us.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double z = x0_ + static_cast<double>(k) * h_;
    if (us.empty() || cdf_[k] > us.back() + 1e-16) {
      xs.push_back(z);
      us.push_back(cdf_[k]);
    }
  }
  if (xs.size() < 2) throw NumericError("StableDist: degenerate CDF table");
  knot_ulo_ = us.front();
  knot_uhi_ = us.back();
  interp_ = Pchip(std::move(xs), std::move(us));
}

double StableDist::table_lo() const { return delta0_ + sigma_ * x0_; }
double StableDist::table_hi() const {
  return delta0_ +
         sigma_ * (x0_ + static_cast<double>(dens_.size() - 1) * h_);
}

double StableDist::std_pdf(double z) const {
  const double zhi = x0_ + static_cast<double>(dens_.size() - 1) * h_;
  if (z < x0_) {
    if (tails_ != TailMode::Pareto) return 0.0;
    return A_neg_ * std::pow(-z, -params_.alpha - 1.0) / norm_;
  }
  if (z > zhi) {
    if (tails_ != TailMode::Pareto) return 0.0;
    return A_pos_ * std::pow(z, -params_.alpha - 1.0) / norm_;
  }
  const double t = (z - x0_) / h_;
  const std::size_t k =
      std::min<std::size_t>(static_cast<std::size_t>(t), dens_.size() - 2);
  const double frac = t - static_cast<double>(k);
  return (dens_[k] * (1.0 - frac) + dens_[k + 1] * frac) / norm_;
}

double StableDist::std_cdf(double z) const {
  const auto& xs = interp_.knots();
  if (z <= xs.front()) {
    if (tails_ == TailMode::Pareto && z <= x0_ && A_neg_ > 0.0) {
      return A_neg_ * std::pow(-z, -params_.alpha) / (params_.alpha * norm_);
    }
    return z <= x0_ ? 0.0 : knot_ulo_;
  }
  if (z >= xs.back()) {
    const double zhi = x0_ + static_cast<double>(dens_.size() - 1) * h_;
    if (tails_ == TailMode::Pareto && z >= zhi && A_pos_ > 0.0) {
      return 1.0 -
             A_pos_ * std::pow(z, -params_.alpha) / (params_.alpha * norm_);
    }
    return z >= zhi ? 1.0 : knot_uhi_;
  }
  return std::clamp(interp_(z), 0.0, 1.0);
}

double StableDist::std_quantile(double u, bool* clamped) const {
  const auto& xs = interp_.knots();
  const auto& us = interp_.values();
  if (clamped) *clamped = false;
  if (u <= knot_ulo_) {
    if (tails_ == TailMode::Pareto && A_neg_ > 0.0 && u > 0.0) {
      const double z =
          -std::pow(A_neg_ / (params_.alpha * norm_ * u), 1.0 / params_.alpha);
      if (z <= xs.front()) return z;
    }
    if (clamped) *clamped = true;
    return xs.front();
  }
  if (u >= knot_uhi_) {
    if (tails_ == TailMode::Pareto && A_pos_ > 0.0 && u < 1.0) {
      const double z = std::pow(
          A_pos_ / (params_.alpha * norm_ * (1.0 - u)), 1.0 / params_.alpha);
      if (z >= xs.back()) return z;
    }
    if (clamped) *clamped = true;
    return xs.back();
  }
  const auto it = std::upper_bound(us.begin(), us.end(), u);
  const std::size_t j =
      std::min<std::size_t>(static_cast<std::size_t>(it - us.begin()),
                            us.size() - 1);
  return interp_.solve(u, xs[j - 1], xs[j]);
}

double StableDist::pdf(double x) const {
  return std_pdf((x - delta0_) / sigma_) / sigma_;
}

double StableDist::log_pdf(double x) const {
  const double v = pdf(x);
  return v > 0.0 ? std::log(v) : -745.0;  // log of smallest positive double
}

double StableDist::cdf(double x) const {
  return std_cdf((x - delta0_) / sigma_);
}

double StableDist::quantile(double u, bool* clamped) const {
  return delta0_ + sigma_ * std_quantile(u, clamped);
}

double stable_loglik(const std::vector<double>& data, const StableParams& p,
                     int n_log2, double h) {
  StableDist dist(p, n_log2, h, TailMode::Pareto);
  double s = 0.0;
  for (double x : data) s += dist.log_pdf(x);
  return s;
}

double sample_standard(double alpha, double beta, Rng& rng) {
  const double u = rng.uniform(-0.5 * pi, 0.5 * pi);
  const double e = rng.exponential();
  if (alpha_is_one(alpha)) {
    const double pb = 0.5 * pi + beta * u;
    return (2.0 / pi) *
           (pb * std::tan(u) -
            beta * std::log((0.5 * pi * e * std::cos(u)) / pb));
  }
  const double ta = std::tan(0.5 * pi * alpha);
  const double b0 = std::atan(beta * ta) / alpha;
  const double s0 = std::pow(1.0 + beta * beta * ta * ta, 0.5 / alpha);
  const double a_up = alpha * (u + b0);
  return s0 * std::sin(a_up) / std::pow(std::cos(u), 1.0 / alpha) *
         std::pow(std::cos(u - a_up) / e, (1.0 - alpha) / alpha);
}

double sample_one(const StableParams& p, Rng& rng) {
  const StableParams q = to_zolotarev(p);
  const double z = sample_standard(q.alpha, q.beta, rng);
  if (alpha_is_one(q.alpha)) {
    return q.mu + q.sigma * z +
           (2.0 / pi) * q.beta * q.sigma * std::log(q.sigma);
  }
  return q.mu + q.sigma * z;
}

std::vector<double> sample(const StableParams& p, std::size_t n, Rng& rng) {
  const StableParams q = to_zolotarev(p);
  const bool one = alpha_is_one(q.alpha);
  const double shift =
      one ? q.mu + (2.0 / pi) * q.beta * q.sigma * std::log(q.sigma) : q.mu;
  std::vector<double> out(n);
  for (auto& y : out) y = shift + q.sigma * sample_standard(q.alpha, q.beta, rng);
  return out;
}

}  // namespace stablecf
