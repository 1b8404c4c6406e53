#pragma once
// Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).
// Used to interpolate numeric CDF tables; monotone data yields a monotone
// interpolant, which keeps numeric quantile inversion well posed.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace stablecf {

class Pchip {
 public:
  Pchip() = default;

  // x strictly increasing; y arbitrary (monotone y gives a monotone spline).
  Pchip(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    assert(n >= 2 && n == y_.size());
    d_.assign(n, 0.0);
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    if (n == 2) {
      d_[0] = d_[1] = delta[0];
      return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        d_[i] = 0.0;
      } else {
        // Weighted harmonic mean keeps the interpolant monotone.
        double w1 = 2.0 * h[i] + h[i - 1];
        double w2 = h[i] + 2.0 * h[i - 1];
        d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    d_[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  double operator()(double x) const {
    const std::size_t i = cell(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
  }

  double derivative(double x) const {
    const std::size_t i = cell(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double g00 = (6 * t * t - 6 * t) / h;
    const double g10 = 3 * t * t - 4 * t + 1;
    const double g01 = -g00;
    const double g11 = 3 * t * t - 2 * t;
    return g00 * y_[i] + g10 * d_[i] + g01 * y_[i + 1] + g11 * d_[i + 1];
  }

  // Solves f(x) = target on [xlo, xhi] assuming monotone data; Newton with a
  // bisection safeguard, |f(x) - target| driven below tol.
  double solve(double target, double xlo, double xhi,
               double tol = 1e-12) const {
    double lo = xlo, hi = xhi;
    double flo = (*this)(lo) - target;
    double fhi = (*this)(hi) - target;
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    bool increasing = fhi > flo;
    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 100; ++iter) {
      double f = (*this)(x)-target;
      if (std::abs(f) < tol) return x;
      if ((f > 0.0) == increasing) {
        hi = x;
      } else {
        lo = x;
      }
      double der = derivative(x);
      double step = (der != 0.0) ? f / der : 0.0;
      double xn = x - step;
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
      if (std::abs(xn - x) < 1e-15 * (std::abs(x) + 1.0)) return xn;
      x = xn;
    }
    return x;
  }

  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  static double edge_slope(double h0, double h1, double d0, double d1) {
    double d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return d;
  }

  std::size_t cell(double x) const {
    if (x <= x_.front()) return 0;
    if (x >= x_.back()) return x_.size() - 2;
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
  }

  std::vector<double> x_, y_, d_;
};

}  // namespace stablecf
