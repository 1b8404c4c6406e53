#pragma once
// Local optimizers for smooth low-dimensional objectives: Nelder-Mead and a
// quasi-Newton (BFGS) refiner with central-difference gradients, plus a
// smooth box transform for bounded parameters.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace stablecf {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

struct OptimResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int evals = 0;
  bool converged = false;
};

struct OptimOptions {
  double tol = 1e-10;        // relative simplex / gradient tolerance
  int max_iter = 2000;
  double init_step = 0.1;    // initial simplex edge / line-search scale
};

inline OptimResult nelder_mead(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                               OptimOptions opt = {}) {
  const int n = static_cast<int>(x0.size());
  OptimResult res;
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 1; i <= n; ++i) {
    double step = opt.init_step * std::max(1.0, std::abs(x0[i - 1]));
    pts[i][i - 1] += step;
  }
  for (int i = 0; i <= n; ++i) {
    fv[i] = f(pts[i]);
    ++res.evals;
  }
  auto order = [&] {
    for (int i = 0; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j)
        if (fv[j] < fv[i]) {
          std::swap(fv[i], fv[j]);
          std::swap(pts[i], pts[j]);
        }
  };
  order();
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    if (std::abs(fv[n] - fv[0]) <=
        opt.tol * (std::abs(fv[0]) + std::abs(fv[n]) + 1e-300)) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;
    Eigen::VectorXd xr = centroid + (centroid - pts[n]);
    double fr = f(xr);
    ++res.evals;
    if (fr < fv[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[n]);
      double fe = f(xe);
      ++res.evals;
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (pts[n] - centroid);
      double fc = f(xc);
      ++res.evals;
      if (fc < fv[n]) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          fv[i] = f(pts[i]);
          ++res.evals;
        }
      }
    }
    order();
  }
  res.x = pts[0];
  res.f = fv[0];
  return res;
}

inline Eigen::VectorXd numeric_gradient(const ObjectiveFn& f,
                                        const Eigen::VectorXd& x,
                                        double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    double fp = f(xp);
    xp[i] = x[i] - step;
    double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

// BFGS with backtracking Armijo line search; gradients by central difference.
inline OptimResult bfgs(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                        OptimOptions opt = {}) {
  const int n = static_cast<int>(x0.size());
  OptimResult res;
  Eigen::VectorXd x = x0;
  double fx = f(x);
  ++res.evals;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = numeric_gradient(f, x);
  res.evals += 2 * n;
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    if (g.norm() < opt.tol * (1.0 + std::abs(fx))) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd p = -H * g;
    if (p.dot(g) >= 0.0) {  // not a descent direction; reset
      H.setIdentity();
      p = -g;
    }
    double t = 1.0;
    double gp = g.dot(p);
    double fn = fx;
    Eigen::VectorXd xn = x;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = x + t * p;
      fn = f(xn);
      ++res.evals;
      if (fn <= fx + 1e-4 * t * gp) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;
    Eigen::VectorXd gn = numeric_gradient(f, xn);
    res.evals += 2 * n;
    Eigen::VectorXd s = xn - x;
    Eigen::VectorXd y = gn - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd V = I - (s * y.transpose()) / sy;
      H = V * H * V.transpose() + (s * s.transpose()) / sy;
    }
    double improve = fx - fn;
    x = xn;
    fx = fn;
    g = gn;
    if (improve < opt.tol * (std::abs(fx) + 1e-300) && iter > 3) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.f = fx;
  return res;
}

// Smooth bijection between a box and R^n: finite bounds use a scaled logistic
// map, half-infinite bounds a log map, free coordinates the identity.
class BoxTransform {
 public:
  BoxTransform(Eigen::VectorXd lo, Eigen::VectorXd hi)
      : lo_(std::move(lo)), hi_(std::move(hi)) {}

  Eigen::VectorXd to_unbounded(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(x.size());
    for (int i = 0; i < x.size(); ++i) {
      const double lo = lo_[i], hi = hi_[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        double u = std::min(std::max((x[i] - lo) / (hi - lo), 1e-12), 1.0 - 1e-12);
        y[i] = std::log(u / (1.0 - u));
      } else if (std::isfinite(lo)) {
        y[i] = std::log(std::max(x[i] - lo, 1e-300));
      } else if (std::isfinite(hi)) {
        y[i] = std::log(std::max(hi - x[i], 1e-300));
      } else {
        y[i] = x[i];
      }
    }
    return y;
  }

  Eigen::VectorXd to_bounded(const Eigen::VectorXd& y) const {
    Eigen::VectorXd x(y.size());
    for (int i = 0; i < y.size(); ++i) {
      const double lo = lo_[i], hi = hi_[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        x[i] = lo + (hi - lo) / (1.0 + std::exp(-y[i]));
      } else if (std::isfinite(lo)) {
        x[i] = lo + std::exp(y[i]);
      } else if (std::isfinite(hi)) {
        x[i] = hi - std::exp(y[i]);
      } else {
        x[i] = y[i];
      }
    }
    return x;
  }

  // Minimizes f over the box by optimizing the transformed objective from x0.
  OptimResult minimize(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                       OptimOptions opt = {}, bool polish_bfgs = true) const {
    auto g = [&](const Eigen::VectorXd& y) { return f(to_bounded(y)); };
    OptimResult r = nelder_mead(g, to_unbounded(x0), opt);
    if (polish_bfgs) {
      OptimOptions o2 = opt;
      o2.max_iter = 200;
      OptimResult r2 = bfgs(g, r.x, o2);
      r2.evals += r.evals;
      if (r2.f <= r.f) r = r2;
    }
    r.x = to_bounded(r.x);
    return r;
  }

 private:
  Eigen::VectorXd lo_, hi_;
};

}  // namespace stablecf
