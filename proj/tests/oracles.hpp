#pragma once

// Brute-force reference implementations. They are written from the
// definitions only and share no code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double rmu_entry(double x, double mu) {
  const double gap = std::max(std::sqrt(mu) - std::abs(x), 0.0);
  return mu - gap * gap;
}

/// Coarse grid over [lo, hi], then refinement in the bracket around the
/// best grid point: bisection on the sign of `df` when it changes sign
/// there, golden-section search otherwise. Suitable for functions that are
/// unimodal at the grid scale.
inline double minimize_1d(const std::function<double(double)>& f, const std::function<double(double)>& df, double lo,
                          double hi, double step) {
  double best_x = lo;
  double best_f = f(lo);
  const auto n = static_cast<long>(std::ceil((hi - lo) / step));
  for (long k = 1; k <= n; ++k) {
    const double x = std::min(hi, lo + step * static_cast<double>(k));
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - step);
  double b = std::min(hi, best_x + step);
  double refined;
  if (df(a) < 0.0 && df(b) > 0.0) {
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      (df(mid) < 0.0 ? a : b) = mid;
    }
    refined = f(a) <= f(b) ? a : b;
  } else {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = f(d);
      }
    }
    refined = 0.5 * (a + b);
  }
  return f(refined) <= best_f ? refined : best_x;
}

/// Slope of r_mu at x (one-sided from the right at 0).
inline double rmu_slope(double x, double mu) {
  const double gap = std::sqrt(mu) - std::abs(x);
  if (gap <= 0.0) return 0.0;
  return 2.0 * gap * (x >= 0.0 ? 1.0 : -1.0);
}

/// argmin_x r_mu(x) + tau (x - m)^2 on a grid of the given step.
inline double prox_r_mu(double m, double tau, double mu, double step = 1e-4) {
  auto f = [&](double x) { return rmu_entry(x, mu) + tau * (x - m) * (x - m); };
  auto df = [&](double x) { return rmu_slope(x, mu) + 2.0 * tau * (x - m); };
  return minimize_1d(f, df, std::min(-3.0, m - 1.0), std::max(3.0, m + 1.0), step);
}

inline double prox_r_mu_objective(double x, double m, double tau, double mu) {
  return rmu_entry(x, mu) + tau * (x - m) * (x - m);
}

/// argmin_x 2 level |x| + (x - m)^2, i.e. the l1 prox whose shrinkage is
/// `level`.
inline double prox_l1(double m, double level, double step = 1e-4) {
  auto f = [&](double x) { return 2.0 * level * std::abs(x) + (x - m) * (x - m); };
  auto df = [&](double x) { return 2.0 * level * (x >= 0.0 ? 1.0 : -1.0) + 2.0 * (x - m); };
  return minimize_1d(f, df, std::min(-3.0, m - 1.0), std::max(3.0, m + 1.0), step);
}

/// Per-singular-value oracle for matrix proxes; uses a Jacobi SVD.
inline Eigen::MatrixXd spectral_apply(const Eigen::MatrixXd& m, const std::function<double(double)>& scalar) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) d(i, i) = scalar(svd.singularValues()(i));
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Stationary points of f(x) = r_mu(x) + (a x - b)^2 located by scanning
/// the sign of the one-sided derivatives on a grid over [-lim, lim].
/// Assumes isolated stationary points.
inline std::vector<double> stationary_scan(double a, double b, double mu, double lim, double step) {
  auto f = [&](double x) { return rmu_entry(x, mu) + (a * x - b) * (a * x - b); };
  const double h = 1e-9;
  auto deriv = [&](double x) { return (f(x + h) - f(x - h)) / (2 * h); };
  std::vector<double> out;
  // Kink at zero: stationary iff the left slope <= 0 <= right slope.
  const double left = (f(0.0) - f(-h)) / h;
  const double right = (f(h) - f(0.0)) / h;
  if (left <= 1e-6 && right >= -1e-6) out.push_back(0.0);
  double prev_x = -lim;
  double prev_d = deriv(prev_x);
  for (double x = -lim + step; x <= lim; x += step) {
    const double d = deriv(x);
    const bool crosses_kink = prev_x < 0.0 && x > 0.0;
    if (!crosses_kink && ((prev_d < 0.0 && d >= 0.0) || (prev_d > 0.0 && d <= 0.0))) {
      // Bisect the sign change.
      double lo = prev_x, hi = x;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((deriv(mid) < 0.0) == (prev_d < 0.0)) lo = mid;
        else hi = mid;
      }
      const double root = 0.5 * (lo + hi);
      if (std::abs(root) > 10 * step) out.push_back(root);
    }
    prev_x = x;
    prev_d = d;
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
