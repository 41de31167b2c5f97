#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pvflow {

/// Tanh-sinh (double-exponential) quadrature on a finite interval.
/// Robust to integrable endpoint singularities; nodes that collapse onto the
/// endpoints in floating point are skipped (their weights underflow anyway).
template <class F>
double tanh_sinh(F&& f, double a, double b, double tol = 1e-12, int max_level = 12) {
  if (!(b > a)) throw std::invalid_argument("tanh_sinh: need a < b");
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  const double pi_half = 1.5707963267948966;

  // contribution of the node at abscissa parameter t, or 0 if it degenerates
  auto term = [&](double t) -> double {
    const double sh = std::sinh(t);
    const double ch = std::cosh(pi_half * sh);
    const double w = half * pi_half * std::cosh(t) / (ch * ch);
    const double x = mid + half * std::tanh(pi_half * sh);
    if (w < 1e-300 || x <= a || x >= b) return 0.0;
    return w * f(x);
  };

  double h = 1.0;
  double sum = term(0.0);
  for (int k = 1; k <= 7; ++k) {
    const double add = term(h * k) + term(-h * k);
    sum += add;
    if (add == 0.0) break;
  }
  double integral = h * sum;

  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    double add = 0.0;
    for (int k = 1; k * h <= 7.5; k += 2) add += term(k * h) + term(-k * h);
    const double prev = integral;
    sum += add;
    integral = h * sum;
    if (level >= 4 && std::abs(integral - prev) <= tol * (std::abs(integral) + 1.0))
      break;
  }
  return integral;
}

}  // namespace pvflow
