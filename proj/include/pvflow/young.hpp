#pragma once

#include "pvflow/path.hpp"

#include <mutex>
#include <unordered_map>

namespace pvflow {

/// Riemann zeta on (1, inf) by Euler-Maclaurin acceleration.  The value
/// enters every Young a-priori bound, so results are memoized.
inline double riemann_zeta(double s) {
  if (!(s > 1.0)) throw std::invalid_argument("riemann_zeta: require s > 1");
  static std::unordered_map<double, double> cache;
  static std::mutex mtx;
  {
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
  }
  // Bernoulli numbers B_2, B_4, ..., B_12 over (2j)!
  static const double b_over_fact[6] = {
      1.0 / 12.0,           -1.0 / 720.0,          1.0 / 30240.0,
      -1.0 / 1209600.0,     1.0 / 47900160.0,      -691.0 / 1307674368000.0};
  const int n = 16;
  double sum = 0.0;
  for (int k = 1; k < n; ++k) sum += std::pow(k, -s);
  sum += 0.5 * std::pow(n, -s);
  sum += std::pow(n, 1.0 - s) / (s - 1.0);
  double rising = s;  // s (s+1) ... (s+2j-2)
  double npow = std::pow(n, -s - 1.0);
  for (int j = 1; j <= 6; ++j) {
    sum += b_over_fact[j - 1] * rising * npow;
    rising *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
    npow /= static_cast<double>(n) * n;
  }
  std::lock_guard<std::mutex> lock(mtx);
  cache.emplace(s, sum);
  return sum;
}

/// A-priori bound (1 + zeta(1/p + 1/q)) * vq * vp on the p-variation of the
/// indefinite Young integral of an integrand started at zero.
inline double young_error_bound(double p, double q, double vp, double vq) {
  const double theta = 1.0 / p + 1.0 / q;
  if (!(theta > 1.0))
    throw std::invalid_argument("young_error_bound: require 1/p + 1/q > 1");
  if (vp < 0.0 || vq < 0.0)
    throw std::invalid_argument("young_error_bound: variations must be >= 0");
  return (1.0 + riemann_zeta(theta)) * vq * vp;
}

namespace detail {

template <class A, class B>
std::vector<double> common_refinement(const BasicPath<A>& f, const BasicPath<B>& g,
                                      double s, double t) {
  if (s > t) throw std::invalid_argument("young_integral: empty interval");
  if (s < f.start_time() || t > f.end_time() || s < g.start_time() || t > g.end_time())
    throw std::invalid_argument("young_integral: incompatible grids (interval not covered)");
  std::vector<double> u;
  u.push_back(s);
  auto push_interior = [&](const std::vector<double>& times) {
    for (double x : times)
      if (x > s && x < t) u.push_back(x);
  };
  push_interior(f.times);
  push_interior(g.times);
  u.push_back(t);
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

template <class A, class B>
void check_no_common_jumps(const BasicPath<A>& f, const BasicPath<B>& g, double s,
                           double t) {
  if (f.kind != PathKind::Cadlag || g.kind != PathKind::Cadlag) return;
  for (const auto& [i, left] : f.jumps) {
    const double tf = f.times[i];
    if (tf < s || tf > t) continue;
    for (const auto& [j, leftg] : g.jumps)
      if (g.times[j] == tf)
        throw std::invalid_argument("young_integral: common discontinuity at t=" +
                                    std::to_string(tf));
  }
}

}  // namespace detail

/// Left-point Young integral of a matrix-valued integrand against a
/// vector-valued integrator over the union of the two sample grids:
///   sum_k f(u_k) (g(u_{k+1}) - g(u_k)).
/// Deterministic given the grids; the common refinement realizes the
/// Riemann-sum limit definition at the sampled resolution.
inline Vector young_integral(const MatrixPath& integrand, const SampledPath& integrator,
                             double s, double t,
                             std::optional<double> p = std::nullopt,
                             std::optional<double> q = std::nullopt) {
  if (p && q && !(1.0 / *p + 1.0 / *q > 1.0))
    throw std::invalid_argument("young_integral: declared exponents give 1/p + 1/q <= 1");
  detail::check_no_common_jumps(integrand, integrator, s, t);
  const std::vector<double> u = detail::common_refinement(integrand, integrator, s, t);
  Vector acc = Vector::Zero(integrand.values.front().rows());
  Vector g_cur = integrator.value_at(u[0]);
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    const Vector g_next = integrator.value_at(u[k + 1]);
    acc.noalias() += integrand.value_at(u[k]) * (g_next - g_cur);
    g_cur = g_next;
  }
  return acc;
}

/// Indefinite left-point Young integral on the union grid, as a path started
/// at zero.  This is the Picard-map building block.
inline SampledPath indefinite_young_integral(const MatrixPath& integrand,
                                             const SampledPath& integrator, double s,
                                             double t) {
  detail::check_no_common_jumps(integrand, integrator, s, t);
  const std::vector<double> u = detail::common_refinement(integrand, integrator, s, t);
  SampledPath out;
  out.kind = PathKind::ContinuousLinear;
  out.times = u;
  out.values.reserve(u.size());
  Vector acc = Vector::Zero(integrand.values.front().rows());
  out.values.push_back(acc);
  Vector g_cur = integrator.value_at(u[0]);
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    const Vector g_next = integrator.value_at(u[k + 1]);
    acc += integrand.value_at(u[k]) * (g_next - g_cur);
    out.values.push_back(acc);
    g_cur = g_next;
  }
  return out;
}

}  // namespace pvflow
