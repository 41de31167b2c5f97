#pragma once

#include "pvflow/field.hpp"
#include "pvflow/young.hpp"

namespace pvflow {

struct SolverConfig {
  double p = 1.5;               // driver variation exponent
  double picard_tol = 1e-10;    // absolute sup-norm fixed-point tolerance
  int max_iters = 60;           // iteration cap per window
  double window_shrink = 0.5;   // window subdivision factor
  double divergence_factor = 1e6;  // abort when |Y| exceeds this times (1+|x0|)
  bool check_hypothesis = true;    // require field.alpha > p

  void validate() const {
    if (!(picard_tol > 0.0)) throw std::invalid_argument("picard_tol must be > 0");
    if (!(window_shrink > 0.0 && window_shrink < 1.0))
      throw std::invalid_argument("window_shrink must lie in (0, 1)");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  }
};

/// Solver output: the solution path on the output grid, the optional Jacobian
/// component, and iteration diagnostics.
struct Trajectory {
  SampledPath path;
  std::optional<MatrixPath> jacobian;
  double s = 0.0, t = 0.0;
  Vector start_point;
  int iterations_used = 0;
  int windows_used = 0;
};

class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

/// Picard iteration for dY = f(Y) dX on a fixed grid, with adaptive window
/// subdivision.  A window is shrunk when the observed contraction ratio of
/// successive iterates stays at or above 0.9, when the iteration cap is hit,
/// or when iterates blow up; the subdivided solutions are concatenated by
/// matching endpoints.
class GridPicard {
 public:
  GridPicard(const std::vector<double>& times, const std::vector<Vector>& xs,
             const LipschitzField& field, const SolverConfig& cfg)
      : times_(times), xs_(xs), field_(field), cfg_(cfg) {}

  std::vector<Vector> run(const Vector& x0, int& iterations, int& windows) {
    std::vector<Vector> y(times_.size(), x0);
    iterations_ = 0;
    windows_ = 0;
    solve_window(0, times_.size() - 1, x0, y);
    iterations = iterations_;
    windows = windows_;
    return y;
  }

 private:
  void solve_window(std::size_t i0, std::size_t i1, const Vector& y0,
                    std::vector<Vector>& y) {
    const std::size_t cells = i1 - i0;
    const double bound = cfg_.divergence_factor * (1.0 + y0.norm());
    std::vector<Vector> prev(cells + 1, y0), next(cells + 1, y0);
    double prev_dist = std::numeric_limits<double>::infinity();
    int slow = 0;

    for (int iter = 1; iter <= cfg_.max_iters; ++iter) {
      ++iterations_;
      bool diverged = false;
      double dist = 0.0;
      Vector acc = y0;
      next[0] = y0;
      for (std::size_t k = 0; k < cells; ++k) {
        acc += field_.eval(prev[k]) * (xs_[i0 + k + 1] - xs_[i0 + k]);
        next[k + 1] = acc;
        dist = std::max(dist, (next[k + 1] - prev[k + 1]).norm());
        if (!acc.allFinite() || acc.norm() > bound) {
          diverged = true;
          break;
        }
      }
      if (!diverged && dist <= cfg_.picard_tol) {
        for (std::size_t k = 0; k <= cells; ++k) y[i0 + k] = next[k];
        ++windows_;
        return;
      }
      if (!diverged && iter >= 2) {
        slow = (dist >= 0.9 * prev_dist) ? slow + 1 : 0;
        prev_dist = dist;
      }
      const bool give_up = diverged || slow >= 2 || iter == cfg_.max_iters;
      if (give_up) {
        if (cells <= 1)
          throw SolveError(
              "Picard iteration failed on a single grid cell (field likely violates "
              "the alpha > p hypothesis or the driver is pathological)");
        const double t_split =
            times_[i0] + cfg_.window_shrink * (times_[i1] - times_[i0]);
        std::size_t mid =
            std::upper_bound(times_.begin() + i0, times_.begin() + i1, t_split) -
            times_.begin();
        mid = std::min(std::max(mid, i0 + 1), i1 - 1);
        solve_window(i0, mid, y0, y);
        solve_window(mid, i1, y[mid], y);
        return;
      }
      prev.swap(next);
    }
  }

  const std::vector<double>& times_;
  const std::vector<Vector>& xs_;
  const LipschitzField& field_;
  const SolverConfig& cfg_;
  int iterations_ = 0;
  int windows_ = 0;
};

inline void hypothesis_check(const SampledPath& driver, const LipschitzField& field,
                             const SolverConfig& cfg) {
  cfg.validate();
  if (field.dim_driver() != dim(driver))
    throw std::invalid_argument("solve: field driver dimension mismatch");
  if (cfg.check_hypothesis && !(field.alpha() > cfg.p))
    throw std::invalid_argument(
        "solve: uniqueness hypothesis violated: field alpha = " +
        std::to_string(field.alpha()) + " must exceed driver exponent p = " +
        std::to_string(cfg.p));
}

/// Grid and driver values on [s, t] (driver samples plus interpolated endpoints).
inline void solve_grid(const SampledPath& driver, double s, double t,
                       std::vector<double>& times, std::vector<Vector>& xs) {
  const SampledPath r = restrict(driver, s, t);
  times = r.times;
  xs = r.values;
}

inline Trajectory solve_impl(const SampledPath& driver, const LipschitzField& field,
                             const Vector& x0, double s, double t,
                             const SolverConfig& cfg) {
  std::vector<double> times;
  std::vector<Vector> xs;
  solve_grid(driver, s, t, times, xs);
  GridPicard picard(times, xs, field, cfg);
  Trajectory out;
  out.s = s;
  out.t = t;
  out.start_point = x0;
  out.path.kind = PathKind::ContinuousLinear;
  out.path.times = times;
  out.path.values = picard.run(x0, out.iterations_used, out.windows_used);
  return out;
}

}  // namespace detail

/// Unique solution of Y_t = x0 + int f(Y_u) dX_u in the Young sense on the
/// driver grid, by Picard iteration with adaptive window subdivision.
/// Requires a continuous driver and field.alpha > cfg.p.
inline Trajectory solve(const SampledPath& driver, const LipschitzField& field,
                        const Vector& x0, double s, double t,
                        const SolverConfig& cfg = {}) {
  if (driver.kind != PathKind::ContinuousLinear)
    throw std::invalid_argument("solve: driver must be continuous (see solve_geometric)");
  detail::hypothesis_check(driver, field, cfg);
  if (!x0.allFinite()) throw std::invalid_argument("solve: non-finite start point");
  return detail::solve_impl(driver, field, x0, s, t, cfg);
}

/// Solves the paired system for (Y, K) with K_s = I, by rewriting it as a
/// single equation dZ = h(Z) dX on the augmented state.  The uniqueness
/// hypothesis is checked on the base field; the augmented field only needs
/// the existence threshold, which it inherits.
inline Trajectory solve_with_jacobian(const SampledPath& driver,
                                      const LipschitzField& field, const Vector& x0,
                                      double s, double t, const SolverConfig& cfg = {}) {
  if (driver.kind != PathKind::ContinuousLinear)
    throw std::invalid_argument("solve: driver must be continuous (see solve_geometric)");
  detail::hypothesis_check(driver, field, cfg);
  const PairedField paired = make_paired_field(field);
  SolverConfig inner = cfg;
  inner.check_hypothesis = false;
  Trajectory aug = detail::solve_impl(driver, paired.augmented,
                                      paired.initial_state(x0), s, t, inner);
  const int d = field.dim_state();
  Trajectory out;
  out.s = s;
  out.t = t;
  out.start_point = x0;
  out.iterations_used = aug.iterations_used;
  out.windows_used = aug.windows_used;
  out.path.kind = PathKind::ContinuousLinear;
  out.path.times = aug.path.times;
  MatrixPath k;
  k.kind = PathKind::ContinuousLinear;
  k.times = aug.path.times;
  for (const Vector& z : aug.path.values) {
    out.path.values.push_back(z.head(d));
    k.values.push_back(Eigen::Map<const Matrix>(z.data() + d, d, d));
  }
  out.jacobian = std::move(k);
  return out;
}

/// One application of the Picard map Y -> x0 + int f(Y) dX via the indefinite
/// Young integral, exposed so the contraction rate is observable.
inline Trajectory picard_iterate(const SampledPath& driver, const LipschitzField& field,
                                 const Vector& x0, double s, double t,
                                 const Trajectory& previous) {
  std::vector<double> times;
  std::vector<Vector> xs;
  detail::solve_grid(driver, s, t, times, xs);
  if (times != previous.path.times)
    throw std::invalid_argument("picard_iterate: previous trajectory grid mismatch");
  MatrixPath integrand;
  integrand.kind = PathKind::ContinuousLinear;
  integrand.times = times;
  integrand.values.reserve(times.size());
  for (const Vector& y : previous.path.values) integrand.values.push_back(field.eval(y));
  const SampledPath integral = indefinite_young_integral(integrand, driver, s, t);
  Trajectory out;
  out.s = s;
  out.t = t;
  out.start_point = x0;
  out.path.kind = PathKind::ContinuousLinear;
  out.path.times = integral.times;
  out.path.values.reserve(integral.size());
  for (const Vector& v : integral.values) out.path.values.push_back(x0 + v);
  return out;
}

/// Sup-norm fixed point residual ||Y - x0 - int f(Y) dX||_inf of a trajectory.
inline double fixed_point_residual(const SampledPath& driver, const LipschitzField& field,
                                   const Trajectory& traj) {
  const Trajectory mapped =
      picard_iterate(driver, field, traj.start_point, traj.s, traj.t, traj);
  double r = 0.0;
  for (std::size_t i = 0; i < traj.path.size(); ++i)
    r = std::max(r, (mapped.path.values[i] - traj.path.values[i]).norm());
  return r;
}

}  // namespace pvflow
