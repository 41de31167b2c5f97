#pragma once

#include "pvflow/flow.hpp"
#include "pvflow/pvariation.hpp"
#include "pvflow/solver.hpp"

#include <numeric>

namespace pvflow {

/// Discretization of a jump traversal.  Each inserted segment gets a grid
/// proportional to its stretched length with a floor of 8 points, so big
/// jumps get finer traversal; the per_unit_jump term additionally scales the
/// fourth-order traversal integrator so large jumps stay resolved to well
/// below the 1e-8 jump-law tolerance.
struct TraversalGrid {
  int floor_points = 8;
  double per_unit_length = 16.0;
  double per_unit_jump = 96.0;
  int cap = 4096;

  int steps(double jump_norm, double stretched_len) const {
    const double want = std::max(static_cast<double>(floor_points),
                                 std::max(per_unit_length * stretched_len,
                                          per_unit_jump * jump_norm));
    return std::min(static_cast<int>(std::ceil(want)), cap);
  }
};

/// The pair (tau^delta, X^delta): the time change inserting fictitious
/// duration delta |J|^p at each jump, and the continuous path traversing each
/// jump linearly over the inserted interval.
struct JumpParametrisation {
  double p = 1.0;
  double delta = 1.0;
  SampledPath original;   // the cadlag path (restricted to the working interval)
  SampledPath stretched;  // continuous path on [tau(t0), tau(T)]

  struct JumpRecord {
    std::size_t sample_index;  // index into original
    double time;
    Vector left, jump;
    double tau_left, tau_right;  // inserted interval [tau(t-), tau(t)]
    int traversal_steps;
  };
  std::vector<JumpRecord> jumps;                 // chronological
  std::vector<double> sample_tau;                // tau at each original sample
  std::vector<std::size_t> sample_to_stretched;  // original sample -> stretched index

  double total_stretch() const {
    double s = 0.0;
    for (const auto& j : jumps) s += j.tau_right - j.tau_left;
    return s;
  }

  /// tau(t) = t + delta * sum_{t_n <= t} |J(t_n)|^p  (right-continuous).
  double tau(double t) const {
    double extra = 0.0;
    for (const auto& j : jumps) {
      if (j.time > t) break;
      extra += j.tau_right - j.tau_left;
    }
    return t + extra;
  }

  /// Jump indices ordered by magnitude (largest first, ties by earlier time).
  /// The time-change sum is order-independent; only indexing needs this.
  std::vector<std::size_t> magnitude_order() const {
    std::vector<std::size_t> idx(jumps.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [this](std::size_t a, std::size_t b) {
      const double na = jumps[a].jump.norm(), nb = jumps[b].jump.norm();
      if (na != nb) return na > nb;
      return jumps[a].time < jumps[b].time;
    });
    return idx;
  }
};

/// Build (tau^delta, X^delta) for a cadlag path.  The stretched path visits
/// every original sample and traverses each jump linearly from X(t-) to X(t)
/// over the inserted interval; jumps are inserted at their chronological
/// positions.
inline JumpParametrisation parametrise(const SampledPath& path, double p, double delta,
                                       const TraversalGrid& grid = {}) {
  if (!(p >= 1.0)) throw std::invalid_argument("parametrise: p must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("parametrise: delta must be > 0");
  path.validate();

  JumpParametrisation out;
  out.p = p;
  out.delta = delta;
  out.original = path;
  out.stretched.kind = PathKind::ContinuousLinear;
  out.sample_tau.resize(path.size());
  out.sample_to_stretched.resize(path.size());

  double stretch = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path.has_jump(i)) {
      const Vector left = path.left_limit(i);
      const Vector jump = path.values[i] - left;
      const double len = delta * std::pow(jump.norm(), p);
      const double tau_left = path.times[i] + stretch;
      const int m = grid.steps(jump.norm(), len);
      out.stretched.times.push_back(tau_left);
      out.stretched.values.push_back(left);
      for (int k = 1; k < m; ++k) {
        out.stretched.times.push_back(tau_left + len * k / m);
        out.stretched.values.push_back(left + (static_cast<double>(k) / m) * jump);
      }
      stretch += len;
      out.jumps.push_back({i, path.times[i], left, jump, tau_left, tau_left + len, m});
    }
    out.sample_tau[i] = path.times[i] + stretch;
    out.sample_to_stretched[i] = out.stretched.times.size();
    out.stretched.times.push_back(out.sample_tau[i]);
    out.stretched.values.push_back(path.values[i]);
  }
  return out;
}

/// Checks that the stretched continuous path has exactly the p-variation of
/// the original cadlag path (jump endpoints included).  The inserted
/// traversal points are collinear, so equality is exact up to rounding.
inline CheckReport pvariation_preservation_check(const JumpParametrisation& param,
                                                 double p, double rel_tol = 1e-10) {
  const double v_orig = p_variation_exact(param.original, p).value;
  const double v_stretched = p_variation_exact(param.stretched, p).value;
  CheckReport rep;
  rep.check = "pvar-preservation";
  rep.tol = rel_tol;
  rep.max_discrepancy = std::abs(v_stretched - v_orig) /
                        std::max({std::abs(v_orig), std::abs(v_stretched), 1e-300});
  rep.pass = rep.max_discrepancy <= rel_tol;
  rep.detail =
      "original=" + std::to_string(v_orig) + " stretched=" + std::to_string(v_stretched);
  return rep;
}

namespace detail {

/// Waypoints of the instantaneous flow along the integral curve
/// dz/du = f(z) J, u in [0,1], with optional Jacobian propagation
/// dk/du = A(z, J) k.  Classical fourth-order Runge-Kutta: the inserted
/// driver segment is linear, so the stretched equation is a smooth ODE there
/// and a one-step method integrates it far more accurately than grid Riemann
/// sums would.
struct Traversal {
  std::vector<Vector> states;
  std::vector<Matrix> ks;
};

inline Traversal traverse_jump(const LipschitzField& field, const Vector& start,
                               const Vector& jump, int steps, bool with_jacobian,
                               const Matrix& k0 = Matrix()) {
  Traversal tr;
  tr.states.reserve(steps + 1);
  tr.states.push_back(start);
  if (with_jacobian) {
    tr.ks.reserve(steps + 1);
    tr.ks.push_back(k0);
  }
  const double h = 1.0 / steps;
  Vector z = start;
  Matrix k = k0;
  auto fz = [&](const Vector& y) -> Vector { return field.eval(y) * jump; };
  auto fk = [&](const Vector& y, const Matrix& m) -> Matrix {
    return field.state_jacobian(y, jump) * m;
  };
  for (int step = 0; step < steps; ++step) {
    const Vector z1 = fz(z);
    const Vector z2 = fz(z + 0.5 * h * z1);
    const Vector z3 = fz(z + 0.5 * h * z2);
    const Vector z4 = fz(z + h * z3);
    if (with_jacobian) {
      const Matrix k1 = fk(z, k);
      const Matrix k2 = fk(z + 0.5 * h * z1, k + 0.5 * h * k1);
      const Matrix k3 = fk(z + 0.5 * h * z2, k + 0.5 * h * k2);
      const Matrix k4 = fk(z + h * z3, k + h * k3);
      k += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      tr.ks.push_back(k);
    }
    z += (h / 6.0) * (z1 + 2.0 * z2 + 2.0 * z3 + z4);
    tr.states.push_back(z);
  }
  return tr;
}

/// Continuous sub-path of a cadlag path over sample indices [a, b], taking
/// the left limit at b when requested (b carries a jump).
inline SampledPath continuous_segment(const SampledPath& path, std::size_t a,
                                      std::size_t b, bool left_at_end) {
  SampledPath seg;
  seg.kind = PathKind::ContinuousLinear;
  seg.times.reserve(b - a + 1);
  seg.values.reserve(b - a + 1);
  for (std::size_t i = a; i <= b; ++i) {
    seg.times.push_back(path.times[i]);
    seg.values.push_back(i == b && left_at_end ? path.left_limit(i) : path.values[i]);
  }
  return seg;
}

/// Continuous solve continuing an existing Jacobian block K0 (identity for a
/// fresh solve).
inline Trajectory solve_segment(const SampledPath& seg, const LipschitzField& field,
                                const Vector& y0, const Matrix* k0,
                                const SolverConfig& cfg) {
  SolverConfig inner = cfg;
  inner.check_hypothesis = false;
  if (k0 == nullptr)
    return solve_impl(seg, field, y0, seg.start_time(), seg.end_time(), inner);
  const PairedField paired = make_paired_field(field);
  Trajectory aug = solve_impl(seg, paired.augmented, PairedField::pack(y0, *k0),
                              seg.start_time(), seg.end_time(), inner);
  const int d = field.dim_state();
  Trajectory out;
  out.s = aug.s;
  out.t = aug.t;
  out.start_point = y0;
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

inline std::vector<std::size_t> jump_indices_of(const SampledPath& r) {
  std::vector<std::size_t> idx;
  idx.reserve(r.jumps.size());
  for (const auto& [i, left] : r.jumps) idx.push_back(i);
  return idx;  // std::map keys are already sorted
}

}  // namespace detail

struct JumpLogEntry {
  double time = 0.0;
  Vector start, jump, end;
  Matrix k_before, k_after;
};

/// A geometric solve: the solution on original time (cadlag, jumping where
/// the driver jumps), the underlying continuous solve on stretched time, and
/// a per-jump log.
struct GeometricTrajectory {
  Trajectory trajectory;
  Trajectory stretched_trajectory;
  JumpParametrisation param;
  std::vector<JumpLogEntry> jump_log;
};

/// Unique geometric solution of dY = f(Y) dX for a cadlag driver: solve the
/// continuous stretched equation on [0, tau(T)], then remove fictitious time.
/// At each jump the solution moves along the integral curve of f in the jump
/// direction (the time-1 flow of dz/du = f(z) J), which is exactly what the
/// straight-line traversal of the stretched driver induces.
inline GeometricTrajectory solve_geometric(const SampledPath& driver,
                                           const LipschitzField& field, const Vector& x0,
                                           double s, double t, double p, double delta,
                                           const SolverConfig& cfg = {},
                                           bool with_jacobian = true,
                                           const TraversalGrid& tg = {}) {
  SolverConfig outer = cfg;
  outer.p = p;
  detail::hypothesis_check(driver, field, outer);
  if (!x0.allFinite()) throw std::invalid_argument("solve_geometric: non-finite start");
  const SampledPath r = restrict(driver, s, t);
  GeometricTrajectory out;
  out.param = parametrise(r, p, delta, tg);

  const int d = field.dim_state();
  Vector y = x0;
  Matrix k = Matrix::Identity(d, d);
  SolverConfig inner = cfg;
  inner.p = p;
  inner.check_hypothesis = false;

  Trajectory& traj = out.trajectory;
  traj.s = s;
  traj.t = t;
  traj.start_point = x0;
  traj.path.kind = r.jumps.empty() ? PathKind::ContinuousLinear : PathKind::Cadlag;
  MatrixPath jac;
  jac.kind = traj.path.kind;

  Trajectory& st = out.stretched_trajectory;
  st.s = out.param.stretched.start_time();
  st.t = out.param.stretched.end_time();
  st.start_point = x0;
  st.path.kind = PathKind::ContinuousLinear;
  MatrixPath stjac;
  stjac.kind = PathKind::ContinuousLinear;

  auto emit_original = [&](std::size_t i, const Vector& value, const Matrix& kval) {
    traj.path.times.push_back(r.times[i]);
    traj.path.values.push_back(value);
    if (with_jacobian) {
      jac.times.push_back(r.times[i]);
      jac.values.push_back(kval);
    }
  };
  auto emit_stretched = [&](double tau, const Vector& value, const Matrix& kval) {
    st.path.times.push_back(tau);
    st.path.values.push_back(value);
    if (with_jacobian) {
      stjac.times.push_back(tau);
      stjac.values.push_back(kval);
    }
  };

  emit_original(0, y, k);
  emit_stretched(out.param.sample_tau[0], y, k);

  const std::vector<std::size_t> jumps_at = detail::jump_indices_of(r);
  std::size_t a = 0;
  std::size_t jp = 0;
  while (true) {
    const bool more = jp < jumps_at.size();
    const std::size_t b = more ? jumps_at[jp] : r.size() - 1;
    if (b > a) {
      const SampledPath seg = detail::continuous_segment(r, a, b, more);
      Trajectory sol =
          detail::solve_segment(seg, field, y, with_jacobian ? &k : nullptr, inner);
      traj.iterations_used += sol.iterations_used;
      traj.windows_used += sol.windows_used;
      const double shift = out.param.sample_tau[a] - r.times[a];
      for (std::size_t i = a + 1; i <= b; ++i) {
        const Matrix kv = with_jacobian ? sol.jacobian->values[i - a] : Matrix();
        emit_stretched(r.times[i] + shift, sol.path.values[i - a], kv);
        if (!(i == b && more)) emit_original(i, sol.path.values[i - a], kv);
      }
      y = sol.path.values.back();
      if (with_jacobian) k = sol.jacobian->values.back();
    }
    if (!more) break;
    const auto& rec = out.param.jumps[jp];
    detail::Traversal tr =
        detail::traverse_jump(field, y, rec.jump, rec.traversal_steps, with_jacobian, k);
    JumpLogEntry log;
    log.time = rec.time;
    log.start = y;
    log.jump = rec.jump;
    log.end = tr.states.back();
    if (with_jacobian) {
      log.k_before = k;
      log.k_after = tr.ks.back();
    }
    const double len = rec.tau_right - rec.tau_left;
    for (int step = 1; step <= rec.traversal_steps; ++step)
      emit_stretched(rec.tau_left + len * step / rec.traversal_steps, tr.states[step],
                     with_jacobian ? tr.ks[step] : Matrix());
    traj.path.jumps.emplace(traj.path.times.size(), y);
    if (with_jacobian) jac.jumps.emplace(jac.times.size(), k);
    y = tr.states.back();
    if (with_jacobian) k = tr.ks.back();
    emit_original(rec.sample_index, y, k);
    out.jump_log.push_back(std::move(log));
    a = rec.sample_index;
    ++jp;
  }
  if (with_jacobian) {
    traj.jacobian = std::move(jac);
    st.jacobian = std::move(stjac);
  }
  return out;
}

/// Comparison solution applying the forward rule Y_t - Y_{t-} = f(Y_{t-}) J
/// at jumps and solving the continuous pieces in between.  This is the
/// Lebesgue-Stieltjes style solution; it generally does not generate a
/// diffeomorphic flow (the Jacobian can degenerate at a single jump).
inline Trajectory solve_forward_jump(const SampledPath& driver,
                                     const LipschitzField& field, const Vector& x0,
                                     double s, double t, const SolverConfig& cfg = {},
                                     bool with_jacobian = true) {
  detail::hypothesis_check(driver, field, cfg);
  if (!x0.allFinite()) throw std::invalid_argument("solve_forward_jump: non-finite start");
  const SampledPath r = restrict(driver, s, t);
  const int d = field.dim_state();
  Vector y = x0;
  Matrix k = Matrix::Identity(d, d);
  SolverConfig inner = cfg;
  inner.check_hypothesis = false;

  Trajectory traj;
  traj.s = s;
  traj.t = t;
  traj.start_point = x0;
  traj.path.kind = r.jumps.empty() ? PathKind::ContinuousLinear : PathKind::Cadlag;
  MatrixPath jac;
  jac.kind = traj.path.kind;

  auto emit = [&](std::size_t i, const Vector& value, const Matrix& kval) {
    traj.path.times.push_back(r.times[i]);
    traj.path.values.push_back(value);
    if (with_jacobian) {
      jac.times.push_back(r.times[i]);
      jac.values.push_back(kval);
    }
  };
  emit(0, y, k);

  const std::vector<std::size_t> jumps_at = detail::jump_indices_of(r);
  std::size_t a = 0;
  std::size_t jp = 0;
  while (true) {
    const bool more = jp < jumps_at.size();
    const std::size_t b = more ? jumps_at[jp] : r.size() - 1;
    if (b > a) {
      const SampledPath seg = detail::continuous_segment(r, a, b, more);
      Trajectory sol =
          detail::solve_segment(seg, field, y, with_jacobian ? &k : nullptr, inner);
      traj.iterations_used += sol.iterations_used;
      traj.windows_used += sol.windows_used;
      for (std::size_t i = a + 1; i <= b; ++i) {
        if (i == b && more) break;
        emit(i, sol.path.values[i - a],
             with_jacobian ? sol.jacobian->values[i - a] : Matrix());
      }
      y = sol.path.values.back();
      if (with_jacobian) k = sol.jacobian->values.back();
    }
    if (!more) break;
    const std::size_t i = jumps_at[jp];
    const Vector jump = r.values[i] - r.left_limit(i);
    traj.path.jumps.emplace(traj.path.times.size(), y);
    if (with_jacobian) jac.jumps.emplace(jac.times.size(), k);
    const Vector y_left = y;
    y = y_left + field.eval(y_left) * jump;
    if (with_jacobian)
      k = (Matrix::Identity(d, d) + field.state_jacobian(y_left, jump)) * k;
    emit(i, y, k);
    a = i;
    ++jp;
  }
  if (with_jacobian) traj.jacobian = std::move(jac);
  return traj;
}

namespace detail {

/// Endpoint of the reverse geometric flow: continuous pieces driven by their
/// time-reversed sub-paths, jumps traversed with -J in reverse chronological
/// order.  This is the flow of the time-reversed stretched path, with the
/// jump traversals kept at full accuracy.
inline Vector geometric_reverse_endpoint(const SampledPath& restricted,
                                         const JumpParametrisation& param,
                                         const LipschitzField& field,
                                         const Vector& y_end, const SolverConfig& cfg) {
  SolverConfig inner = cfg;
  inner.check_hypothesis = false;
  Vector y = y_end;
  const auto& jumps = param.jumps;
  std::size_t upper = restricted.size() - 1;
  for (std::size_t jp = jumps.size(); jp-- > 0;) {
    const std::size_t i = jumps[jp].sample_index;
    if (upper > i) {
      // forward piece runs from the post-jump value at i to the left limit
      // at upper (when upper itself jumps)
      const SampledPath seg = time_reverse(
          continuous_segment(restricted, i, upper, restricted.has_jump(upper)));
      y = solve_impl(seg, field, y, seg.start_time(), seg.end_time(), inner)
              .path.values.back();
    }
    y = traverse_jump(field, y, -jumps[jp].jump, jumps[jp].traversal_steps, false)
            .states.back();
    // the piece before this jump ends at the left limit; its reversal starts there
    upper = i;
  }
  if (upper > 0) {
    SampledPath seg = continuous_segment(restricted, 0, upper, restricted.has_jump(upper));
    seg = time_reverse(seg);
    y = solve_impl(seg, field, y, seg.start_time(), seg.end_time(), inner)
            .path.values.back();
  }
  return y;
}

}  // namespace detail

/// Composition, Jacobian, and inverse checks for the geometric flow of a
/// cadlag driver (the stretched-time flow evaluated at original times).  For
/// a driver with no jumps this reduces to the continuous checks.
struct GeometricFlowReport {
  CheckReport composition, jacobian, inverse;
  double min_abs_det = 0.0;
  bool pass() const { return composition.pass && jacobian.pass && inverse.pass; }
};

inline GeometricFlowReport geometric_flow_check(
    const SampledPath& driver, const LipschitzField& field,
    const std::vector<Vector>& anchors, double s, double t, double u, double p,
    double delta, const SolverConfig& cfg = {}, double tol_compose = 1e-6,
    double fd_h = 1e-5, double tol_jacobian = 1e-3, double tol_inverse = 1e-5,
    const TraversalGrid& tg = {}) {
  if (!(s <= t && t <= u))
    throw std::invalid_argument("geometric_flow_check: need s <= t <= u");
  GeometricFlowReport rep;
  const int d = field.dim_state();

  auto endpoint = [&](const Vector& x, double a, double b, bool with_jac) {
    GeometricTrajectory g = solve_geometric(driver, field, x, a, b, p, delta, cfg,
                                            with_jac, tg);
    return std::make_pair(g.trajectory.path.values.back(),
                          with_jac ? g.trajectory.jacobian->values.back() : Matrix());
  };

  // composition over [s,u] vs [t,u] after [s,t]
  rep.composition.check = "composition";
  rep.composition.tol = tol_compose;
  std::vector<double> comp(anchors.size(), 0.0);
  parallel_for(anchors.size(), [&](std::size_t i) {
    const Vector y_su = endpoint(anchors[i], s, u, false).first;
    const Vector y_st = endpoint(anchors[i], s, t, false).first;
    const Vector y_tu = endpoint(y_st, t, u, false).first;
    comp[i] = (y_su - y_tu).norm();
  });
  for (double c : comp) rep.composition.max_discrepancy =
      std::max(rep.composition.max_discrepancy, c);
  rep.composition.pass = rep.composition.max_discrepancy <= tol_compose;

  // Jacobian against central finite differences over [s,u]
  rep.jacobian.check = "jacobian";
  rep.jacobian.tol = tol_jacobian;
  std::vector<double> jdev(anchors.size(), 0.0);
  std::vector<double> dets(anchors.size(), 0.0);
  parallel_for(anchors.size(), [&](std::size_t i) {
    const auto [y0, k0] = endpoint(anchors[i], s, u, true);
    dets[i] = std::abs(k0.determinant());
    double dev = 0.0;
    for (int j = 0; j < d; ++j) {
      Vector e = Vector::Zero(d);
      e[j] = fd_h;
      const Vector yp = endpoint(anchors[i] + e, s, u, false).first;
      const Vector ym = endpoint(anchors[i] - e, s, u, false).first;
      const Vector fd = (yp - ym) / (2.0 * fd_h);
      dev = std::max(dev, (k0.col(j) - fd).norm() / std::max(k0.col(j).norm(), 1.0));
    }
    jdev[i] = dev;
  });
  for (double dvi : jdev)
    rep.jacobian.max_discrepancy = std::max(rep.jacobian.max_discrepancy, dvi);
  rep.jacobian.pass = rep.jacobian.max_discrepancy <= tol_jacobian;
  rep.min_abs_det = *std::min_element(dets.begin(), dets.end());

  // inverse via the reversed stretched path
  rep.inverse.check = "inverse";
  rep.inverse.tol = tol_inverse;
  const SampledPath restricted = restrict(driver, s, u);
  const JumpParametrisation param = parametrise(restricted, p, delta, tg);
  std::vector<double> inv(anchors.size(), 0.0);
  parallel_for(anchors.size(), [&](std::size_t i) {
    const Vector fwd = endpoint(anchors[i], s, u, false).first;
    SolverConfig inner = cfg;
    inner.p = p;
    const Vector back =
        detail::geometric_reverse_endpoint(restricted, param, field, fwd, inner);
    inv[i] = (back - anchors[i]).norm();
  });
  for (double e : inv) rep.inverse.max_discrepancy =
      std::max(rep.inverse.max_discrepancy, e);
  rep.inverse.pass = rep.inverse.max_discrepancy <= tol_inverse;
  return rep;
}

}  // namespace pvflow
