#pragma once

#include "pvflow/parallel.hpp"
#include "pvflow/pvariation.hpp"
#include "pvflow/solver.hpp"

namespace pvflow {

/// The two-parameter solution operator realized over a finite set of anchor
/// points: images Y_{s,t}(x) and Jacobians K_{s,t}(x) per anchor.
struct FlowMap {
  double s = 0.0, t = 0.0;
  std::vector<Vector> anchors;
  std::vector<Vector> images;
  std::vector<Matrix> jacobians;  // empty when not requested
  std::string driver_ref;
};

struct CheckReport {
  std::string check;
  bool pass = false;
  double max_discrepancy = 0.0;
  double tol = 0.0;
  std::string detail;
};

/// Uniform anchor lattice over a box, per_dim points per coordinate.
inline std::vector<Vector> anchor_lattice(const Box& box, int per_dim) {
  if (per_dim < 1) throw std::invalid_argument("anchor_lattice: per_dim must be >= 1");
  const int d = static_cast<int>(box.lo.size());
  std::vector<Vector> anchors;
  std::vector<int> idx(d, 0);
  while (true) {
    Vector x(d);
    for (int i = 0; i < d; ++i)
      x[i] = per_dim == 1 ? 0.5 * (box.lo[i] + box.hi[i])
                          : box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (per_dim - 1);
    anchors.push_back(x);
    int i = 0;
    for (; i < d; ++i) {
      if (++idx[i] < per_dim) break;
      idx[i] = 0;
    }
    if (i == d) break;
  }
  return anchors;
}

/// Solve the flow at each anchor; anchors run concurrently.
inline FlowMap make_flow(const SampledPath& driver, const LipschitzField& field,
                         const std::vector<Vector>& anchors, double s, double t,
                         const SolverConfig& cfg = {}, bool with_jacobian = true) {
  FlowMap flow;
  flow.s = s;
  flow.t = t;
  flow.anchors = anchors;
  flow.images.resize(anchors.size());
  if (with_jacobian) flow.jacobians.resize(anchors.size());
  parallel_for(anchors.size(), [&](std::size_t i) {
    if (with_jacobian) {
      Trajectory traj = solve_with_jacobian(driver, field, anchors[i], s, t, cfg);
      flow.images[i] = traj.path.values.back();
      flow.jacobians[i] = traj.jacobian->values.back();
    } else {
      Trajectory traj = solve(driver, field, anchors[i], s, t, cfg);
      flow.images[i] = traj.path.values.back();
    }
  });
  return flow;
}

/// Smallest |det K| over the anchors; a positive value certifies local
/// injectivity of the sampled flow.
inline double min_abs_jacobian_det(const FlowMap& flow) {
  double m = std::numeric_limits<double>::infinity();
  for (const Matrix& k : flow.jacobians)
    m = std::min(m, std::abs(k.determinant()));
  return m;
}

/// Composition law check: flow_tu must have been solved at the images of
/// flow_st (re-solving rather than interpolating, so interpolation error
/// cannot masquerade as a flow defect).  Reports
///   max over anchors |Y_{s,u}(x) - Y_{t,u}(Y_{s,t}(x))|.
inline CheckReport flow_compose_check(const FlowMap& flow_su, const FlowMap& flow_st,
                                      const FlowMap& flow_tu, double tol) {
  if (flow_su.s != flow_st.s || flow_st.t != flow_tu.s || flow_su.t != flow_tu.t)
    throw std::invalid_argument("flow_compose_check: parameter mismatch (need s<=t<=u)");
  if (flow_su.anchors.size() != flow_st.anchors.size() ||
      flow_tu.anchors.size() != flow_st.anchors.size())
    throw std::invalid_argument("flow_compose_check: anchor count mismatch");
  for (std::size_t i = 0; i < flow_st.images.size(); ++i)
    if ((flow_tu.anchors[i] - flow_st.images[i]).norm() != 0.0)
      throw std::invalid_argument(
          "flow_compose_check: flow_tu anchors must be the images of flow_st");
  CheckReport rep;
  rep.check = "composition";
  rep.tol = tol;
  for (std::size_t i = 0; i < flow_su.images.size(); ++i)
    rep.max_discrepancy =
        std::max(rep.max_discrepancy, (flow_su.images[i] - flow_tu.images[i]).norm());
  rep.pass = rep.max_discrepancy <= tol;
  return rep;
}

/// Build the three flows for s <= t <= u and run the composition check.
inline CheckReport run_composition_check(const SampledPath& driver,
                                         const LipschitzField& field,
                                         const std::vector<Vector>& anchors, double s,
                                         double t, double u, const SolverConfig& cfg,
                                         double tol) {
  const FlowMap su = make_flow(driver, field, anchors, s, u, cfg, false);
  const FlowMap st = make_flow(driver, field, anchors, s, t, cfg, false);
  const FlowMap tu = make_flow(driver, field, st.images, t, u, cfg, false);
  return flow_compose_check(su, st, tu, tol);
}

/// Jacobian-vs-derivative check: compares K_{s,t}(x) e_j against the central
/// finite difference (Y_{s,t}(x + h e_j) - Y_{s,t}(x - h e_j)) / 2h, at every
/// anchor and coordinate direction.  Relative deviation against max(|K e_j|, 1).
inline CheckReport jacobian_flow_check(const SampledPath& driver,
                                       const LipschitzField& field, const FlowMap& flow,
                                       double h, double tol,
                                       const SolverConfig& cfg = {}) {
  if (!(h > 0.0)) throw std::invalid_argument("jacobian_flow_check: h must be > 0");
  if (flow.jacobians.empty())
    throw std::invalid_argument("jacobian_flow_check: flow carries no Jacobians");
  const int d = field.dim_state();
  if (field.box()) {
    for (const Vector& x : flow.anchors)
      if (!field.box()->contains(x, h))
        throw std::invalid_argument(
            "jacobian_flow_check: anchor too close to the box boundary for the stencil");
  }
  CheckReport rep;
  rep.check = "jacobian";
  rep.tol = tol;
  std::vector<double> devs(flow.anchors.size(), 0.0);
  parallel_for(flow.anchors.size(), [&](std::size_t i) {
    double dev = 0.0;
    for (int j = 0; j < d; ++j) {
      Vector e = Vector::Zero(d);
      e[j] = h;
      const Vector yp =
          solve(driver, field, flow.anchors[i] + e, flow.s, flow.t, cfg).path.values.back();
      const Vector ym =
          solve(driver, field, flow.anchors[i] - e, flow.s, flow.t, cfg).path.values.back();
      const Vector fd = (yp - ym) / (2.0 * h);
      const Vector ke = flow.jacobians[i].col(j);
      dev = std::max(dev, (ke - fd).norm() / std::max(ke.norm(), 1.0));
    }
    devs[i] = dev;
  });
  for (double dvi : devs) rep.max_discrepancy = std::max(rep.max_discrepancy, dvi);
  rep.pass = rep.max_discrepancy <= tol;
  return rep;
}

/// Candidate inverse of Y_{s,t}: the flow driven by the time-reversed driver
/// over the same interval.
inline FlowMap inverse_flow(const SampledPath& driver, const LipschitzField& field,
                            double s, double t, const std::vector<Vector>& anchors,
                            const SolverConfig& cfg = {}, bool with_jacobian = false) {
  const SampledPath reversed = time_reverse(restrict(driver, s, t));
  return make_flow(reversed, field, anchors, s, t, cfg, with_jacobian);
}

/// Forward-then-inverse round trip |inverse(Y_{s,t}(x)) - x|, solving the
/// inverse at the forward images.
inline CheckReport inverse_roundtrip_check(const SampledPath& driver,
                                           const LipschitzField& field, double s,
                                           double t, const std::vector<Vector>& anchors,
                                           const SolverConfig& cfg, double tol) {
  const FlowMap forward = make_flow(driver, field, anchors, s, t, cfg, false);
  const FlowMap back = inverse_flow(driver, field, s, t, forward.images, cfg, false);
  CheckReport rep;
  rep.check = "inverse";
  rep.tol = tol;
  for (std::size_t i = 0; i < anchors.size(); ++i)
    rep.max_discrepancy =
        std::max(rep.max_discrepancy, (back.images[i] - anchors[i]).norm());
  rep.pass = rep.max_discrepancy <= tol;
  return rep;
}

/// Empirical spatial modulus of the Jacobian path:
///   max over anchor pairs ||K(a) - K(b)||_{p,[s,t]} / |a - b|^gamma,
/// reported together with its value on a refined anchor set.  Pass means the
/// modulus is finite and does not explode under refinement.
struct ContinuityReport {
  double gamma = 1.0;
  double modulus = 0.0;
  double refined_modulus = 0.0;
  bool pass = false;
  double stability_factor = 3.0;
};

inline double continuity_modulus(const SampledPath& driver, const LipschitzField& field,
                                 double s, double t, const std::vector<Vector>& anchors,
                                 double gamma, const SolverConfig& cfg) {
  if (anchors.size() < 2)
    throw std::invalid_argument("continuity check: need at least two anchors");
  std::vector<MatrixPath> kpaths(anchors.size());
  parallel_for(anchors.size(), [&](std::size_t i) {
    kpaths[i] = *solve_with_jacobian(driver, field, anchors[i], s, t, cfg).jacobian;
  });
  double modulus = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i)
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      const double dist = (anchors[i] - anchors[j]).norm();
      if (dist == 0.0) continue;
      const double kvar =
          p_variation_exact(path_difference(kpaths[i], kpaths[j]), cfg.p).value;
      modulus = std::max(modulus, kvar / std::pow(dist, gamma));
    }
  return modulus;
}

inline ContinuityReport continuity_in_space_check(const SampledPath& driver,
                                                  const LipschitzField& field, double s,
                                                  double t, const Box& box, int per_dim,
                                                  double gamma, const SolverConfig& cfg,
                                                  double stability_factor = 3.0) {
  ContinuityReport rep;
  rep.gamma = gamma;
  rep.stability_factor = stability_factor;
  rep.modulus = continuity_modulus(driver, field, s, t, anchor_lattice(box, per_dim),
                                   gamma, cfg);
  rep.refined_modulus = continuity_modulus(
      driver, field, s, t, anchor_lattice(box, 2 * per_dim - 1), gamma, cfg);
  rep.pass = std::isfinite(rep.refined_modulus) &&
             rep.refined_modulus <= stability_factor * std::max(rep.modulus, 1e-12);
  return rep;
}

}  // namespace pvflow
