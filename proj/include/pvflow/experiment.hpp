#pragma once

#include "pvflow/cadlag.hpp"
#include "pvflow/drivers.hpp"
#include "pvflow/field.hpp"
#include "pvflow/flow.hpp"
#include "pvflow/io.hpp"

#include <chrono>
#include <ctime>

namespace pvflow {

/// Config-driven experiment pipeline: sample (or load) a driver, solve, run
/// selected checks, and write machine-readable reports.  Every report embeds
/// the config that produced it; identical config + seed reproduce the report
/// byte-for-byte apart from the run_info block (timestamp and timings).
struct ExperimentResult {
  int exit_code = 0;  // 0 all checks pass, 1 check failure, 2 config invalid
  nlohmann::json report;
};

namespace detail {

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline SampledPath driver_from_config(const nlohmann::json& cfg, std::uint64_t seed) {
  const std::string type = cfg.at("type").get<std::string>();
  const double horizon = cfg.value("horizon", 1.0);
  if (type == "fbm") {
    FBMSpec spec;
    spec.hurst = cfg.at("hurst").get<double>();
    spec.grid_points = cfg.value("grid", 1025);
    spec.horizon = horizon;
    spec.seed = seed;
    return sample_fbm(spec);
  }
  if (type == "stable" || type == "cp") {
    LevySpec spec;
    spec.seed = seed;
    spec.truncation = cfg.value("eps", 1e-3);
    spec.compensate = cfg.value("compensate", true);
    if (type == "stable")
      spec.stable = StableMeasure{cfg.at("alpha").get<double>(), cfg.value("scale", 1.0)};
    for (const auto& atom : cfg.value("atoms", nlohmann::json::array()))
      spec.atoms.push_back(
          {atom.at("size").get<double>(), atom.at("rate").get<double>()});
    return sample_levy(spec, horizon);
  }
  if (type == "jumps") {
    // explicit jump list: deterministic cadlag driver
    const auto times = cfg.at("times").get<std::vector<double>>();
    const auto sizes = cfg.at("sizes").get<std::vector<double>>();
    if (times.size() != sizes.size())
      throw std::invalid_argument("driver 'jumps': times/sizes length mismatch");
    std::vector<JumpEvent> events;
    for (std::size_t i = 0; i < times.size(); ++i) events.push_back({times[i], sizes[i]});
    return jumps_to_path(std::move(events), cfg.value("drift", 0.0), horizon);
  }
  if (type == "sine")
    return sine_path(cfg.value("amplitude", 0.1), cfg.value("cycles", 1.0),
                     cfg.value("samples", 10001), horizon);
  if (type == "file") return load_path(cfg.at("path").get<std::string>());
  throw std::invalid_argument("unknown driver type '" + type + "'");
}

inline LipschitzField field_from_config(const nlohmann::json& cfg) {
  if (cfg.contains("file"))
    return field_from_json(nlohmann::json::parse(read_file(cfg.at("file").get<std::string>())));
  std::map<std::string, double> params;
  for (const auto& [key, value] : cfg.value("params", nlohmann::json::object()).items())
    params[key] = value.get<double>();
  return make_field(cfg.at("name").get<std::string>(), params);
}

inline nlohmann::json check_to_json(const CheckReport& rep) {
  nlohmann::json j;
  j["pass"] = rep.pass;
  j["max_discrepancy"] = rep.max_discrepancy;
  j["tol"] = rep.tol;
  if (!rep.detail.empty()) j["detail"] = rep.detail;
  return j;
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

inline ExperimentResult run_experiment(const nlohmann::json& config,
                                       const std::filesystem::path& output_dir) {
  using nlohmann::json;
  ExperimentResult result;
  json& report = result.report;
  report["schema_version"] = 1;
  report["config"] = config;
  json timings = json::object();
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_ms = [](auto since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     since)
        .count();
  };

  // -- validation (exit code 2 on failure) ---------------------------------
  LipschitzField field;
  SampledPath driver;
  double p = 1.5, s = 0.0, t = 1.0, delta = 1.0;
  std::uint64_t seed = 1;
  SolverConfig scfg;
  std::vector<std::string> checks;
  json warnings = json::array();
  try {
    seed = config.value("seed", 1);
    p = config.value("p", 1.5);
    field = detail::field_from_config(config.at("field"));
    driver = detail::driver_from_config(config.at("driver"), seed);
    if (config.contains("interval")) {
      const auto iv = config.at("interval").get<std::vector<double>>();
      if (iv.size() != 2 || !(iv[0] < iv[1]))
        throw std::invalid_argument("interval must be [s, t] with s < t");
      s = iv[0];
      t = iv[1];
    } else {
      s = driver.start_time();
      t = driver.end_time();
    }
    if (s < driver.start_time() || t > driver.end_time())
      throw std::invalid_argument("interval outside driver domain");
    delta = config.value("delta", 1.0);
    scfg.p = p;
    if (config.contains("solver")) {
      const json& sc = config.at("solver");
      scfg.picard_tol = sc.value("picard_tol", scfg.picard_tol);
      scfg.max_iters = sc.value("max_iters", scfg.max_iters);
      scfg.window_shrink = sc.value("window_shrink", scfg.window_shrink);
    }
    scfg.validate();
    checks = config.value("checks", std::vector<std::string>{});
    if (!(field.alpha() > p)) {
      if (config.value("allow_hypothesis_override", false))
        warnings.push_back("hypothesis alpha > p not satisfied (alpha = " +
                           std::to_string(field.alpha()) + ", p = " + std::to_string(p) +
                           "); running anyway by explicit override");
      else
        throw std::invalid_argument("hypothesis check failed: field alpha = " +
                                    std::to_string(field.alpha()) +
                                    " does not exceed p = " + std::to_string(p) +
                                    " (set allow_hypothesis_override to force)");
    }
    for (const auto& name : checks) {
      static const std::vector<std::string> known = {
          "composition",    "jacobian",          "inverse",
          "continuity",     "pvar-preservation", "delta-invariance",
          "jump-law",       "degeneracy-contrast", "variation-probe"};
      if (std::find(known.begin(), known.end(), name) == known.end())
        throw std::invalid_argument("unknown check '" + name + "'");
    }
  } catch (const std::exception& e) {
    report["error"] = e.what();
    report["pass"] = false;
    result.exit_code = 2;
    return result;
  }
  if (!warnings.empty()) report["warnings"] = warnings;

  std::filesystem::create_directories(output_dir);
  const bool cadlag = driver.kind == PathKind::Cadlag;
  const std::string jump_rule = config.value("jump_rule", std::string("geometric"));
  SolverConfig relaxed = scfg;
  relaxed.check_hypothesis = !config.value("allow_hypothesis_override", false);

  json checks_out = json::object();
  json artifacts = json::object();
  bool all_pass = true;
  try {
    // -- trajectory from x0 --------------------------------------------------
    if (config.value("emit_trajectory", true)) {
      const auto t0 = std::chrono::steady_clock::now();
      Vector x0 = Vector::Zero(field.dim_state());
      if (config.contains("x0")) {
        const auto v = config.at("x0").get<std::vector<double>>();
        x0 = Eigen::Map<const Vector>(v.data(), v.size());
      }
      Trajectory traj;
      if (!cadlag) {
        traj = solve_with_jacobian(driver, field, x0, s, t, relaxed);
      } else if (jump_rule == "forward") {
        traj = solve_forward_jump(driver, field, x0, s, t, relaxed);
      } else {
        GeometricTrajectory geo =
            solve_geometric(driver, field, x0, s, t, p, delta, relaxed);
        traj = std::move(geo.trajectory);
        json log = json::array();
        for (const auto& e : geo.jump_log)
          log.push_back({{"time", e.time},
                         {"start", detail::to_std(e.start)},
                         {"jump", detail::to_std(e.jump)},
                         {"end", detail::to_std(e.end)}});
        write_file_atomic(output_dir / "jumps.json", log.dump(2) + "\n");
        artifacts["jump_log"] = "jumps.json";
      }
      save_trajectory_csv(output_dir / "trajectory.csv", traj);
      artifacts["trajectory"] = "trajectory.csv";
      timings["trajectory"] = elapsed_ms(t0);
    }

    // -- anchors and check parameters ----------------------------------------
    Box box = field.box() ? *field.box() : Box::cube(field.dim_state(), 1.0);
    int per_dim = 3;
    if (config.contains("anchors")) {
      const json& a = config.at("anchors");
      if (a.contains("box_lo")) {
        const auto lo = a.at("box_lo").get<std::vector<double>>();
        const auto hi = a.at("box_hi").get<std::vector<double>>();
        box.lo = Eigen::Map<const Vector>(lo.data(), lo.size());
        box.hi = Eigen::Map<const Vector>(hi.data(), hi.size());
      }
      per_dim = a.value("per_dim", 3);
    }
    const std::vector<Vector> anchors = anchor_lattice(box, per_dim);
    double mid = 0.5 * (s + t), upper = t;
    if (config.contains("times")) {
      const auto times3 = config.at("times").get<std::vector<double>>();
      if (times3.size() != 3) throw std::invalid_argument("times must be [s, t, u]");
      s = times3[0];
      mid = times3[1];
      upper = times3[2];
    }
    const json tols = config.value("tolerances", json::object());
    const double tol_comp = tols.value("composition", 1e-6);
    const double tol_jac = tols.value("jacobian", 1e-3);
    const double tol_inv = tols.value("inverse", 1e-5);
    const double fd_h = tols.value("fd_h", 1e-5);

    auto want = [&checks](const std::string& name) {
      return std::find(checks.begin(), checks.end(), name) != checks.end();
    };

    // -- flow checks ----------------------------------------------------------
    if (want("composition") || want("jacobian") || want("inverse")) {
      const auto t0 = std::chrono::steady_clock::now();
      if (cadlag) {
        GeometricFlowReport rep =
            geometric_flow_check(driver, field, anchors, s, mid, upper, p, delta,
                                 relaxed, tol_comp, fd_h, tol_jac, tol_inv);
        if (want("composition")) checks_out["composition"] = detail::check_to_json(rep.composition);
        if (want("jacobian")) {
          json j = detail::check_to_json(rep.jacobian);
          j["min_abs_det"] = rep.min_abs_det;
          checks_out["jacobian"] = j;
        }
        if (want("inverse")) checks_out["inverse"] = detail::check_to_json(rep.inverse);
        all_pass = all_pass && (!want("composition") || rep.composition.pass) &&
                   (!want("jacobian") || rep.jacobian.pass) &&
                   (!want("inverse") || rep.inverse.pass);
      } else {
        if (want("composition")) {
          const CheckReport rep = run_composition_check(driver, field, anchors, s, mid,
                                                        upper, relaxed, tol_comp);
          checks_out["composition"] = detail::check_to_json(rep);
          all_pass = all_pass && rep.pass;
        }
        if (want("jacobian")) {
          const FlowMap flow = make_flow(driver, field, anchors, s, upper, relaxed, true);
          const CheckReport rep =
              jacobian_flow_check(driver, field, flow, fd_h, tol_jac, relaxed);
          json j = detail::check_to_json(rep);
          j["min_abs_det"] = min_abs_jacobian_det(flow);
          checks_out["jacobian"] = j;
          all_pass = all_pass && rep.pass;
        }
        if (want("inverse")) {
          const CheckReport rep =
              inverse_roundtrip_check(driver, field, s, upper, anchors, relaxed, tol_inv);
          checks_out["inverse"] = detail::check_to_json(rep);
          all_pass = all_pass && rep.pass;
        }
      }
      timings["flow_checks"] = elapsed_ms(t0);
    }

    if (want("continuity")) {
      const auto t0 = std::chrono::steady_clock::now();
      if (cadlag) throw std::invalid_argument("continuity check needs a continuous driver");
      const double gamma = tols.value("continuity_gamma", 1.0);
      const ContinuityReport rep = continuity_in_space_check(
          driver, field, s, upper, box, per_dim, gamma, relaxed);
      checks_out["continuity"] = {{"pass", rep.pass},
                                  {"gamma", rep.gamma},
                                  {"modulus", rep.modulus},
                                  {"refined_modulus", rep.refined_modulus}};
      all_pass = all_pass && rep.pass;
      timings["continuity"] = elapsed_ms(t0);
    }

    if (want("pvar-preservation")) {
      const auto t0 = std::chrono::steady_clock::now();
      const double rel_tol = tols.value("preservation", 1e-10);
      json per_delta = json::array();
      bool pass = true;
      for (double dlt : config.value("deltas", std::vector<double>{0.5, 1.0, 2.0})) {
        const JumpParametrisation param = parametrise(restrict(driver, s, t), p, dlt);
        const CheckReport rep = pvariation_preservation_check(param, p, rel_tol);
        per_delta.push_back({{"delta", dlt},
                             {"pass", rep.pass},
                             {"rel_discrepancy", rep.max_discrepancy}});
        pass = pass && rep.pass;
      }
      checks_out["pvar-preservation"] = {{"pass", pass}, {"per_delta", per_delta}};
      all_pass = all_pass && pass;
      timings["pvar_preservation"] = elapsed_ms(t0);
    }

    if (want("delta-invariance")) {
      const auto t0 = std::chrono::steady_clock::now();
      Vector x0 = Vector::Zero(field.dim_state());
      if (config.contains("x0")) {
        const auto v = config.at("x0").get<std::vector<double>>();
        x0 = Eigen::Map<const Vector>(v.data(), v.size());
      }
      const auto deltas = config.value("deltas", std::vector<double>{0.5, 1.0, 2.0});
      std::vector<Trajectory> sols;
      for (double dlt : deltas)
        sols.push_back(
            solve_geometric(driver, field, x0, s, t, p, dlt, relaxed, false).trajectory);
      double dev = 0.0;
      for (std::size_t k = 1; k < sols.size(); ++k)
        for (std::size_t i = 0; i < sols[0].path.size(); ++i)
          dev = std::max(dev,
                         (sols[k].path.values[i] - sols[0].path.values[i]).norm());
      const double tol = 10.0 * scfg.picard_tol;
      checks_out["delta-invariance"] = {
          {"pass", dev <= tol}, {"max_discrepancy", dev}, {"tol", tol}};
      all_pass = all_pass && dev <= tol;
      timings["delta_invariance"] = elapsed_ms(t0);
    }

    if (want("jump-law")) {
      // self-consistency of jump traversal: refine the traversal integrator
      const auto t0 = std::chrono::steady_clock::now();
      Vector x0 = Vector::Zero(field.dim_state());
      if (config.contains("x0")) {
        const auto v = config.at("x0").get<std::vector<double>>();
        x0 = Eigen::Map<const Vector>(v.data(), v.size());
      }
      GeometricTrajectory geo = solve_geometric(driver, field, x0, s, t, p, delta, relaxed);
      TraversalGrid fine;
      fine.per_unit_jump = 4 * TraversalGrid{}.per_unit_jump;
      fine.floor_points = 64;
      double dev = 0.0;
      for (const auto& e : geo.jump_log) {
        const auto refined =
            detail::traverse_jump(field, e.start, e.jump,
                                  fine.steps(e.jump.norm(), delta * std::pow(e.jump.norm(), p)),
                                  false);
        dev = std::max(dev, (refined.states.back() - e.end).norm());
      }
      const double tol = tols.value("jump_law", 1e-8);
      checks_out["jump-law"] = {{"pass", dev <= tol},
                                {"max_discrepancy", dev},
                                {"tol", tol},
                                {"jumps", geo.jump_log.size()}};
      all_pass = all_pass && dev <= tol;
      timings["jump_law"] = elapsed_ms(t0);
    }

    if (want("degeneracy-contrast")) {
      const auto t0 = std::chrono::steady_clock::now();
      Vector x0 = Vector::Zero(field.dim_state());
      if (config.contains("x0")) {
        const auto v = config.at("x0").get<std::vector<double>>();
        x0 = Eigen::Map<const Vector>(v.data(), v.size());
      }
      const Trajectory fwd = solve_forward_jump(driver, field, x0, s, t, relaxed);
      const GeometricTrajectory geo =
          solve_geometric(driver, field, x0, s, t, p, delta, relaxed);
      const double det_fwd = fwd.jacobian->values.back().determinant();
      const double det_geo = geo.trajectory.jacobian->values.back().determinant();
      const bool pass = std::abs(det_fwd) <= 1e-12 && std::abs(det_geo) > 1e-8;
      checks_out["degeneracy-contrast"] = {{"pass", pass},
                                           {"forward_det", det_fwd},
                                           {"geometric_det", det_geo}};
      all_pass = all_pass && pass;
      timings["degeneracy_contrast"] = elapsed_ms(t0);
    }

    if (want("variation-probe")) {
      const auto t0 = std::chrono::steady_clock::now();
      const json& pr = config.at("probe");
      const std::string expect = pr.at("expect").get<std::string>();
      const int seeds = pr.value("seeds", 20);
      const int majority = pr.value("majority", 15);
      const double probe_p = pr.value("p", p);
      int hits = 0;
      json trend = json::array();
      const json& dc = config.at("driver");
      if (dc.at("type") == "fbm") {
        FbmSampler sampler(dc.at("hurst").get<double>(), dc.value("grid", 4097),
                           dc.value("horizon", 1.0));
        const int refinements = pr.value("refinements", 9);
        for (int k = 0; k < seeds; ++k) {
          const ProbeReport rep = dyadic_variation_probe(sampler.sample(seed + k),
                                                         probe_p, refinements);
          trend.push_back(rep.values);
          if (expect == "plateau")
            hits += rep.plateau_from(pr.value("plateau_from", 4),
                                     pr.value("plateau_tol", 0.10));
          else
            hits += rep.growth() >= pr.value("growth_factor", 2.0);
        }
      } else {
        LevySpec spec;
        spec.stable = StableMeasure{dc.at("alpha").get<double>(), dc.value("scale", 1.0)};
        spec.truncation = dc.value("eps", 1e-3);
        const auto eps_levels = pr.at("eps_levels").get<std::vector<double>>();
        const double horizon = dc.value("horizon", 1.0);
        for (int k = 0; k < seeds; ++k) {
          spec.seed = seed + k;
          const ProbeReport rep = levy_variation_probe(spec, probe_p, eps_levels, horizon);
          trend.push_back(rep.values);
          if (expect == "converge")
            hits += rep.final_ratio_within(pr.value("final_ratio_tol", 0.15));
          else
            hits += rep.growth() >= pr.value("growth_factor", 2.0);
        }
      }
      const bool pass = hits >= majority;
      checks_out["variation-probe"] = {{"pass", pass},
                                       {"hits", hits},
                                       {"seeds", seeds},
                                       {"majority", majority},
                                       {"expect", expect}};
      write_file_atomic(output_dir / "trend.json", trend.dump(2) + "\n");
      artifacts["trend"] = "trend.json";
      all_pass = all_pass && pass;
      timings["variation_probe"] = elapsed_ms(t0);
    }
  } catch (const std::exception& e) {
    report["error"] = e.what();
    report["pass"] = false;
    result.exit_code = 2;
    return result;
  }

  report["checks"] = checks_out;
  report["artifacts"] = artifacts;
  report["pass"] = all_pass;
  timings["total"] = elapsed_ms(t_start);
  report["run_info"] = {{"timestamp", detail::iso_timestamp()}, {"timings_ms", timings}};
  result.exit_code = all_pass ? 0 : 1;
  write_file_atomic(output_dir / "report.json", report.dump(2) + "\n");
  return result;
}

}  // namespace pvflow
