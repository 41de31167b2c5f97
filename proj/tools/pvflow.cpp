// pvflow command-line front end: drivers, p-variation, Young integration,
// solvers, flow checks, variation probes, and config-driven experiments.

#include "pvflow/pvflow.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace pvflow;

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
  std::map<std::string, double> params;
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--field-param", "expected key=value, got '" + kv + "'");
    params[kv.substr(0, eq)] = parse_double(kv.substr(eq + 1));
  }
  return params;
}

std::pair<double, double> parse_interval(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos)
    throw CLI::ValidationError("--interval", "expected s,t");
  return {parse_double(s.substr(0, comma)), parse_double(s.substr(comma + 1))};
}

Vector parse_vector(const std::string& s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(parse_double(cell));
  return Eigen::Map<const Vector>(vals.data(), vals.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathwise differential equations driven by finite p-variation paths"};
  app.require_subcommand(1);

  // ---- sample -------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "generate a driver path");
  std::string sample_driver = "fbm", sample_out = "path.csv", atoms_arg;
  double hurst = 0.7, alpha = 1.3, eps = 1e-3, horizon = 1.0, scale = 1.0;
  double amplitude = 0.1, cycles = 1.0;
  int grid = 1025;
  std::uint64_t seed = 1;
  bool compensate = false;
  sample->add_option("--driver", sample_driver, "fbm | stable | cp | sine")
      ->default_val("fbm");
  sample->add_option("--hurst", hurst, "fBm Hurst index in (1/2, 1)");
  sample->add_option("--alpha", alpha, "stable index in (0, 2)");
  sample->add_option("--scale", scale, "stable intensity scale");
  sample->add_option("--eps", eps, "small-jump truncation");
  sample->add_flag("--compensate", compensate, "compensate jumps in (eps, 1]");
  sample->add_option("--atoms", atoms_arg, "compound Poisson atoms size:rate[,...]");
  sample->add_option("--amplitude", amplitude, "sine amplitude");
  sample->add_option("--cycles", cycles, "sine cycles over the horizon");
  sample->add_option("--grid", grid, "sample count");
  sample->add_option("--horizon", horizon, "time horizon T");
  sample->add_option("--seed", seed, "RNG seed");
  sample->add_option("-o,--output", sample_out, "output CSV (or .json)");

  // ---- pvar ---------------------------------------------------------------
  auto* pvar = app.add_subcommand("pvar", "exact p-variation of a path");
  std::string pvar_path, pvar_interval;
  double pvar_p = 1.5;
  pvar->add_option("--path", pvar_path, "path CSV/JSON")->required();
  pvar->add_option("--p", pvar_p, "variation exponent >= 1")->required();
  pvar->add_option("--interval", pvar_interval, "s,t (defaults to full range)");

  // ---- young-integrate ------------------------------------------------------
  auto* young = app.add_subcommand("young-integrate",
                                   "left-point Young integral of f dg");
  std::string young_f, young_g, young_interval;
  double young_p = 1.5, young_q = 1.5;
  int young_rows = 0, young_cols = 0;
  young->add_option("--integrand", young_f, "integrand path CSV (d*n columns)")
      ->required();
  young->add_option("--integrator", young_g, "integrator path CSV")->required();
  young->add_option("--p", young_p, "integrator variation exponent")->required();
  young->add_option("--q", young_q, "integrand variation exponent")->required();
  young->add_option("--rows", young_rows, "integrand rows d (default: columns of f)");
  young->add_option("--cols", young_cols, "integrand cols n (default: 1)");
  young->add_option("--interval", young_interval, "s,t");

  // ---- solve ----------------------------------------------------------------
  auto* solve_cmd = app.add_subcommand("solve", "solve dY = f(Y) dX (continuous driver)");
  std::string solve_driver, solve_field = "linear", solve_interval, solve_x0 = "1";
  std::vector<std::string> solve_params;
  std::string solve_out = "trajectory.csv";
  double solve_p = 1.5;
  bool with_jacobian = false;
  solve_cmd->add_option("--driver", solve_driver, "driver path CSV/JSON")->required();
  solve_cmd->add_option("--field", solve_field, "field name (zero|constant|linear|sine|rotation)");
  solve_cmd->add_option("--field-param", solve_params, "field parameter key=value");
  solve_cmd->add_option("--x0", solve_x0, "initial point, comma-separated");
  solve_cmd->add_option("--p", solve_p, "driver variation exponent");
  solve_cmd->add_option("--interval", solve_interval, "s,t (defaults to full range)");
  solve_cmd->add_flag("--jacobian", with_jacobian, "also solve the Jacobian component");
  solve_cmd->add_option("-o,--output", solve_out, "trajectory CSV");

  // ---- solve-cadlag ----------------------------------------------------------
  auto* cad = app.add_subcommand("solve-cadlag", "solve against a cadlag driver");
  std::string cad_driver, cad_field = "linear", cad_interval, cad_x0 = "1";
  std::vector<std::string> cad_params;
  std::string cad_out = "trajectory.csv", cad_rule = "geometric", cad_jumplog;
  double cad_p = 1.5, cad_delta = 1.0;
  cad->add_option("--driver", cad_driver, "driver path CSV/JSON")->required();
  cad->add_option("--field", cad_field, "field name");
  cad->add_option("--field-param", cad_params, "field parameter key=value");
  cad->add_option("--x0", cad_x0, "initial point");
  cad->add_option("--p", cad_p, "driver variation exponent");
  cad->add_option("--delta", cad_delta, "fictitious-time scale");
  cad->add_option("--jump-rule", cad_rule, "geometric | forward")->default_val("geometric");
  cad->add_option("--interval", cad_interval, "s,t");
  cad->add_option("--jump-log", cad_jumplog, "write per-jump log JSON here");
  cad->add_option("-o,--output", cad_out, "trajectory CSV");

  // ---- flow-check -------------------------------------------------------------
  auto* fc = app.add_subcommand("flow-check", "diffeomorphic-flow property checks");
  std::string fc_driver, fc_field = "sine", fc_times, fc_box, fc_out = "flow_report.json";
  std::vector<std::string> fc_params, fc_checks = {"composition", "jacobian", "inverse"};
  double fc_p = 1.5, fc_delta = 1.0;
  int fc_per_dim = 3;
  fc->add_option("--driver", fc_driver, "driver path CSV/JSON")->required();
  fc->add_option("--field", fc_field, "field name");
  fc->add_option("--field-param", fc_params, "field parameter key=value");
  fc->add_option("--p", fc_p, "driver variation exponent");
  fc->add_option("--delta", fc_delta, "fictitious-time scale (cadlag)");
  fc->add_option("--times", fc_times, "s,t,u for the composition law")->required();
  fc->add_option("--anchors-box", fc_box, "lo1,..:hi1,.. anchor box");
  fc->add_option("--anchors-per-dim", fc_per_dim, "lattice points per dimension");
  fc->add_option("--checks", fc_checks, "composition jacobian inverse continuity");
  fc->add_option("-o,--output", fc_out, "report JSON");

  // ---- probe -------------------------------------------------------------------
  auto* probe = app.add_subcommand("probe", "variation trend probes");
  std::string probe_kind = "fbm", probe_out = "trend.csv", probe_eps;
  double probe_p = 1.6, probe_hurst = 0.7, probe_alpha = 1.2, probe_horizon = 1.0;
  int probe_grid = 4097, probe_refinements = 9, probe_seeds = 1;
  std::uint64_t probe_seed = 1;
  probe->add_option("--kind", probe_kind, "fbm | levy")->default_val("fbm");
  probe->add_option("--p", probe_p, "variation exponent")->required();
  probe->add_option("--hurst", probe_hurst, "fBm Hurst index");
  probe->add_option("--grid", probe_grid, "fBm finest grid (2^k + 1)");
  probe->add_option("--refinements", probe_refinements, "number of dyadic refinements");
  probe->add_option("--alpha", probe_alpha, "stable index");
  probe->add_option("--eps-levels", probe_eps, "decreasing eps list e1,e2,...");
  probe->add_option("--horizon", probe_horizon, "time horizon");
  probe->add_option("--seeds", probe_seeds, "number of seeded runs");
  probe->add_option("--seed", probe_seed, "base seed");
  probe->add_option("-o,--output", probe_out, "trend CSV");

  // ---- run ---------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "config-driven experiment");
  std::string run_config, run_outdir = "out";
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--output-dir", run_outdir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) {
      SampledPath path;
      if (sample_driver == "fbm") {
        path = sample_fbm({hurst, grid, horizon, seed});
      } else if (sample_driver == "sine") {
        path = sine_path(amplitude, cycles, grid, horizon);
      } else {
        LevySpec spec;
        spec.truncation = eps;
        spec.compensate = compensate;
        spec.seed = seed;
        if (sample_driver == "stable") spec.stable = StableMeasure{alpha, scale};
        for (const auto& kv : [&] {
               std::vector<std::string> out;
               std::stringstream ss(atoms_arg);
               std::string cell;
               while (std::getline(ss, cell, ',')) out.push_back(cell);
               return out;
             }()) {
          const auto colon = kv.find(':');
          spec.atoms.push_back({parse_double(kv.substr(0, colon)),
                                parse_double(kv.substr(colon + 1))});
        }
        if (sample_driver == "cp" && spec.atoms.empty())
          spec.atoms.push_back({1.0, 2.0});
        path = sample_levy(spec, horizon);
      }
      save_path(sample_out, path);
      std::cout << "wrote " << sample_out << " (" << path.size() << " samples, "
                << path.jumps.size() << " jumps)\n";
    } else if (*pvar) {
      const SampledPath path = load_path(pvar_path);
      double s = path.start_time(), t = path.end_time();
      if (!pvar_interval.empty()) std::tie(s, t) = parse_interval(pvar_interval);
      const VariationNorm norm = p_variation_exact(path, pvar_p, s, t);
      std::cout << format_double(norm.value) << "\n";
    } else if (*young) {
      const SampledPath g = load_path(young_g);
      const SampledPath fraw = load_path(young_f);
      const int rows = young_rows > 0 ? young_rows : dim(fraw);
      const int cols = young_cols > 0 ? young_cols : 1;
      if (rows * cols != dim(fraw))
        throw std::invalid_argument("integrand columns do not match rows*cols");
      MatrixPath f;
      f.kind = fraw.kind;
      f.times = fraw.times;
      for (const Vector& v : fraw.values)
        f.values.push_back(Eigen::Map<const Matrix>(v.data(), rows, cols));
      for (const auto& [i, left] : fraw.jumps)
        f.jumps.emplace(i, Eigen::Map<const Matrix>(left.data(), rows, cols));
      double s = std::max(f.times.front(), g.start_time());
      double t = std::min(f.times.back(), g.end_time());
      if (!young_interval.empty()) std::tie(s, t) = parse_interval(young_interval);
      const Vector value = young_integral(f, g, s, t, young_p, young_q);
      for (int i = 0; i < value.size(); ++i)
        std::cout << (i ? "," : "") << format_double(value[i]);
      std::cout << "\n";
      std::cout << "a-priori constant (1 + zeta(1/p + 1/q)) = "
                << format_double(1.0 + riemann_zeta(1.0 / young_p + 1.0 / young_q))
                << "\n";
    } else if (*solve_cmd) {
      const SampledPath driver = load_path(solve_driver);
      const LipschitzField field = make_field(solve_field, parse_params(solve_params));
      double s = driver.start_time(), t = driver.end_time();
      if (!solve_interval.empty()) std::tie(s, t) = parse_interval(solve_interval);
      SolverConfig cfg;
      cfg.p = solve_p;
      const Vector x0 = parse_vector(solve_x0);
      const Trajectory traj = with_jacobian
                                  ? solve_with_jacobian(driver, field, x0, s, t, cfg)
                                  : solve(driver, field, x0, s, t, cfg);
      save_trajectory_csv(solve_out, traj);
      std::cout << "wrote " << solve_out << " (" << traj.path.size() << " samples, "
                << traj.iterations_used << " Picard sweeps, " << traj.windows_used
                << " windows)\n";
    } else if (*cad) {
      const SampledPath driver = load_path(cad_driver);
      const LipschitzField field = make_field(cad_field, parse_params(cad_params));
      double s = driver.start_time(), t = driver.end_time();
      if (!cad_interval.empty()) std::tie(s, t) = parse_interval(cad_interval);
      SolverConfig cfg;
      cfg.p = cad_p;
      const Vector x0 = parse_vector(cad_x0);
      if (cad_rule == "forward") {
        const Trajectory traj = solve_forward_jump(driver, field, x0, s, t, cfg);
        save_trajectory_csv(cad_out, traj);
        std::cout << "wrote " << cad_out << "\n";
      } else {
        const GeometricTrajectory geo =
            solve_geometric(driver, field, x0, s, t, cad_p, cad_delta, cfg);
        save_trajectory_csv(cad_out, geo.trajectory);
        if (!cad_jumplog.empty()) {
          nlohmann::json log = nlohmann::json::array();
          for (const auto& e : geo.jump_log) {
            auto vec = [](const Vector& v) {
              return std::vector<double>(v.data(), v.data() + v.size());
            };
            log.push_back({{"time", e.time},
                           {"start", vec(e.start)},
                           {"jump", vec(e.jump)},
                           {"end", vec(e.end)}});
          }
          write_file_atomic(cad_jumplog, log.dump(2) + "\n");
        }
        std::cout << "wrote " << cad_out << " (" << geo.jump_log.size() << " jumps)\n";
      }
    } else if (*fc) {
      const SampledPath driver = load_path(fc_driver);
      const LipschitzField field = make_field(fc_field, parse_params(fc_params));
      std::vector<double> times3;
      {
        std::stringstream ss(fc_times);
        std::string cell;
        while (std::getline(ss, cell, ',')) times3.push_back(parse_double(cell));
      }
      if (times3.size() != 3) throw std::invalid_argument("--times needs s,t,u");
      Box box = field.box() ? *field.box() : Box::cube(field.dim_state(), 1.0);
      if (!fc_box.empty()) {
        const auto colon = fc_box.find(':');
        box.lo = parse_vector(fc_box.substr(0, colon));
        box.hi = parse_vector(fc_box.substr(colon + 1));
      }
      SolverConfig cfg;
      cfg.p = fc_p;
      const std::vector<Vector> anchors = anchor_lattice(box, fc_per_dim);
      nlohmann::json report;
      auto emit = [&report](const CheckReport& rep) {
        report[rep.check] = {{"pass", rep.pass},
                             {"max_discrepancy", rep.max_discrepancy},
                             {"tol", rep.tol}};
      };
      bool all = true;
      if (driver.kind == PathKind::Cadlag) {
        const GeometricFlowReport rep =
            geometric_flow_check(driver, field, anchors, times3[0], times3[1], times3[2],
                                 fc_p, fc_delta, cfg);
        emit(rep.composition);
        emit(rep.jacobian);
        emit(rep.inverse);
        report["jacobian"]["min_abs_det"] = rep.min_abs_det;
        all = rep.pass();
      } else {
        for (const std::string& name : fc_checks) {
          if (name == "composition") {
            const CheckReport rep = run_composition_check(
                driver, field, anchors, times3[0], times3[1], times3[2], cfg, 1e-6);
            emit(rep);
            all = all && rep.pass;
          } else if (name == "jacobian") {
            const FlowMap flow =
                make_flow(driver, field, anchors, times3[0], times3[2], cfg, true);
            const CheckReport rep = jacobian_flow_check(driver, field, flow, 1e-5, 1e-3, cfg);
            emit(rep);
            report["jacobian"]["min_abs_det"] = min_abs_jacobian_det(flow);
            all = all && rep.pass;
          } else if (name == "inverse") {
            const CheckReport rep = inverse_roundtrip_check(
                driver, field, times3[0], times3[2], anchors, cfg, 1e-5);
            emit(rep);
            all = all && rep.pass;
          } else if (name == "continuity") {
            const ContinuityReport rep = continuity_in_space_check(
                driver, field, times3[0], times3[2], box, fc_per_dim, 1.0, cfg);
            report["continuity"] = {{"pass", rep.pass},
                                    {"modulus", rep.modulus},
                                    {"refined_modulus", rep.refined_modulus}};
            all = all && rep.pass;
          }
        }
      }
      report["pass"] = all;
      write_file_atomic(fc_out, report.dump(2) + "\n");
      std::cout << report.dump(2) << "\n";
      return all ? 0 : 1;
    } else if (*probe) {
      std::ostringstream os;
      os << "seed,level,value\n";
      for (int k = 0; k < probe_seeds; ++k) {
        ProbeReport rep;
        if (probe_kind == "fbm") {
          rep = fbm_variation_probe({probe_hurst, probe_grid, probe_horizon,
                                     probe_seed + static_cast<std::uint64_t>(k)},
                                    probe_p, probe_refinements);
        } else {
          LevySpec spec;
          spec.stable = StableMeasure{probe_alpha, 1.0};
          spec.seed = probe_seed + static_cast<std::uint64_t>(k);
          std::vector<double> eps_levels;
          std::stringstream ss(probe_eps);
          std::string cell;
          while (std::getline(ss, cell, ',')) eps_levels.push_back(parse_double(cell));
          if (eps_levels.empty())
            throw std::invalid_argument("--eps-levels required for levy probes");
          spec.truncation = eps_levels.back();
          rep = levy_variation_probe(spec, probe_p, eps_levels, probe_horizon);
        }
        for (std::size_t i = 0; i < rep.values.size(); ++i)
          os << probe_seed + static_cast<std::uint64_t>(k) << ','
             << format_double(rep.levels[i]) << ',' << format_double(rep.values[i])
             << '\n';
      }
      write_file_atomic(probe_out, os.str());
      std::cout << "wrote " << probe_out << "\n";
    } else if (*run) {
      const nlohmann::json config = nlohmann::json::parse(read_file(run_config));
      const ExperimentResult result = run_experiment(config, run_outdir);
      if (result.report.contains("error"))
        std::cerr << "error: " << result.report["error"].get<std::string>() << "\n";
      else
        std::cout << result.report.dump(2) << "\n";
      return result.exit_code;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
