#include "patlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include <Eigen/Core>
#include <fftw3.h>

#include "patlab/carleman.hpp"
#include "patlab/field_io.hpp"
#include "patlab/forward_solver.hpp"
#include "patlab/geodesics.hpp"
#include "patlab/neumann.hpp"
#include "patlab/norms.hpp"

#ifndef PATLAB_VERSION
#define PATLAB_VERSION "0.0.0"
#endif

namespace patlab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

int n_theta_for(const ScenarioConfig& cfg) {
  return cfg.domain.N_theta ? *cfg.domain.N_theta : default_n_theta(cfg.domain.R_M, cfg.grid.h);
}

SpeedModel speed_model(const ScenarioConfig& cfg) {
  return SpeedModel(cfg.speed.background, cfg.speed.bumps, cfg.speed.ramp);
}

ScalarField gaussian_source(const Grid2D& grid, const SourceConfig& s, const CompactSupport& support) {
  const double two_w2 = 2.0 * s.width * s.width;
  return ScalarField::sample(grid, [&](Vec2 x) {
    if (!support.contains(x)) return 0.0;
    const Vec2 d = x - s.center;
    return s.amplitude * std::exp(-dot(d, d) / two_w2);
  });
}

ScalarField normalised_bump(const Grid2D& grid, Vec2 center, double radius) {
  ScalarField psi = ScalarField::sample(grid, [&](Vec2 x) { return bump_profile(x, center, radius); });
  const double m = psi.max_abs();
  if (!(m > 0.0)) throw PreconditionError("perturbation bump misses every grid node");
  return (1.0 / m) * psi;
}

/// Files written by one run; removed again when the run fails.
class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << text;
  }

  void write_json(const std::string& name, const json& doc) { write_text(name, doc.dump(2) + "\n"); }

  void write_pgm_field(const std::string& name, const ScalarField& field) {
    names_.push_back(name + ".json");
    write_pgm(field, path(name));
  }

  void remove_all() {
    std::error_code ec;
    for (const auto& n : names_) fs::remove(dir_ / n, ec);
    names_.clear();
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

std::string csv_row(std::initializer_list<double> values) {
  std::string line;
  for (double v : values) {
    if (!line.empty()) line += ',';
    line += format_number(v);
  }
  return line + "\n";
}

/// Rounds through the shortest decimal form so JSON reports carry the same
/// digits as the CSV files.
json num(double v) {
  if (!std::isfinite(v)) return format_number(v);
  return json::parse(format_number(v));
}

void gnuplot_script(Artifacts& art, const std::string& csv, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::string& plot, bool logscale = false) {
  std::string s;
  s += "set datafile separator ','\n";
  s += "set key autotitle columnhead\n";
  s += "set title '" + title + "'\n";
  s += "set xlabel '" + xlabel + "'\n";
  s += "set ylabel '" + ylabel + "'\n";
  if (logscale) s += "set logscale y\n";
  s += "set terminal pngcairo size 900,600\n";
  s += "set output '" + csv.substr(0, csv.rfind('.')) + ".png'\n";
  s += "plot " + plot + "\n";
  art.write_text(csv.substr(0, csv.rfind('.')) + ".gp", s);
}

json grid_json(const Grid2D& g) {
  return {{"nx", g.nx()}, {"ny", g.ny()}, {"h", num(g.h())}, {"origin", {num(g.origin().x), num(g.origin().y)}}};
}

struct Context {
  const ScenarioConfig& cfg;
  const RunOptions& opt;
  Artifacts& art;
  std::ostream& log;
  json summary;  // copied into the manifest
};

int run_forward(Context& cx) {
  const Scenario sc = build_scenario(cx.cfg);
  SolverOptions so;
  so.cfl_safety = cx.cfg.solver.cfl_safety;
  so.record_flux = true;
  so.snapshot_stride = cx.opt.snapshot_stride.value_or(cx.cfg.solver.snapshot_stride);
  if (so.snapshot_stride > 0) {
    so.snapshot_sink = [&](int level, const ScalarField& u) {
      char name[32];
      std::snprintf(name, sizeof name, "snapshot_%06d.pgm", level);
      cx.art.write_pgm_field(name, u);
    };
  }
  const SimulationRun run = propagate_free(sc.f, sc.c, sc.T, sc.mask, sc.support, so);
  const double residual = flux_identity_residual(run, sc.c, sc.mask);

  cx.art.write_pgm_field("source.pgm", sc.f);
  cx.art.write_pgm_field("final_u.pgm", run.final_state.u);
  write_trace_csv(run.trace, cx.art.path("trace.csv"));
  std::string energy = "t,energy,flux\n";
  for (std::size_t n = 0; n < run.energy_log.size(); ++n)
    energy += csv_row({n * run.dt, run.energy_log[n], run.flux_log[n]});
  cx.art.write_text("energy.csv", energy);
  if (cx.opt.emit_gnuplot)
    gnuplot_script(cx.art, "energy.csv", "Energy in M and boundary flux", "t", "value",
                   "'energy.csv' using 1:2 with lines, '' using 1:3 with lines");

  cx.summary = {{"grid", grid_json(sc.grid)},
                {"n_theta", sc.mask.n_theta()},
                {"T", num(sc.T)},
                {"dt", num(run.dt)},
                {"steps", run.steps},
                {"flux_identity_residual", num(residual)},
                {"trace_h1", num(trace_h1_norm(run.trace))},
                {"source_h1", num(h1_norm(sc.f, sc.mask))}};
  if (sc.max_exit_time > 0.0) cx.summary["max_exit_time"] = num(sc.max_exit_time);
  cx.art.write_json("forward.json", cx.summary);
  cx.log << "forward: " << run.steps << " steps, flux residual " << format_number(residual) << "\n";
  return kExitOk;
}

int run_reconstruct(Context& cx) {
  const Scenario sc = build_scenario(cx.cfg);
  SolverOptions so;
  so.cfl_safety = cx.cfg.solver.cfl_safety;
  TimeReversalOptions tr;
  tr.cfl_safety = cx.cfg.solver.cfl_safety;
  const NeumannOperator op(sc.c, sc.T, sc.mask, so, tr);
  const BoundaryTrace h = op.measure(sc.f);
  const Reconstruction rec = reconstruct(h, op, cx.cfg.reconstruction.tol, cx.cfg.reconstruction.m_max, &sc.f);
  const ReconstructionReport& r = rec.report;

  cx.art.write_pgm_field("source.pgm", sc.f);
  cx.art.write_pgm_field("reconstruction.pgm", rec.field);
  write_field_csv(rec.field, cx.art.path("reconstruction.csv"));
  std::string it = "m,iterate_norm,partial_sum_norm\n";
  for (std::size_t m = 0; m < r.iterate_norms.size(); ++m)
    it += std::to_string(m) + "," + format_number(r.iterate_norms[m]) + "," +
          format_number(r.partial_sum_norms[m]) + "\n";
  cx.art.write_text("iterates.csv", it);
  if (cx.opt.emit_gnuplot)
    gnuplot_script(cx.art, "iterates.csv", "Neumann series terms", "m", "H1 norm",
                   "'iterates.csv' using 1:2 with linespoints", true);

  cx.summary = {{"grid", grid_json(sc.grid)},
                {"T", num(sc.T)},
                {"m_used", r.m_used},
                {"stop_reason", to_string(r.stop_reason)},
                {"tail_bound", num(r.tail_bound)},
                {"rel_error_h1", num(r.rel_error_h1.value_or(std::nan("")))}};
  cx.art.write_json("reconstruction.json", cx.summary);
  cx.log << "reconstruct: m = " << r.m_used << " (" << to_string(r.stop_reason) << "), relative H1 error "
         << format_number(*r.rel_error_h1) << "\n";
  return r.stop_reason == StopReason::divergence ? kExitHypothesis : kExitOk;
}

int run_stability(Context& cx) {
  const Scenario sc = build_scenario(cx.cfg);
  if (!(cx.cfg.perturbation.radius > 0.0)) throw PreconditionError("perturbation.bump is not set");
  PerturbationSpec pert{normalised_bump(sc.grid, cx.cfg.perturbation.center, cx.cfg.perturbation.radius),
                        cx.cfg.perturbation.eps};
  StabilitySetup setup;
  setup.T = sc.T;
  setup.tol = cx.cfg.reconstruction.tol;
  setup.m_max = cx.cfg.reconstruction.m_max;
  setup.threads = cx.opt.threads;
  setup.cfl_safety = cx.cfg.solver.cfl_safety;
  const auto rows = stability_experiment(sc.f, sc.c, pert, sc.mask, sc.support, setup);
  write_stability_csv(rows, cx.art.path("stability.csv"));
  if (cx.opt.emit_gnuplot)
    gnuplot_script(cx.art, "stability.csv", "Reconstruction error against perturbation size", "eps", "error",
                   "'stability.csv' using 1:4 with linespoints");

  json rows_json = json::array();
  int invalid = 0;
  for (const auto& row : rows) {
    invalid += row.stop_reason.rfind("invalid", 0) == 0;
    rows_json.push_back({{"eps", num(row.eps)}, {"err_h1", num(row.err_h1)}, {"stop_reason", row.stop_reason}});
  }
  cx.summary = {{"grid", grid_json(sc.grid)}, {"T", num(sc.T)}, {"rows", rows_json}, {"invalid_rows", invalid}};

  if (!cx.cfg.perturbation.amplitudes.empty()) {
    const double eps = *std::max_element(cx.cfg.perturbation.eps.begin(), cx.cfg.perturbation.eps.end());
    const auto amp = amplitude_sweep(sc.f, sc.c, pert.psi, eps, cx.cfg.perturbation.amplitudes, sc.mask,
                                     sc.support, setup);
    write_amplitude_csv(amp, cx.art.path("amplitude.csv"));
    cx.summary["amplitude_eps"] = num(eps);
  }
  cx.art.write_json("stability.json", cx.summary);
  cx.log << "stability: " << rows.size() << " rows (" << invalid << " invalid)\n";
  return kExitOk;
}

int run_carleman(Context& cx) {
  const Grid2D grid = geometry_grid(cx.cfg);
  const auto [mask, support] = build_disk_domain(grid, cx.cfg.domain.R_M, cx.cfg.domain.R_K, n_theta_for(cx.cfg));
  const SpeedField c = SpeedField::from_model(grid, speed_model(cx.cfg));
  const ConvexWeight ell = ConvexWeight::quadratic(cx.cfg.weight_x0);

  json provenance = {{"grid", grid_json(grid)},
                     {"n_theta", mask.n_theta()},
                     {"convexity_safety", num(kConvexitySafety)},
                     {"friedrichs_inflation", num(1.05)},
                     {"weight_x0", {num(cx.cfg.weight_x0.x), num(cx.cfg.weight_x0.y)}}};
  try {
    const FriedrichsEstimate fe = friedrichs_estimate(c, mask);
    const CarlemanConstants k = compute_constants(ell, c, mask, fe.C_F);
    provenance["friedrichs"] = {{"lambda_min", num(fe.lambda_min)}, {"raw", num(fe.raw)},
                                {"iterations", fe.iterations}};
    const ExitTimeScan scan =
        max_exit_time(c, mask, support, cx.cfg.geodesics.n_points, cx.cfg.geodesics.n_dirs,
                      RayOptions{cx.cfg.geodesics.dt, 0.0, false});
    cx.summary = {{"status", "ok"},
                  {"constants",
                   {{"rho", num(k.rho)},
                    {"r", num(k.r)},
                    {"C1", num(k.C1)},
                    {"C2", num(k.C2)},
                    {"C3", num(k.C3)},
                    {"B_ell", num(k.B_ell)},
                    {"beta_ell", num(k.beta_ell)},
                    {"C_F", num(k.C_F)},
                    {"tau", num(k.tau)},
                    {"T_min", num(k.T_min)}}},
                  {"observability_constant", "depends on (C2, C3, beta_ell, B_ell, tau, T)"},
                  {"practical_time", num(cx.cfg.time.factor * scan.max_exit_time)},
                  {"max_exit_time", num(scan.max_exit_time)},
                  {"trapped", scan.trapped},
                  {"provenance", provenance}};
    cx.art.write_json("carleman.json", cx.summary);
    cx.log << "carleman: tau " << format_number(k.tau) << ", T_min " << format_number(k.T_min) << "\n";
    return kExitOk;
  } catch (const HypothesisError& e) {
    cx.summary = {{"status", "hypothesis violated"}, {"reason", e.what()}, {"provenance", provenance}};
    cx.art.write_json("carleman.json", cx.summary);
    cx.log << "carleman: " << e.what() << "\n";
    return kExitHypothesis;
  }
}

int run_geodesics(Context& cx) {
  const Grid2D grid = geometry_grid(cx.cfg);
  const auto [mask, support] = build_disk_domain(grid, cx.cfg.domain.R_M, cx.cfg.domain.R_K, n_theta_for(cx.cfg));
  const SpeedField c = SpeedField::from_model(grid, speed_model(cx.cfg));
  const RayOptions ro{cx.cfg.geodesics.dt, 0.0, false};
  const TangencyScan scan =
      tangency_scan(support, c, mask, cx.cfg.geodesics.n_points, cx.cfg.geodesics.n_dirs, ro);
  const ConvexityReport conv = boundary_convexity_check(c, mask);

  std::string csv = "x0,y0,angle,exit_time,exit_angle,tangency_flag,trapped\n";
  double max_exit = 0.0;
  bool trapped = false;
  for (const auto& r : scan.records) {
    csv += csv_row({r.x0.x, r.x0.y, r.angle, r.exit_time, r.exit_angle});
    csv.back() = ',';
    csv += std::string(r.tangential ? "1" : "0") + "," + (r.trapped ? "1" : "0") + "\n";
    trapped = trapped || r.trapped;
    if (!r.trapped) max_exit = std::max(max_exit, r.exit_time);
  }
  cx.art.write_text("rays.csv", csv);
  if (cx.opt.emit_gnuplot)
    gnuplot_script(cx.art, "rays.csv", "Exit time against launch angle", "angle", "exit time",
                   "'rays.csv' using 3:4 with points pt 7 ps 0.3");
  cx.summary = {{"max_exit_time", num(max_exit)},
                {"trapped", trapped},
                {"n_rays", scan.records.size()},
                {"n_tangential", scan.flagged.size()},
                {"min_boundary_curvature", num(conv.min_curvature)}};
  cx.art.write_json("geodesics.json", cx.summary);
  cx.log << "geodesics: max exit time " << format_number(max_exit) << (trapped ? ", trapped rays" : "") << "\n";
  return trapped ? kExitHypothesis : kExitOk;
}

int run_convexity(Context& cx) {
  const Grid2D grid = geometry_grid(cx.cfg);
  const auto [mask, support] = build_disk_domain(grid, cx.cfg.domain.R_M, cx.cfg.domain.R_K, n_theta_for(cx.cfg));
  (void)support;
  const SpeedField c = SpeedField::from_model(grid, speed_model(cx.cfg));
  const ConvexityReport rep = boundary_convexity_check(c, mask);

  std::string csv = "theta,curvature\n";
  for (std::size_t k = 0; k < rep.curvature.size(); ++k)
    csv += csv_row({mask.samples()[k].theta, rep.curvature[k]});
  cx.art.write_text("curvature.csv", csv);
  if (cx.opt.emit_gnuplot)
    gnuplot_script(cx.art, "curvature.csv", "Geodesic curvature of the boundary", "theta", "curvature",
                   "'curvature.csv' using 1:2 with lines");
  cx.summary = {{"min_curvature", num(rep.min_curvature)},
                {"formula_convex", rep.formula_convex},
                {"probe_convex", rep.probe_convex},
                {"n_disagree", rep.n_disagree},
                {"n_undecided", rep.n_undecided},
                {"consistent", rep.consistent()}};
  cx.art.write_json("convexity.json", cx.summary);
  if (!rep.consistent()) cx.log << "convexity: formula and probe disagree at " << rep.n_disagree << " samples\n";
  cx.log << "convexity: min curvature " << format_number(rep.min_curvature)
         << (rep.formula_convex ? " (strictly convex)" : " (not convex)") << "\n";
  return rep.formula_convex && rep.probe_convex && rep.consistent() ? kExitOk : kExitHypothesis;
}

int run_selftest_cmd(Context& cx) {
  const auto checks = run_selftest(cx.cfg);
  json list = json::array();
  int failed = 0;
  for (const auto& ch : checks) {
    failed += !ch.passed;
    list.push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
    cx.log << (ch.passed ? "ok   " : "FAIL ") << ch.name << "  " << ch.detail << "\n";
  }
  cx.summary = {{"checks", list}, {"failed", failed}};
  cx.art.write_json("selftest.json", cx.summary);
  if (failed) throw Error("selftest: " + std::to_string(failed) + " check(s) failed");
  return kExitOk;
}

json versions() {
  return {{"patlab", PATLAB_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

}  // namespace

Grid2D geometry_grid(const ScenarioConfig& config) {
  const double h = config.grid.h;
  const double R = config.domain.R_M;
  return Grid2D::centered(R + std::max(8.0 * h, 0.1 * R), h);
}

Scenario build_scenario(const ScenarioConfig& cfg) {
  const double h = cfg.grid.h;
  const double R_M = cfg.domain.R_M;
  const int n_theta = n_theta_for(cfg);
  const SpeedModel model = speed_model(cfg);

  double T = 0.0;
  double max_exit = 0.0;
  if (cfg.time.T) {
    T = *cfg.time.T;
  } else {
    const Grid2D g = geometry_grid(cfg);
    const auto [mask, support] = build_disk_domain(g, R_M, cfg.domain.R_K, n_theta);
    const SpeedField c = SpeedField::from_model(g, model);
    const ExitTimeScan scan = max_exit_time(c, mask, support, cfg.geodesics.n_points, cfg.geodesics.n_dirs,
                                            RayOptions{cfg.geodesics.dt, 0.0, false});
    if (scan.trapped) throw HypothesisError("time.T = auto: trapped rays, no finite observation time");
    max_exit = scan.max_exit_time;
    T = cfg.time.factor * max_exit;
  }

  auto make_grid = [&](double c_max) {
    if (cfg.grid.nx)
      return Grid2D(*cfg.grid.nx, *cfg.grid.ny, h, {-0.5 * *cfg.grid.nx * h, -0.5 * *cfg.grid.ny * h});
    return Grid2D::centered(R_M + required_padding(c_max, T, h) + 4.0 * h, h);
  };
  // The padding depends on c_max over the box, which depends on the box.
  double c_max = SpeedField::from_model(geometry_grid(cfg), model).c_max();
  Grid2D grid = make_grid(c_max);
  SpeedField c = SpeedField::from_model(grid, model);
  if (c.c_max() > c_max) {
    grid = make_grid(c.c_max());
    c = SpeedField::from_model(grid, model);
  }
  auto [mask, support] = build_disk_domain(grid, R_M, cfg.domain.R_K, n_theta);
  ScalarField f = gaussian_source(grid, cfg.source, support);
  SpeedField c0 = SpeedField::constant(grid, cfg.speed.background);
  return Scenario{cfg, grid, std::move(mask), support, std::move(c), std::move(c0), std::move(f), T, max_exit};
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"forward",   "reconstruct", "stability", "carleman",
                                              "geodesics", "convexity",   "selftest"};
  return names;
}

int run_subcommand(const std::string& name, const RunOptions& options, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const auto& names = subcommand_names();
  json manifest = {{"subcommand", name}, {"config_path", options.config.string()}, {"versions", versions()}};

  std::error_code ec;
  fs::create_directories(options.out, ec);
  if (ec || !fs::is_directory(options.out)) {
    log << "error: cannot create output directory " << options.out.string() << "\n";
    return kExitError;
  }
  Artifacts art(options.out);
  int code = kExitError;
  json summary;
  try {
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw PreconditionError("unknown subcommand '" + name + "'");
    if (options.threads < 1) throw PreconditionError("--threads must be at least 1");
    if (options.snapshot_stride && *options.snapshot_stride < 0)
      throw PreconditionError("--snapshot-stride must be non-negative");
    const ScenarioConfig cfg = load_config(options.config);
    manifest["config_hash"] = hash_hex(config_hash(cfg));
    manifest["config"] = to_json(cfg);

    Context cx{cfg, options, art, log, json::object()};
    if (name == "forward") code = run_forward(cx);
    else if (name == "reconstruct") code = run_reconstruct(cx);
    else if (name == "stability") code = run_stability(cx);
    else if (name == "carleman") code = run_carleman(cx);
    else if (name == "geodesics") code = run_geodesics(cx);
    else if (name == "convexity") code = run_convexity(cx);
    else code = run_selftest_cmd(cx);
    summary = cx.summary;
    manifest["status"] = code == kExitOk ? "ok" : "hypothesis violated";
  } catch (const HypothesisError& e) {
    code = kExitHypothesis;
    manifest["status"] = "hypothesis violated";
    manifest["message"] = e.what();
    log << "hypothesis violated: " << e.what() << "\n";
  } catch (const ConfigError& e) {
    art.remove_all();
    code = kExitError;
    manifest["status"] = "error";
    manifest["message"] = e.what();
    manifest["config_errors"] = e.problems();
    log << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    art.remove_all();
    code = kExitError;
    manifest["status"] = "error";
    manifest["message"] = e.what();
    log << "error: " << e.what() << "\n";
  }

  manifest["exit_code"] = code;
  manifest["artifacts"] = art.names();
  if (!summary.is_null()) manifest["summary"] = summary;
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream out(options.out / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
  if (!out) {
    log << "error: cannot write manifest\n";
    return kExitError;
  }
  return code;
}

}  // namespace patlab
