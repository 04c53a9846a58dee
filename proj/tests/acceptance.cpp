// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Every tolerance is a named constant next to its check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "patlab/carleman.hpp"
#include "patlab/forward_solver.hpp"
#include "patlab/geodesics.hpp"
#include "patlab/neumann.hpp"
#include "patlab/norms.hpp"
#include "patlab/time_reversal.hpp"

using namespace patlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Setup {
  Grid2D grid;
  DomainMask mask;
  CompactSupport support;
};

// Unit disk M, K of radius R_K, box padded for waves up to c_max over [0, T].
Setup wave_setup(double h, double T, double c_max, double R_K = 0.8) {
  const Grid2D g = Grid2D::centered(1.0 + required_padding(c_max, T, h) + 4 * h, h);
  auto [m, s] = build_disk_domain(g, 1.0, R_K, default_n_theta(1.0, h));
  return {g, std::move(m), s};
}

// Unit disk in a small box, for work that does not propagate waves.
Setup static_setup(double h, double R_K = 0.8, double margin_cells = 10) {
  const Grid2D g = Grid2D::centered(1.0 + margin_cells * h, h);
  auto [m, s] = build_disk_domain(g, 1.0, R_K, default_n_theta(1.0, h));
  return {g, std::move(m), s};
}

ScalarField gaussian(const Setup& s, Vec2 c, double sigma) {
  return ScalarField::sample(s.grid, [&](Vec2 x) {
    const Vec2 d = x - c;
    return s.support.contains(x) ? std::exp(-dot(d, d) / (2 * sigma * sigma)) : 0.0;
  });
}

// 1. Energy-flux identity.
Outcome energy_flux() {
  constexpr double kMaxResidual = 1e-2;
  constexpr double kMinRatio = 3.0;
  const double T = 1.5;
  std::vector<double> res;
  for (int n : {128, 256}) {
    const double h = 2.0 / n;
    const SpeedModel model(1.0, {{{0.2, 0.1}, 0.4, 0.05}});
    const Setup s = wave_setup(h, T, 1.05);
    const SpeedField c = SpeedField::from_model(s.grid, model);
    SolverOptions opt;
    opt.record_flux = true;
    const SimulationRun run = propagate_free(gaussian(s, {0.1, 0.0}, 0.1), c, T, s.mask, s.support, opt);
    res.push_back(flux_identity_residual(run, c, s.mask));
  }
  const double ratio = res[0] / res[1];
  return {res[1] <= kMaxResidual && ratio >= kMinRatio,
          fmt("residual 128^2 %.3e, 256^2 %.3e (<= %.0e), reduction %.2f (>= %.0f)", res[0], res[1], kMaxResidual,
              ratio, kMinRatio)};
}

// 2. Harmonic extension of cos(theta) and cos(3 theta).
Outcome harmonic() {
  constexpr double kMaxError = 5e-3;
  constexpr double kMinOrder = 1.5, kMaxOrder = 2.2;
  bool ok = true;
  std::string detail;
  for (int m : {1, 3}) {
    std::vector<double> err;
    for (int n : {32, 64, 128}) {
      const Setup s = static_setup(1.0 / n, 0.5);
      std::vector<double> data;
      for (const auto& b : s.mask.samples()) data.push_back(std::cos(m * b.theta));
      const ScalarField u = harmonic_extension(data, s.mask);
      double e = 0.0;
      for (std::size_t k : s.mask.interior_nodes()) {
        const Vec2 p = s.grid.node(k);
        const double exact = m == 1 ? p.x : p.x * p.x * p.x - 3 * p.x * p.y * p.y;
        e = std::max(e, std::abs(u[k] - exact));
      }
      err.push_back(e);
    }
    const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
    ok = ok && err[2] <= kMaxError && o1 >= kMinOrder && o1 <= kMaxOrder && o2 >= kMinOrder && o2 <= kMaxOrder;
    detail += fmt("cos %d theta: err(1/128) %.2e, orders %.2f %.2f; ", m, err[2], o1, o2);
  }
  detail += fmt("limits err <= %.0e, order in [%.1f, %.1f]", kMaxError, kMinOrder, kMaxOrder);
  return {ok, detail};
}

// 3. Self-reconstruction with the true speed.
Outcome self_reconstruction() {
  constexpr double kMaxRatio = 0.9;
  constexpr double kMaxRelError = 0.1;
  constexpr int kTerms = 10;
  const double T = 4.0;
  std::vector<double> rel;
  double worst_q = 0.0;
  int m_used = 0;
  for (double h : {0.02, 0.01}) {
    const Setup s = wave_setup(h, T, 1.0);
    const SpeedField c = SpeedField::constant(s.grid, 1.0);
    const ScalarField f = gaussian(s, {0.0, 0.0}, 0.1);
    const NeumannOperator op(c, T, s.mask);
    const Reconstruction r = reconstruct(op.measure(f), op, 1e-3, kTerms, &f);
    rel.push_back(*r.report.rel_error_h1);
    if (h == 0.01) {
      const auto& n = r.report.iterate_norms;
      for (std::size_t m = 1; m < n.size(); ++m) worst_q = std::max(worst_q, n[m] / n[m - 1]);
      m_used = r.report.m_used;
    }
  }
  return {worst_q < kMaxRatio && rel[1] <= kMaxRelError && rel[1] < rel[0],
          fmt("200^2: max q %.3f (< %.1f) over %d terms, rel H1 error %.2e (<= %.1f); 100^2 error %.2e", worst_q,
              kMaxRatio, m_used, rel[1], kMaxRelError, rel[0])};
}

// 4. Error against the size of the speed perturbation.
Outcome stability_scaling() {
  constexpr double kMinRatio = 1.4, kMaxRatio = 2.6;
  const double T = 4.0;
  const Setup s = wave_setup(0.01, T, 1.0 + kMaxPerturbation);
  const SpeedField c0 = SpeedField::constant(s.grid, 1.0);
  const ScalarField f = gaussian(s, {0.0, 0.0}, 0.1);
  PerturbationSpec pert{ScalarField::sample(s.grid, [](Vec2 x) { return bump_profile(x, {0.1, 0.05}, 0.5); }),
                        {0.0, 0.005, 0.01, 0.02}};
  pert.psi *= 1.0 / pert.psi.max_abs();
  StabilitySetup setup;
  setup.T = T;
  setup.threads = 4;
  const auto rows = stability_experiment(f, c0, pert, s.mask, s.support, setup);
  const double e0 = rows[0].err_h1;
  const bool increasing = rows[1].err_h1 > e0 && rows[2].err_h1 > rows[1].err_h1 && rows[3].err_h1 > rows[2].err_h1;
  const double r1 = (rows[2].err_h1 - e0) / (rows[1].err_h1 - e0);
  const double r2 = (rows[3].err_h1 - e0) / (rows[2].err_h1 - e0);
  const bool ok = increasing && r1 >= kMinRatio && r1 <= kMaxRatio && r2 >= kMinRatio && r2 <= kMaxRatio;
  return {ok, fmt("e = %.3e %.3e %.3e %.3e; (e(2eps) - e(0)) / (e(eps) - e(0)) = %.3f, %.3f in [%.1f, %.1f]", e0,
                  rows[1].err_h1, rows[2].err_h1, rows[3].err_h1, r1, r2, kMinRatio, kMaxRatio)};
}

// 5. Difference of two free solves against a single source-driven solve.
Outcome two_routes() {
  constexpr double kMaxRel = 1e-2;
  const double T = 2.0;
  const double h = 1.0 / 64;
  const Setup s = wave_setup(h, T, 1.05);
  const SpeedField c = SpeedField::from_model(s.grid, SpeedModel(1.0, {{{0.1, 0.0}, 0.4, 0.05}}));
  const SpeedField c0 = SpeedField::constant(s.grid, 1.0);
  const ScalarField f = gaussian(s, {0.0, 0.1}, 0.1);
  SolverOptions opt;
  opt.max_speed = c.c_max();

  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < s.grid.size(); ++k)
    if (c[k] != c0[k]) nodes.push_back(k);
  std::vector<double> F;
  SolverOptions rec = opt;
  rec.observer = [&](int, const ScalarField& u) {
    for (std::size_t k : nodes) {
      const int i = s.grid.col(k), j = s.grid.row(k);
      const double lap = (u(i + 1, j) + u(i - 1, j) + u(i, j + 1) + u(i, j - 1) - 4 * u(i, j)) / (h * h);
      F.push_back((c[k] * c[k] - c0[k] * c0[k]) * lap);
    }
  };
  const BoundaryTrace uc = propagate_free(f, c, T, s.mask, s.support, rec).trace;
  const BoundaryTrace u0 = propagate_free(f, c0, T, s.mask, s.support, opt).trace;
  const BoundaryTrace w =
      propagate_source(SourceTerm::sampled(s.grid, nodes, F), c0, T, s.mask, s.support, opt).trace;
  const BoundaryTrace diff = uc - u0;
  const double rel = trace_h1_norm(w - diff) / trace_h1_norm(diff);
  return {rel <= kMaxRel, fmt("relative trace H1 mismatch %.2e (<= %.0e)", rel, kMaxRel)};
}

// 6. Closed-form Carleman constants and the Friedrichs constant.
Outcome carleman_constants() {
  constexpr double kRelTol = 1e-8;
  constexpr double kMaxRefinementChange = 0.02;
  const Setup coarse = static_setup(2.0 / 128, 0.5), fine = static_setup(2.0 / 256, 0.5);
  const FriedrichsEstimate fa = friedrichs_estimate(SpeedField::constant(coarse.grid, 1.0), coarse.mask);
  const FriedrichsEstimate fb = friedrichs_estimate(SpeedField::constant(fine.grid, 1.0), fine.mask);
  const double change = std::abs(fa.raw - fb.raw) / fb.raw;

  const ConvexWeight ell = ConvexWeight::quadratic({2.0, 0.0});
  const CarlemanConstants k = compute_constants(ell, SpeedField::constant(fine.grid, 1.0), fine.mask, fb.C_F);
  const double rho = 0.99, r = 0.99, C1 = rho * rho, C2 = 4.0, C3 = (rho + 2.0) / 2.0, B = 9.0, beta = 1.0;
  const double tau = std::max({3.0 / rho, C1 / (2 * rho * r * r), 1.0});
  const double T_min = 2 * fb.C_F * (2 * C2 * C2 * tau + C3) * std::exp((B - beta) * tau) * tau;
  double worst = 0.0;
  for (auto [got, want] : {std::pair{k.rho, rho}, {k.r, r}, {k.C1, C1}, {k.C2, C2}, {k.C3, C3}, {k.B_ell, B},
                           {k.beta_ell, beta}, {k.tau, tau}, {k.T_min, T_min}, {k.C_F, fb.C_F}})
    worst = std::max(worst, std::abs(got - want) / std::abs(want));
  return {worst <= kRelTol && change < kMaxRefinementChange,
          fmt("max relative deviation %.1e (<= %.0e); tau %.6f, T_min %.4e; C_F %.4f, 1/lambda %.5f -> %.5f "
              "(change %.2f%% < %.0f%%)",
              worst, kRelTol, k.tau, k.T_min, fb.C_F, fa.raw, fb.raw, 100 * change, 100 * kMaxRefinementChange)};
}

// 7. Pointwise Carleman inequality on a synthetic wave.
Outcome carleman_pointwise() {
  const Setup s = static_setup(2.0 / 128, 0.5);
  const SpeedField c = SpeedField::constant(s.grid, 1.0);
  const ConvexWeight ell = ConvexWeight::quadratic({2.0, 0.0});
  const CarlemanConstants k = compute_constants(ell, c, s.mask, friedrichs_constant(c, s.mask));
  const CarlemanCheckSample r =
      pointwise_carleman_check(synthetic_wave(), ell, c, s.mask, k.tau, k.rho, CarlemanCheckGrid{256, 1.0});
  return {r.n_violations == 0 && r.n_points > 0,
          fmt("%ld violations among %ld space-time nodes (tau %.4f, rho %.2f); min residual %.3e, max error bound "
              "%.3e",
              r.n_violations, r.n_points, k.tau, k.rho, r.min_residual, r.max_delta)};
}

// 8. Ray tracing: chords, tangency and boundary convexity.
Outcome geodesics() {
  constexpr double kChordTol = 1e-6;
  const Setup s = static_setup(1.0 / 64, 0.8, 40);
  const SpeedField c = SpeedField::constant(s.grid, 1.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double r = 0.999 * std::sqrt(U(rng)), a = 2 * kPi * U(rng), b = 2 * kPi * U(rng);
    const Vec2 x{r * std::cos(a), r * std::sin(a)}, v{std::cos(b), std::sin(b)};
    const double xv = dot(x, v);
    worst = std::max(worst, std::abs(exit_time(x, v, c, s.mask) - (-xv + std::sqrt(xv * xv + 1 - dot(x, x)))));
  }
  const TangencyScan scan = tangency_scan(s.support, c, s.mask, 50, 72);

  const SpeedField convex = SpeedField::from_model(s.grid, SpeedModel(1.0, {}, RadialRamp{0.8, 0.4, -0.6}));
  const SpeedField concave = SpeedField::from_model(s.grid, SpeedModel(1.0, {}, RadialRamp{0.75, 0.4, 0.5}));
  const ConvexityReport a = boundary_convexity_check(convex, s.mask);
  const ConvexityReport b = boundary_convexity_check(concave, s.mask);
  const bool convexity_ok = a.consistent() && a.formula_convex && a.probe_convex && b.consistent() &&
                            !b.formula_convex && !b.probe_convex;
  return {worst <= kChordTol && scan.flagged.empty() && convexity_ok,
          fmt("chord error %.2e (<= %.0e) over 1000 rays; %zu tangential of %zu; convex profile min kappa %.3f "
              "(formula %d, probe %d), non-convex min kappa %.3f (formula %d, probe %d)",
              worst, kChordTol, scan.flagged.size(), scan.records.size(), a.min_curvature, a.formula_convex,
              a.probe_convex, b.min_curvature, b.formula_convex, b.probe_convex)};
}

// 9. Boundary trace of the source-driven wave against the source size.
Outcome trace_bound() {
  constexpr double kMaxSpread = 5.0;
  const double T = 2.2 * 1.8;
  const Setup s = wave_setup(1.0 / 50, T, 1.0);
  const SpeedField c0 = SpeedField::constant(s.grid, 1.0);
  const TimeGrid tg = plan_time_grid(c0, T);
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double lo = 1e300, hi = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const ScalarField profile = random_smooth_field(s.grid, s.support, 1000 + std::uint64_t(trial));
    const double t0 = 0.2 + 0.6 * U(rng), width = 0.08 + 0.12 * U(rng), freq = 4.0 * U(rng);
    std::vector<double> pulse(std::size_t(tg.steps + 1));
    for (int n = 0; n <= tg.steps; ++n) {
      const double t = n * tg.dt;
      pulse[std::size_t(n)] = std::cos(freq * (t - t0)) * std::exp(-0.5 * std::pow((t - t0) / width, 2));
    }
    const BoundaryTrace w =
        propagate_source(SourceTerm::separable(profile, pulse), c0, T, s.mask, s.support).trace;
    // |F|_{L2((0,T) x M)} for separable F, trapezoidal in time.
    double g2 = 0.0;
    for (int n = 0; n <= tg.steps; ++n)
      g2 += (n == 0 || n == tg.steps ? 0.5 : 1.0) * tg.dt * pulse[std::size_t(n)] * pulse[std::size_t(n)];
    const double ratio = trace_h1_norm(w) / (l2_norm(profile, s.mask) * std::sqrt(g2));
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return {hi / lo <= kMaxSpread,
          fmt("|w|_H1(trace) / |F|_L2 over 10 sources: min %.3f, max %.3f, spread %.2f (<= %.0f)", lo, hi, hi / lo,
              kMaxSpread)};
}

// 10. Log-convexity of the Sobolev scale.
Outcome interpolation() {
  constexpr double kSlack = 1e-10;
  const Setup s = static_setup(1.0 / 64, 0.8);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 2 * kPi);
  std::uniform_int_distribution<int> K(-12, 12);
  double worst = 0.0;  // max of |f|_2 / sqrt(|f|_1 |f|_3)
  for (int trial = 0; trial < 20; ++trial) {
    // Random trigonometric polynomial with |k| <= 12, windowed into K.
    std::vector<std::tuple<double, double, double, double>> modes;
    for (int m = 0; m < 12; ++m) {
      const double kx = K(rng), ky = K(rng);
      modes.emplace_back(kx, ky, N(rng), U(rng));
    }
    const ScalarField f = ScalarField::sample(s.grid, [&](Vec2 x) {
      double v = 0.0;
      for (auto [kx, ky, a, ph] : modes) v += a * std::cos(kx * x.x + ky * x.y + ph);
      return v * bump_profile(x, s.support.center, s.support.radius);
    });
    const double n1 = hs_norm_compact(f, s.support, 1), n2 = hs_norm_compact(f, s.support, 2),
                 n3 = hs_norm_compact(f, s.support, 3);
    worst = std::max(worst, n2 / std::sqrt(n1 * n3));
  }
  return {worst <= 1.0 + kSlack,
          fmt("max |f|_2 / sqrt(|f|_1 |f|_3) over 20 fields: %.12f (<= 1 + %.0e)", worst, kSlack)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"energy-flux identity", energy_flux},
      {"harmonic extension", harmonic},
      {"self-reconstruction", self_reconstruction},
      {"stability scaling", stability_scaling},
      {"two-route consistency", two_routes},
      {"Carleman constants", carleman_constants},
      {"pointwise Carleman check", carleman_pointwise},
      {"geodesics", geodesics},
      {"trace bound", trace_bound},
      {"interpolation inequality", interpolation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("criterion %2zu %-26s %s  %s  [%.1fs]\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
