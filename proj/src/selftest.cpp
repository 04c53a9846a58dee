#include <algorithm>
#include <cmath>
#include <functional>

#include "patlab/experiments.hpp"
#include "patlab/field_io.hpp"
#include "patlab/forward_solver.hpp"
#include "patlab/geodesics.hpp"
#include "patlab/neumann.hpp"
#include "patlab/norms.hpp"
#include "patlab/time_reversal.hpp"

namespace patlab {

namespace {

struct Coarse {
  Grid2D grid;
  DomainMask mask;
  CompactSupport support;
  double T;
};

// The configured disk on at most 32 cells per radius, padded for a run of
// length R_M at unit speed.
Coarse coarse_setup(const ScenarioConfig& cfg) {
  const double R = cfg.domain.R_M;
  const double h = std::max(cfg.grid.h, R / 32.0);
  const double T = R;
  const double bg = cfg.speed.background;
  const Grid2D grid = Grid2D::centered(R + required_padding(bg, T, h) + 4.0 * h, h);
  auto [mask, support] = build_disk_domain(grid, R, cfg.domain.R_K, default_n_theta(R, h));
  return {grid, std::move(mask), support, T};
}

SelftestCheck check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  SelftestCheck out{name, false, ""};
  try {
    auto [ok, detail] = body();
    out.passed = ok;
    out.detail = detail;
  } catch (const std::exception& e) {
    out.detail = std::string("threw: ") + e.what();
  }
  return out;
}

std::string show(double v) { return format_number(v); }

}  // namespace

std::vector<SelftestCheck> run_selftest(const ScenarioConfig& cfg) {
  const Coarse s = coarse_setup(cfg);
  const double bg = cfg.speed.background;
  const double R = cfg.domain.R_M;
  const SpeedField c = SpeedField::constant(s.grid, bg);
  std::vector<SelftestCheck> out;

  out.push_back(check("zero source gives zero trace", [&] {
    const SimulationRun run = propagate_free(ScalarField(s.grid), c, s.T, s.mask, s.support);
    return std::pair{run.trace.max_abs() == 0.0, "max |trace| = " + show(run.trace.max_abs())};
  }));

  out.push_back(check("harmonic extension of a constant is that constant", [&] {
    const std::vector<double> ones(std::size_t(s.mask.n_theta()), 1.0);
    const ScalarField u = harmonic_extension(ones, s.mask);
    double err = 0.0;
    for (std::size_t k : s.mask.interior_nodes()) err = std::max(err, std::abs(u[k] - 1.0));
    return std::pair{err < 1e-9, "max error " + show(err)};
  }));

  out.push_back(check("time reversal of zero data is zero", [&] {
    const TimeGrid tg = plan_time_grid(c, s.T);
    const BoundaryTrace zero(tg.steps + 1, s.mask.n_theta(), tg.dt, R);
    const ScalarField v = time_reverse(zero, c, s.mask);
    return std::pair{v.max_abs() == 0.0, "max |v| = " + show(v.max_abs())};
  }));

  out.push_back(check("error operator maps zero to zero", [&] {
    const ScalarField k = apply_K(ScalarField(s.grid), c, s.T, s.mask, s.support);
    return std::pair{k.max_abs() == 0.0, "max |K 0| = " + show(k.max_abs())};
  }));

  out.push_back(check("exit time from the centre is R_M / c", [&] {
    const double t = exit_time({0.0, 0.0}, {0.6, 0.8}, c, s.mask);
    const double want = R / bg;
    return std::pair{std::abs(t - want) < 1e-9 * want, show(t) + " vs " + show(want)};
  }));

  out.push_back(check("doubling the speed halves the exit time", [&] {
    const SpeedField c2 = SpeedField::constant(s.grid, 2.0 * bg);
    const double t1 = exit_time({0.3 * R, -0.1 * R}, {1.0, 0.4}, c, s.mask);
    const double t2 = exit_time({0.3 * R, -0.1 * R}, {1.0, 0.4}, c2, s.mask);
    return std::pair{std::abs(2.0 * t2 - t1) < 1e-9 * t1, show(t1) + " vs 2 x " + show(t2)};
  }));

  out.push_back(check("constant speed makes the circle convex with curvature c / R_M", [&] {
    const ConvexityReport rep = boundary_convexity_check(c, s.mask);
    const double want = bg / R;
    return std::pair{rep.formula_convex && rep.probe_convex && std::abs(rep.min_curvature - want) < 1e-9 * want,
                     "min curvature " + show(rep.min_curvature)};
  }));

  out.push_back(check("H^0 norm equals the discrete L2 norm", [&] {
    const ScalarField f = ScalarField::sample(s.grid, [&](Vec2 x) {
      return s.support.contains(x) ? std::exp(-dot(x, x) / (0.02 * R * R)) : 0.0;
    });
    double l2 = 0.0;
    for (double v : f.values()) l2 += v * v;
    l2 = std::sqrt(l2) * s.grid.h();
    const double hs = hs_norm_compact(f, s.support, 0);
    return std::pair{std::abs(hs - l2) < 1e-12 * l2, show(hs) + " vs " + show(l2)};
  }));

  out.push_back(check("missing domain.R_M is reported by name", [&] {
    nlohmann::json doc = to_json(cfg);
    doc["domain"].erase("R_M");
    try {
      (void)parse_config(doc);
    } catch (const ConfigError& e) {
      const auto& p = e.problems();
      const bool named = std::any_of(p.begin(), p.end(), [](const std::string& m) {
        return m == "domain.R_M: missing";
      });
      return std::pair{named, std::string(e.what())};
    }
    return std::pair{false, std::string("accepted")};
  }));

  return out;
}

}  // namespace patlab
