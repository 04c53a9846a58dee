#include <doctest.h>

#include <cmath>
#include <random>

#include "patlab/geodesics.hpp"

using namespace patlab;

namespace {

struct Disk {
  Grid2D grid;
  DomainMask mask;
  CompactSupport support;
};

Disk disk(double R_M, double R_K, double h) {
  const Grid2D g = Grid2D::centered(R_M * 1.2, h);
  auto [m, s] = build_disk_domain(g, R_M, R_K, default_n_theta(R_M, h));
  return {g, std::move(m), s};
}

Vec2 unit(double a) { return {std::cos(a), std::sin(a)}; }

}  // namespace

TEST_CASE("straight rays follow the chord formula") {
  const Disk d = disk(1.0, 0.8, 1.0 / 32);
  const SpeedField c = SpeedField::constant(d.grid, 1.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double rad = 0.95 * std::sqrt(U(rng)), phi = 2 * kPi * U(rng), a = 2 * kPi * U(rng);
    const Vec2 x = rad * unit(phi), v = unit(a);
    const double xv = dot(x, v);
    const double oracle = -xv + std::sqrt(xv * xv + 1.0 - dot(x, x));
    CHECK(chord_exit_time(x, v, 1.0) == doctest::Approx(oracle).epsilon(1e-14));
    // Covector length is irrelevant after normalisation.
    CHECK(std::abs(exit_time(x, 3.0 * v, c, d.mask) - oracle) <= 1e-6);
    const RayResult r = trace_ray(x, v, c, d.mask);
    CHECK(norm(r.exit.x - (x + oracle * v)) <= 1e-6);
  }
  for (int k = 0; k < 8; ++k) CHECK(exit_time({0.0, 0.0}, unit(k * 0.7), c, d.mask) == doctest::Approx(1.0).epsilon(1e-9));

  // From just inside the boundary, heading back across the disk.
  for (double alpha : {0.0, 0.3, 1.0}) {
    const Vec2 x = (1.0 - 1e-9) * unit(0.0);
    const Vec2 v = -1.0 * unit(alpha);
    CHECK(exit_time(x, v, c, d.mask) == doctest::Approx(2.0 * std::cos(alpha)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(trace_ray({1.2, 0.0}, {1.0, 0.0}, c, d.mask), PreconditionError);
  CHECK(exit_time({1.0, 0.0}, {1.0, 0.2}, c, d.mask) == 0.0);
}

TEST_CASE("conservation laws along rays") {
  // A wide domain so that rays run for t of order 10.
  const Disk d = disk(6.0, 5.0, 0.05);
  const SpeedField bumpy = SpeedField::from_model(
      d.grid, SpeedModel(1.0, {{{1.0, 0.5}, 1.5, 0.2}, {{-2.0, -1.0}, 2.0, -0.15}, {{0.5, -3.0}, 1.0, 0.1}}));
  for (int k = 0; k < 6; ++k) {
    const RayResult r = trace_ray({-4.0, 0.3 * k - 1.0}, unit(0.1 * k), bumpy, d.mask, {0.005, 0.0, false});
    REQUIRE(r.crossed);
    CHECK(r.exit.t > 7.0);
    CHECK(r.max_hamiltonian_drift <= 1e-8);
  }

  const Disk u = disk(1.0, 0.8, 1.0 / 64);
  const SpeedField radial = SpeedField::from_model(u.grid, SpeedModel(1.0, {}, RadialRamp{0.1, 0.6, 0.4}));
  RayOptions opt;
  opt.record_path = true;
  for (int k = 0; k < 5; ++k) {
    const Vec2 x0 = 0.5 * unit(0.4 * k);
    const RayResult r = trace_ray(x0, unit(1.3 * k + 0.2), radial, u.mask, opt);
    const double L0 = cross(r.path.front().x, r.path.front().xi);
    double drift = 0.0;
    for (const RayState& s : r.path) drift = std::max(drift, std::abs(cross(s.x, s.xi) - L0));
    CHECK(drift <= 1e-7);
  }
}

TEST_CASE("rays are reversible and converge at fourth order") {
  const Disk d = disk(1.0, 0.8, 1.0 / 64);
  const SpeedField c = SpeedField::from_model(d.grid, SpeedModel(1.0, {{{0.2, -0.1}, 0.5, 0.3}}));
  for (int k = 0; k < 6; ++k) {
    const Vec2 x0 = 0.4 * unit(1.1 * k);
    const RayResult fwd = trace_ray(x0, unit(0.9 * k + 0.3), c, d.mask);
    REQUIRE(fwd.crossed);
    RayOptions back;
    back.t_max = fwd.exit.t;
    const Vec2 start = (1.0 - 1e-12) * fwd.exit.x;
    const RayResult rev = trace_ray(start, -1.0 * fwd.exit.xi, c, d.mask, back);
    CHECK(norm(rev.exit.x - x0) <= 1e-5);

    for (double alpha : {0.5, 3.0})
      CHECK(exit_time(x0, alpha * unit(0.9 * k + 0.3), c, d.mask) ==
            doctest::Approx(fwd.exit.t).epsilon(1e-12));
  }

  const Vec2 x0{-0.3, 0.2};
  const Vec2 v = unit(-0.4);
  const double ref = exit_time(x0, v, c, d.mask, {0.04 / 64, 0.0, false});
  std::vector<double> err;
  for (double dt : {0.04, 0.02, 0.01}) err.push_back(std::abs(exit_time(x0, v, c, d.mask, {dt, 0.0, false}) - ref));
  CHECK(err[0] > 0.0);
  CHECK(std::log2(err[0] / err[1]) >= 3.5);
  CHECK(std::log2(err[1] / err[2]) >= 3.5);
}

TEST_CASE("maximal exit time") {
  // From x the longest exit is along x itself, of length R + |x|, so the maximum over K is R_M + R_K (2 R_M when K = M).
  const Disk d = disk(1.0, 0.8, 1.0 / 32);
  const ExitTimeScan one = max_exit_time(SpeedField::constant(d.grid, 1.0), d.mask, d.support, 200, 72);
  CHECK_FALSE(one.trapped);
  CHECK(one.n_rays == 200 * 72);
  CHECK(one.max_exit_time <= 1.8 + 1e-9);
  CHECK(one.max_exit_time >= 1.79);

  const ExitTimeScan two = max_exit_time(SpeedField::constant(d.grid, 2.0), d.mask, d.support, 200, 72);
  CHECK(two.max_exit_time == doctest::Approx(0.5 * one.max_exit_time).epsilon(1e-9));

  const SpeedField lens = SpeedField::from_model(d.grid, SpeedModel(1.0, {{{0.0, 0.0}, 0.6, -0.3}}));
  const ExitTimeScan slow = max_exit_time(lens, d.mask, d.support, 200, 72);
  CHECK_FALSE(slow.trapped);
  CHECK(slow.max_exit_time > one.max_exit_time + 0.05);
}

TEST_CASE("tangency diagnostics") {
  const Disk d = disk(1.0, 0.8, 1.0 / 32);
  const SpeedField c = SpeedField::constant(d.grid, 1.0);
  const TangencyScan scan = tangency_scan(d.support, c, d.mask, 40, 72);
  CHECK(scan.records.size() == 40 * 72);
  CHECK(scan.flagged.empty());
  for (const ExitRecord& r : scan.records) CHECK_FALSE(analytic_tangency(r.x0, unit(r.angle), 1.0, 1e-3));

  // A ray along the vertical tangent line x = 1: impact parameter exactly R.
  const ExitRecord grazing = exit_record({1.0, 0.0}, 0.5 * kPi, c, d.mask);
  CHECK(grazing.tangential);
  CHECK(analytic_tangency({1.0, 0.0}, {0.0, 1.0}, 1.0));
  CHECK_FALSE(analytic_tangency({0.9, 0.0}, {0.0, 1.0}, 1.0));

  // Exit angle against launch angle from a fixed interior point.
  const int n_dir = 720;
  double jump = 0.0;
  double prev = exit_record({0.3, -0.2}, 0.0, c, d.mask).exit_angle;
  for (int k = 1; k <= n_dir; ++k) {
    const double a = exit_record({0.3, -0.2}, 2 * kPi * k / n_dir, c, d.mask).exit_angle;
    jump = std::max(jump, std::abs(a - prev));
    prev = a;
  }
  CHECK(jump < 0.1);
}

TEST_CASE("boundary convexity") {
  const Disk d = disk(1.0, 0.7, 1.0 / 64);
  const ConvexityReport flat = boundary_convexity_check(SpeedField::constant(d.grid, 1.0), d.mask);
  CHECK(flat.formula_convex);
  CHECK(flat.probe_convex);
  CHECK(flat.consistent());
  for (double k : flat.curvature) CHECK(k == doctest::Approx(1.0).epsilon(1e-9));

  const SpeedField doubled = SpeedField::constant(d.grid, 2.0);
  CHECK(boundary_convexity_check(doubled, d.mask).min_curvature == doctest::Approx(2.0).epsilon(1e-9));

  // Speed dropping outward near the boundary: tangent rays bend away from M.
  const SpeedField down = SpeedField::from_model(d.grid, SpeedModel(1.0, {}, RadialRamp{0.8, 0.4, -0.6}));
  const ConvexityReport a = boundary_convexity_check(down, d.mask);
  CHECK(a.min_curvature > 1.0);
  CHECK(a.formula_convex);
  CHECK(a.probe_convex);
  CHECK(a.consistent());

  // Speed growing steeply outward: c (1/R - d_nu log c) < 0 and tangent
  // rays bend back into M.
  const SpeedField up = SpeedField::from_model(d.grid, SpeedModel(1.0, {}, RadialRamp{0.75, 0.4, 0.5}));
  const ConvexityReport b = boundary_convexity_check(up, d.mask);
  CHECK(b.min_curvature < 0.0);
  CHECK_FALSE(b.formula_convex);
  CHECK_FALSE(b.probe_convex);
  CHECK(b.consistent());
}
