#include <doctest.h>

#include <cmath>
#include <random>

#include "patlab/forward_solver.hpp"
#include "patlab/norms.hpp"
#include "patlab/time_reversal.hpp"

using namespace patlab;

namespace {

struct Setup {
  Grid2D grid;
  DomainMask mask;
  CompactSupport support;
};

Setup make_setup(double h, double T) {
  const Grid2D g = Grid2D::centered(1.0 + required_padding(1.0, T, h) + 4 * h, h);
  auto [m, s] = build_disk_domain(g, 1.0, 0.8, default_n_theta(1.0, h));
  return {g, std::move(m), s};
}

std::vector<double> boundary_data(const DomainMask& mask, double (*g)(double)) {
  std::vector<double> v;
  for (const auto& s : mask.samples()) v.push_back(g(s.theta));
  return v;
}

double max_error(const ScalarField& u, const DomainMask& mask, double (*exact)(Vec2)) {
  double e = 0.0;
  for (std::size_t k : mask.interior_nodes()) e = std::max(e, std::abs(u[k] - exact(mask.grid().node(k))));
  return e;
}

}  // namespace

TEST_CASE("harmonic extension of constants and harmonic polynomials") {
  const Setup s = make_setup(1.0 / 64, 0.5);
  const ScalarField one = harmonic_extension(boundary_data(s.mask, [](double) { return 1.0; }), s.mask);
  CHECK(max_error(one, s.mask, [](Vec2) { return 1.0; }) < 1e-9);

  const ScalarField u1 = harmonic_extension(boundary_data(s.mask, [](double t) { return std::cos(t); }), s.mask);
  CHECK(max_error(u1, s.mask, [](Vec2 x) { return x.x; }) < 1e-4);

  const ScalarField u3 = harmonic_extension(boundary_data(s.mask, [](double t) { return std::cos(3 * t); }), s.mask);
  CHECK(max_error(u3, s.mask, [](Vec2 x) { return x.x * x.x * x.x - 3 * x.x * x.y * x.y; }) < 1e-3);

  CHECK_THROWS_AS(harmonic_extension(std::vector<double>(3, 0.0), s.mask), PreconditionError);
}

TEST_CASE("harmonic extension converges at second order") {
  std::vector<double> err;
  for (double h : {1.0 / 32, 1.0 / 64, 1.0 / 128}) {
    const Setup s = make_setup(h, 0.5);
    const ScalarField u = harmonic_extension(boundary_data(s.mask, [](double t) { return std::cos(3 * t); }), s.mask);
    err.push_back(max_error(u, s.mask, [](Vec2 x) { return x.x * x.x * x.x - 3 * x.x * x.y * x.y; }));
  }
  for (int k = 0; k < 2; ++k) {
    const double order = std::log2(err[std::size_t(k)] / err[std::size_t(k) + 1]);
    CHECK(order >= 1.5);
    CHECK(order <= 2.5);
  }
}

TEST_CASE("discrete maximum principle") {
  const Setup s = make_setup(1.0 / 48, 0.5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 2.0);
  std::vector<double> data(std::size_t(s.mask.n_theta()));
  for (double& v : data) v = U(rng);
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  const ScalarField u = harmonic_extension(data, s.mask);
  for (std::size_t k : s.mask.interior_nodes()) {
    CHECK(u[k] >= *lo - 1e-9);
    CHECK(u[k] <= *hi + 1e-9);
  }
}

TEST_CASE("time reversal is linear and vanishes on zero data") {
  const double T = 1.0;
  const Setup s = make_setup(1.0 / 32, T);
  const SpeedField c = SpeedField::constant(s.grid, 1.0);
  const TimeGrid tg = plan_time_grid(c, T);
  BoundaryTrace zero(tg.steps + 1, s.mask.n_theta(), tg.dt, 1.0);
  CHECK(time_reverse(zero, c, s.mask).max_abs() == 0.0);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 1.0);
  auto random_trace = [&] {
    BoundaryTrace h = zero;
    const double a = N(rng), b = N(rng), w = 2 + std::abs(N(rng));
    for (int n = 0; n < h.n_times(); ++n)
      for (int k = 0; k < h.n_theta(); ++k) h.at(n, k) = a * std::sin(w * h.time(n) + k * 0.1) + b * h.time(n);
    return h;
  };
  const TimeReversal A(c, s.mask);
  for (int trial = 0; trial < 3; ++trial) {
    const BoundaryTrace h1 = random_trace(), h2 = random_trace();
    const ScalarField lhs = A.apply(2.0 * h1 + (-0.5) * h2);
    const ScalarField rhs = 2.0 * A.apply(h1) - 0.5 * A.apply(h2);
    double e = 0.0;
    for (std::size_t k = 0; k < lhs.size(); ++k) e = std::max(e, std::abs(lhs[k] - rhs[k]));
    CHECK(e <= 1e-10 * std::max(1.0, rhs.max_abs()));
  }
  const BoundaryTrace h = random_trace();
  const ScalarField once = time_reverse(h, c, s.mask);
  const ScalarField reused = A.apply(h);
  for (std::size_t k = 0; k < once.size(); ++k) CHECK(once[k] == reused[k]);
}

TEST_CASE("time reversal of exact data recovers the source approximately") {
  // Unit disk, c = 1: the longest chord is 2, so T = 4 is twice the maximal
  // exit time.
  const double T = 4.0;
  const Setup s = make_setup(1.0 / 50, T);
  const SpeedField c = SpeedField::constant(s.grid, 1.0);
  const ScalarField f = ScalarField::sample(s.grid, [&](Vec2 x) {
    const Vec2 d = x - Vec2{0.1, -0.05};
    return s.support.contains(x) ? std::exp(-dot(d, d) / (2 * 0.1 * 0.1)) : 0.0;
  });
  const BoundaryTrace h = propagate_free(f, c, T, s.mask, s.support).trace;
  const ScalarField v = time_reverse(h, c, s.mask);
  const double rel = h1_norm(v - f, s.mask) / h1_norm(f, s.mask);
  CHECK(rel < 0.5);
  // Frozen from this configuration (h = 1/50): 0.027.
  CHECK(rel == doctest::Approx(0.027).epsilon(0.15));

  TimeReversalOptions zero_start;
  zero_start.zero_final_data = true;
  const ScalarField v0 = time_reverse(h, c, s.mask, zero_start);
  CHECK(h1_norm(v0 - f, s.mask) >= h1_norm(v - f, s.mask));
}

TEST_CASE("trace layout must match the mask") {
  const Setup s = make_setup(1.0 / 32, 1.0);
  const SpeedField c = SpeedField::constant(s.grid, 1.0);
  const TimeGrid tg = plan_time_grid(c, 1.0);
  CHECK_THROWS_AS(time_reverse(BoundaryTrace(tg.steps + 1, s.mask.n_theta() + 4, tg.dt, 1.0), c, s.mask),
                  PreconditionError);
  CHECK_THROWS_AS(time_reverse(BoundaryTrace(tg.steps + 1, s.mask.n_theta(), tg.dt, 0.9), c, s.mask),
                  PreconditionError);
}
