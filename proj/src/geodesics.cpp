#include "patlab/geodesics.hpp"

#include <algorithm>
#include <limits>

#include "patlab/interpolation.hpp"

namespace patlab {

namespace {

struct Deriv {
  Vec2 dx;
  Vec2 dxi;
};

Deriv rhs(const SpeedSampler& c, Vec2 x, Vec2 xi) {
  const double cv = c.value(x);
  const Vec2 gc = c.gradient(x);
  return {cv * cv * xi, -dot(xi, xi) * cv * gc};
}

RayState rk4(const SpeedSampler& c, const RayState& s, double h) {
  const Deriv k1 = rhs(c, s.x, s.xi);
  const Deriv k2 = rhs(c, s.x + 0.5 * h * k1.dx, s.xi + 0.5 * h * k1.dxi);
  const Deriv k3 = rhs(c, s.x + 0.5 * h * k2.dx, s.xi + 0.5 * h * k2.dxi);
  const Deriv k4 = rhs(c, s.x + h * k3.dx, s.xi + h * k3.dxi);
  return {s.x + (h / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx),
          s.xi + (h / 6.0) * (k1.dxi + 2.0 * k2.dxi + 2.0 * k3.dxi + k4.dxi), s.t + h};
}

// Partial step landing on the circle: F(0) < 0 <= F(h). Illinois regula falsi.
RayState refine_crossing(const SpeedSampler& c, const RayState& s, double h, const DomainMask& mask) {
  auto F = [&](double sigma) { return mask.distance_from_center(rk4(c, s, sigma).x) - mask.radius(); };
  double a = 0.0, b = h;
  double fa = F(a), fb = F(b);
  if (fb == 0.0) return rk4(c, s, b);
  int side = 0;
  double sigma = b;
  for (int it = 0; it < 200; ++it) {
    sigma = (a * fb - b * fa) / (fb - fa);
    const double f = F(sigma);
    if (std::abs(f) < 1e-13 || b - a < 1e-16) break;
    if (f < 0.0) {
      a = sigma;
      fa = f;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = sigma;
      fb = f;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  return rk4(c, s, sigma);
}

double default_t_max(const SpeedField& c, const DomainMask& mask) { return 20.0 * mask.radius() / c.c_min(); }

}  // namespace

RayResult trace_ray(Vec2 x0, Vec2 xi0, const SpeedField& c, const DomainMask& mask, const RayOptions& options) {
  if (!(c.grid() == mask.grid())) throw PreconditionError("trace_ray: speed and mask on different grids");
  if (!(options.dt > 0.0)) throw PreconditionError("trace_ray: dt must be positive");
  const double R = mask.radius();
  const double f0 = mask.distance_from_center(x0) - R;
  if (f0 > 1e-12 * R) throw PreconditionError("trace_ray: start point outside M");
  if (norm(xi0) == 0.0) throw PreconditionError("trace_ray: zero covector");

  const SpeedSampler speed(c);
  const double c0 = speed.value(x0);
  RayState s{x0, (1.0 / (c0 * norm(xi0))) * xi0, 0.0};
  const double t_max = options.t_max > 0.0 ? options.t_max : default_t_max(c, mask);

  RayResult out;
  if (options.record_path) out.path.push_back(s);
  const Vec2 n0 = x0 - mask.center();
  if (f0 >= -1e-12 * R && dot(s.xi, n0) >= -1e-12 * norm(s.xi) * norm(n0)) {
    out.crossed = true;
    out.exit = s;
    return out;
  }

  const double margin = 4.0 * c.grid().h();
  while (s.t < t_max) {
    const double h = std::min(options.dt, t_max - s.t);
    const RayState next = rk4(speed, s, h);
    if (c.grid().distance_to_edge(next.x) < margin)
      throw GeometryError("trace_ray: ray left the computational box before crossing dM");
    const double cv = speed.value(next.x);
    out.max_hamiltonian_drift = std::max(out.max_hamiltonian_drift, std::abs(cv * cv * dot(next.xi, next.xi) - 1.0));
    if (mask.distance_from_center(next.x) - R >= 0.0) {
      out.exit = refine_crossing(speed, s, h, mask);
      out.crossed = true;
      if (options.record_path) out.path.push_back(out.exit);
      return out;
    }
    s = next;
    if (options.record_path) out.path.push_back(s);
  }
  out.exit = s;
  return out;
}

double exit_time(Vec2 x0, Vec2 xi0, const SpeedField& c, const DomainMask& mask, const RayOptions& options) {
  const RayResult r = trace_ray(x0, xi0, c, mask, options);
  if (!r.crossed) throw HypothesisError("ray trapped: no exit before t_max");
  return r.exit.t;
}

double chord_exit_time(Vec2 x, Vec2 v, double R) {
  const double xv = dot(x, v);
  return -xv + std::sqrt(std::max(0.0, xv * xv + R * R - dot(x, x)));
}

std::vector<Vec2> sample_disk(const CompactSupport& support, int n) {
  if (n < 1) throw PreconditionError("sample_disk: need at least one point");
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec2> pts;
  pts.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    const double r = support.radius * std::sqrt((i + 0.5) / n);
    const double a = golden * i;
    pts.push_back(support.center + Vec2{r * std::cos(a), r * std::sin(a)});
  }
  return pts;
}

ExitTimeScan max_exit_time(const SpeedField& c, const DomainMask& mask, const CompactSupport& support, int n_x,
                           int n_dir, const RayOptions& options) {
  if (n_dir < 1) throw PreconditionError("max_exit_time: need at least one direction");
  ExitTimeScan scan;
  for (Vec2 x : sample_disk(support, n_x)) {
    for (int d = 0; d < n_dir; ++d) {
      const double a = 2.0 * kPi * d / n_dir;
      const RayResult r = trace_ray(x, {std::cos(a), std::sin(a)}, c, mask, options);
      ++scan.n_rays;
      if (!r.crossed) {
        scan.trapped = true;
        continue;
      }
      if (r.exit.t > scan.max_exit_time) {
        scan.max_exit_time = r.exit.t;
        scan.argmax_x = x;
        scan.argmax_angle = a;
      }
    }
  }
  return scan;
}

ExitRecord exit_record(Vec2 x0, double angle, const SpeedField& c, const DomainMask& mask, const RayOptions& options) {
  ExitRecord rec;
  rec.x0 = x0;
  rec.angle = angle;
  const RayResult r = trace_ray(x0, {std::cos(angle), std::sin(angle)}, c, mask, options);
  if (!r.crossed) {
    rec.trapped = true;
    rec.exit_time = r.exit.t;
    rec.exit_point = r.exit.x;
    return rec;
  }
  rec.exit_time = r.exit.t;
  rec.exit_point = r.exit.x;
  const Vec2 n = r.exit.x - mask.center();
  const double cos_normal = dot(r.exit.xi, n) / (norm(r.exit.xi) * norm(n));
  rec.exit_angle = std::asin(std::clamp(std::abs(cos_normal), 0.0, 1.0));
  rec.tangential = rec.exit_angle < kTangencyAngle;
  return rec;
}

TangencyScan tangency_scan(const CompactSupport& support, const SpeedField& c, const DomainMask& mask, int n_x,
                           int n_dir, const RayOptions& options) {
  if (n_dir < 1) throw PreconditionError("tangency_scan: need at least one direction");
  TangencyScan scan;
  for (Vec2 x : sample_disk(support, n_x)) {
    for (int d = 0; d < n_dir; ++d) {
      scan.records.push_back(exit_record(x, 2.0 * kPi * d / n_dir, c, mask, options));
      if (scan.records.back().tangential) scan.flagged.push_back(scan.records.size() - 1);
    }
  }
  return scan;
}

bool analytic_tangency(Vec2 x0, Vec2 v, double R, double tol) {
  const double b = std::abs(cross(x0, (1.0 / norm(v)) * v));
  return std::abs(b - R) <= tol * R;
}

ConvexityReport boundary_convexity_check(const SpeedField& c, const DomainMask& mask) {
  if (!(c.grid() == mask.grid())) throw PreconditionError("convexity check: speed and mask on different grids");
  const SpeedSampler speed(c);
  const double R = mask.radius();
  ConvexityReport rep;
  rep.min_curvature = std::numeric_limits<double>::infinity();
  bool formula_convex = true;
  bool probe_convex = true;

  for (const auto& s : mask.samples()) {
    const double cv = speed.value(s.point);
    const double dlog = dot(speed.gradient(s.point), s.normal) / cv;
    const double kappa = cv * (1.0 / R - dlog);
    rep.curvature.push_back(kappa);
    rep.min_curvature = std::min(rep.min_curvature, kappa);

    // Probe: march along each tangent orientation for a short travel time.
    const Vec2 tangent{-s.normal.y, s.normal.x};
    const double span = 0.02 * R / cv;
    const int steps = 40;
    bool outside = true;
    for (double sign : {1.0, -1.0}) {
      RayState st{s.point, (sign / cv) * tangent, 0.0};
      for (int k = 0; k < steps; ++k) st = rk4(speed, st, span / steps);
      outside = outside && (mask.distance_from_center(st.x) - R > 0.0);
    }

    const bool decided = std::abs(kappa) * R >= 1e-3;
    if (!decided) {
      ++rep.n_undecided;
      continue;
    }
    if ((kappa > 0.0) != outside) ++rep.n_disagree;
    formula_convex = formula_convex && kappa > 0.0;
    probe_convex = probe_convex && outside;
  }
  rep.formula_convex = formula_convex && rep.min_curvature > 0.0;
  rep.probe_convex = probe_convex;
  return rep;
}

}  // namespace patlab
