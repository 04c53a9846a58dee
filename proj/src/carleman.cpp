#include "patlab/carleman.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cfloat>
#include <limits>

#include "patlab/interpolation.hpp"

namespace patlab {

ConvexWeight ConvexWeight::quadratic(Vec2 x0, double scale, double shift) {
  if (!(scale > 0.0)) throw PreconditionError("quadratic weight: scale must be positive");
  ConvexWeight w;
  w.x0_ = x0;
  w.scale_ = scale;
  w.shift_ = shift;
  return w;
}

ConvexWeight ConvexWeight::sampled(ScalarField values) {
  if (!values.all_finite()) throw PreconditionError("sampled weight: non-finite values");
  ConvexWeight w;
  w.samples_ = std::move(values);
  return w;
}

ConvexWeight ConvexWeight::shifted(double delta) const {
  ConvexWeight w = *this;
  w.shift_ += delta;
  if (w.samples_)
    for (double& v : w.samples_->values()) v += delta;
  return w;
}

ConvexWeight ConvexWeight::scaled(double factor) const {
  ConvexWeight w = *this;
  w.scale_ *= factor;
  w.shift_ *= factor;
  if (w.samples_) *w.samples_ *= factor;
  return w;
}

namespace {

void require_quadratic(bool q) {
  if (!q) throw PreconditionError("sampled weight can only be evaluated at grid nodes");
}

}  // namespace

double ConvexWeight::value(Vec2 p) const {
  require_quadratic(is_quadratic());
  const Vec2 d = p - x0_;
  return 0.5 * scale_ * dot(d, d) + shift_;
}

Vec2 ConvexWeight::gradient(Vec2 p) const {
  require_quadratic(is_quadratic());
  return scale_ * (p - x0_);
}

Sym2 ConvexWeight::hessian(Vec2) const {
  require_quadratic(is_quadratic());
  return {scale_, 0.0, scale_};
}

double ConvexWeight::laplacian(Vec2) const {
  require_quadratic(is_quadratic());
  return 2.0 * scale_;
}

Vec2 ConvexWeight::laplacian_gradient(Vec2) const {
  require_quadratic(is_quadratic());
  return {};
}

double ConvexWeight::value_at(const Grid2D& g, std::size_t k) const {
  if (is_quadratic()) return value(g.node(k));
  return (*samples_)[k];
}

Vec2 ConvexWeight::gradient_at(const Grid2D& g, std::size_t k) const {
  if (is_quadratic()) return gradient(g.node(k));
  const auto& f = *samples_;
  const auto w = static_cast<std::size_t>(g.width());
  return {(f[k + 1] - f[k - 1]) / (2.0 * g.h()), (f[k + w] - f[k - w]) / (2.0 * g.h())};
}

Sym2 ConvexWeight::hessian_at(const Grid2D& g, std::size_t k) const {
  if (is_quadratic()) return hessian(g.node(k));
  const auto& f = *samples_;
  const auto w = static_cast<std::size_t>(g.width());
  const double h2 = g.h() * g.h();
  return {(f[k + 1] - 2.0 * f[k] + f[k - 1]) / h2,
          (f[k + 1 + w] - f[k + 1 - w] - f[k - 1 + w] + f[k - 1 - w]) / (4.0 * h2),
          (f[k + w] - 2.0 * f[k] + f[k - w]) / h2};
}

double ConvexWeight::laplacian_at(const Grid2D& g, std::size_t k) const {
  if (is_quadratic()) return laplacian(g.node(k));
  const auto& f = *samples_;
  const auto w = static_cast<std::size_t>(g.width());
  return (f[k + 1] + f[k - 1] + f[k + w] + f[k - w] - 4.0 * f[k]) / (g.h() * g.h());
}

Vec2 ConvexWeight::laplacian_gradient_at(const Grid2D& g, std::size_t k) const {
  if (is_quadratic()) return laplacian_gradient(g.node(k));
  const auto w = static_cast<std::size_t>(g.width());
  return {(laplacian_at(g, k + 1) - laplacian_at(g, k - 1)) / (2.0 * g.h()),
          (laplacian_at(g, k + w) - laplacian_at(g, k - w)) / (2.0 * g.h())};
}

namespace {

// Everything the bounds need at one point of M.
struct PointData {
  double c;
  Vec2 grad_c;
  double ell;
  Vec2 grad_ell;
  Sym2 hess_ell;
  double lap_ell;
  Vec2 grad_lap_ell;
};

// Interior nodes always; boundary samples too when l has closed-form derivatives.
std::vector<PointData> sample_domain(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask) {
  if (!(c.grid() == mask.grid())) throw PreconditionError("weight bounds: speed and mask on different grids");
  const Grid2D& g = mask.grid();
  const SpeedSampler speed(c);
  std::vector<PointData> out;
  out.reserve(mask.interior_nodes().size() + mask.samples().size());
  const int margin = ell.is_quadratic() ? 2 : 3;
  for (std::size_t k : mask.interior_nodes()) {
    const int i = g.col(k), j = g.row(k);
    if (i < margin || j < margin || i > g.nx() - margin || j > g.ny() - margin)
      throw GeometryError("weight bounds: M too close to the grid edge");
    out.push_back({c[k], speed.gradient(g.node(k)), ell.value_at(g, k), ell.gradient_at(g, k), ell.hessian_at(g, k),
                   ell.laplacian_at(g, k), ell.laplacian_gradient_at(g, k)});
  }
  if (ell.is_quadratic()) {
    for (const auto& s : mask.samples()) {
      const Vec2 p = s.point;
      out.push_back({speed.value(p), speed.gradient(p), ell.value(p), ell.gradient(p), ell.hessian(p),
                     ell.laplacian(p), ell.laplacian_gradient(p)});
    }
  }
  return out;
}

// g-Hessian of l in Euclidean components, times c^2 so that its eigenvalues
// are relative to g.
Sym2 metric_hessian(const PointData& d) {
  const Vec2 gl = (1.0 / d.c) * d.grad_c;  // grad log c
  const double cross_term = dot(gl, d.grad_ell);
  const double c2 = d.c * d.c;
  return {c2 * (d.hess_ell.xx + 2.0 * gl.x * d.grad_ell.x - cross_term),
          c2 * (d.hess_ell.xy + gl.x * d.grad_ell.y + gl.y * d.grad_ell.x),
          c2 * (d.hess_ell.yy + 2.0 * gl.y * d.grad_ell.y - cross_term)};
}

void check_no_critical_point(const ConvexWeight& ell, const DomainMask& mask, const std::vector<PointData>& pts) {
  if (ell.is_quadratic()) {
    if (norm(ell.x0() - mask.center()) <= mask.radius())
      throw HypothesisError("weight has a critical point in M");
    return;
  }
  // A zero of grad l can hide inside a cell when |grad l| is below h |D^2 l|.
  const double h = mask.grid().h();
  for (const auto& d : pts) {
    const double hn = std::max({std::abs(d.hess_ell.xx), std::abs(d.hess_ell.yy), std::abs(d.hess_ell.xy)});
    if (norm(d.grad_ell) <= 2.0 * h * hn || norm(d.grad_ell) == 0.0)
      throw HypothesisError("weight has a critical point in M");
  }
}

double rho_of(const std::vector<PointData>& pts) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& d : pts) lo = std::min(lo, metric_hessian(d).min_eigenvalue());
  const double rho = kConvexitySafety * lo;
  if (!(rho > 0.0)) throw HypothesisError("weight is not strictly convex in the metric of c");
  return rho;
}

double r_of(const ConvexWeight& ell, const DomainMask& mask, const std::vector<PointData>& pts) {
  check_no_critical_point(ell, mask, pts);
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& d : pts) lo = std::min(lo, d.c * norm(d.grad_ell));
  const double r = kConvexitySafety * lo;
  if (!(r > 0.0)) throw HypothesisError("weight has a critical point in M");
  return r;
}

double lap_grad_max(const std::vector<PointData>& pts) {
  double hi = 0.0;
  for (const auto& d : pts) {
    // d(c^2 Lap l) = 2 c Lap l dc + c^2 d(Lap l)
    const Vec2 grad = 2.0 * d.c * d.lap_ell * d.grad_c + d.c * d.c * d.grad_lap_ell;
    hi = std::max(hi, d.c * norm(grad));
  }
  return hi;
}

}  // namespace

double metric_hessian_bound(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask) {
  return rho_of(sample_domain(ell, c, mask));
}

double gradient_bound(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask) {
  return r_of(ell, mask, sample_domain(ell, c, mask));
}

double weighted_laplacian_gradient_max(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask) {
  return lap_grad_max(sample_domain(ell, c, mask));
}

double carleman_tau(double rho, double r, double C1) {
  if (!(rho > 0.0) || !(r > 0.0)) throw HypothesisError("tau needs positive rho and r");
  return std::max({3.0 / rho, C1 / (2.0 * rho * r * r), 1.0});
}

double observability_threshold(const CarlemanConstants& k) {
  return 2.0 * k.C_F * (2.0 * k.C2 * k.C2 * k.tau + k.C3) * std::exp((k.B_ell - k.beta_ell) * k.tau) * k.tau;
}

CarlemanConstants compute_constants(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask,
                                    double C_F) {
  if (!(C_F >= 1.0)) throw PreconditionError("compute_constants: C_F must be at least 1");
  const auto pts = sample_domain(ell, c, mask);
  CarlemanConstants k;
  k.rho = rho_of(pts);
  k.r = r_of(ell, mask, pts);
  const double g = lap_grad_max(pts);
  k.C1 = k.rho * k.rho + g * g;
  double c2 = 0.0, c3 = 0.0, lmax = -std::numeric_limits<double>::infinity(),
         lmin = std::numeric_limits<double>::infinity();
  for (const auto& d : pts) {
    c2 = std::max(c2, d.c * norm(d.grad_ell) + 1.0);
    c3 = std::max(c3, 0.5 * (k.rho + std::abs(d.c * d.c * d.lap_ell)));
    lmax = std::max(lmax, d.ell);
    lmin = std::min(lmin, d.ell);
  }
  k.C2 = c2;
  k.C3 = c3;
  k.B_ell = 2.0 * lmax;
  k.beta_ell = 2.0 * lmin;
  k.C_F = C_F;
  k.tau = carleman_tau(k.rho, k.r, k.C1);
  k.T_min = observability_threshold(k);
  return k;
}

FriedrichsEstimate friedrichs_estimate(const SpeedField& c, const DomainMask& mask) {
  if (!(c.grid() == mask.grid())) throw PreconditionError("friedrichs: speed and mask on different grids");
  const Grid2D& g = mask.grid();
  const double h = g.h();
  const Vec2 ctr = mask.center();
  const double R = mask.radius();
  const SpeedSampler speed(c);

  std::vector<int> dof(g.size(), -1);
  int n_dof = 0;
  auto dof_of = [&](std::size_t k) {
    if (dof[k] < 0) dof[k] = n_dof++;
    return dof[k];
  };

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> stiff, mass;

  const double g3[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  const double w3[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const double g2[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  constexpr int kSub = 8;

  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const Vec2 lo = g.node(i, j) - ctr;
      const double area = rect_disk_area(lo.x, lo.x + h, lo.y, lo.y + h, R);
      if (area <= 0.0) continue;
      const bool full = area >= h * h * (1.0 - 1e-14);
      const std::array<std::size_t, 4> nodes{g.index(i, j), g.index(i + 1, j), g.index(i, j + 1),
                                             g.index(i + 1, j + 1)};
      std::array<int, 4> d{};
      for (int a = 0; a < 4; ++a) d[a] = dof_of(nodes[a]);
      double K[4][4] = {}, M[4][4] = {};

      auto add_point = [&](double xi, double eta, double weight) {
        const Vec2 p = g.node(i, j) + Vec2{xi * h, eta * h};
        const double N[4] = {(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta};
        const double Nx[4] = {-(1 - eta) / h, (1 - eta) / h, -eta / h, eta / h};
        const double Ny[4] = {-(1 - xi) / h, -xi / h, (1 - xi) / h, xi / h};
        const double cv = speed.value(p);
        const double wa = weight * h * h;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            K[a][b] += wa * (Nx[a] * Nx[b] + Ny[a] * Ny[b]);
            M[a][b] += wa * N[a] * N[b] / (cv * cv);
          }
      };

      if (full) {
        for (int q = 0; q < 3; ++q)
          for (int p = 0; p < 3; ++p) add_point(g3[p], g3[q], w3[p] * w3[q]);
      } else {
        const double sw = 0.25 / (kSub * kSub);
        for (int sj = 0; sj < kSub; ++sj)
          for (int si = 0; si < kSub; ++si)
            for (int q = 0; q < 2; ++q)
              for (int p = 0; p < 2; ++p) {
                const double xi = (si + g2[p]) / kSub;
                const double eta = (sj + g2[q]) / kSub;
                if (norm(lo + Vec2{xi * h, eta * h}) < R) add_point(xi, eta, sw);
              }
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          stiff.emplace_back(d[a], d[b], K[a][b]);
          mass.emplace_back(d[a], d[b], M[a][b]);
        }
    }
  }

  const double ds = mask.arclength_step();
  for (const auto& s : mask.samples()) {
    const BilinearStencil st = bilinear_stencil(g, s.point);
    const double w = ds / speed.value(s.point);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        stiff.emplace_back(dof_of(st.nodes[a]), dof_of(st.nodes[b]), w * st.weights[a] * st.weights[b]);
  }

  // Nodes reached only by the boundary stencil, or by no quadrature point,
  // have no mass and make S singular; they are pinned to zero, which keeps
  // the trial space inside H1(M).
  std::vector<double> diag(std::size_t(n_dof), 0.0);
  for (const auto& t : mass)
    if (t.row() == t.col()) diag[std::size_t(t.row())] += t.value();
  std::vector<int> keep(std::size_t(n_dof), -1);
  int n_keep = 0;
  for (int q = 0; q < n_dof; ++q)
    if (diag[std::size_t(q)] > 0.0) keep[std::size_t(q)] = n_keep++;
  auto compress = [&](const std::vector<Triplet>& in) {
    std::vector<Triplet> out;
    out.reserve(in.size());
    for (const auto& t : in) {
      const int a = keep[std::size_t(t.row())], b = keep[std::size_t(t.col())];
      if (a >= 0 && b >= 0) out.emplace_back(a, b, t.value());
    }
    return out;
  };
  const auto stiff_kept = compress(stiff);
  const auto mass_kept = compress(mass);
  n_dof = n_keep;

  Eigen::SparseMatrix<double> S(n_dof, n_dof), Mm(n_dof, n_dof);
  S.setFromTriplets(stiff_kept.begin(), stiff_kept.end());
  Mm.setFromTriplets(mass_kept.begin(), mass_kept.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(S);
  if (solver.info() != Eigen::Success) throw ConvergenceError("friedrichs: factorisation failed");

  Eigen::VectorXd x = Eigen::VectorXd::Ones(n_dof);
  double lambda = std::numeric_limits<double>::infinity();
  FriedrichsEstimate est;
  for (int it = 1; it <= 1000; ++it) {
    const Eigen::VectorXd y = solver.solve(Mm * x);
    const double my = y.dot(Mm * y);
    const double next = y.dot(S * y) / my;
    x = y / std::sqrt(my);
    est.iterations = it;
    if (std::abs(next - lambda) <= 1e-8 * next) {
      lambda = next;
      est.lambda_min = lambda;
      est.raw = 1.0 / lambda;
      est.C_F = std::max(1.0, 1.05 * est.raw);
      return est;
    }
    lambda = next;
  }
  throw ConvergenceError("friedrichs: inverse iteration did not converge");
}

double friedrichs_constant(const SpeedField& c, const DomainMask& mask) { return friedrichs_estimate(c, mask).C_F; }

SpaceTimeFunction synthetic_wave(Vec2 a, double s, double t0) {
  return [=](double t, Vec2 x) {
    const Vec2 d = x - a;
    return (1.0 + 0.3 * x.x - 0.2 * x.y + 0.5 * t * x.x) *
           std::exp(-dot(d, d) / (2.0 * s * s) - (t - t0) * (t - t0) / (2.0 * s * s));
  };
}

namespace {

struct CheckContext {
  const Grid2D& g;
  std::size_t w;
  double h, dt, tau, rho, C1;
  int level_offset;  // V row of level 0
  const std::vector<double>& V;  // (levels) x (grid)
  const std::vector<double>& ell;
  const std::vector<Vec2>& grad_ell;
  const std::vector<double>& lap_ell;
  const std::vector<double>& c2;

  double v(int n, std::size_t k) const {
    return V[static_cast<std::size_t>(n + level_offset) * g.size() + k];
  }
  double u(int n, std::size_t k) const { return v(n, k) * std::exp(-tau * ell[k]); }
  double vt(int n, std::size_t k, int s) const { return (v(n + s, k) - v(n - s, k)) / (2.0 * s * dt); }
  Vec2 grad_v(int n, std::size_t k, int s) const {
    const std::size_t ws = w * std::size_t(s);
    return {(v(n, k + s) - v(n, k - s)) / (2.0 * s * h), (v(n, k + ws) - v(n, k - ws)) / (2.0 * s * h)};
  }
  double theta(int n, std::size_t k, int s) const {
    return tau * ((c2[k] * lap_ell[k] - rho) * v(n, k) + 2.0 * c2[k] * dot(grad_v(n, k, s), grad_ell[k]));
  }
  double q(int n, std::size_t k, int s) const {
    const Vec2 gv = grad_v(n, k, s);
    const double vv = v(n, k);
    const double gl2 = c2[k] * dot(grad_ell[k], grad_ell[k]);
    const double t = vt(n, k, s);
    return tau * (t * t + c2[k] * dot(gv, gv) - (tau * rho - tau * tau * gl2) * vv * vv);
  }

  struct Eval {
    double residual;
    double floor;
  };

  Eval residual(int n, std::size_t k, int s) const {
    const std::size_t ws = w * std::size_t(s);
    const double sh = s * h, st = s * dt;
    const double e2 = std::exp(2.0 * tau * ell[k]);

    const double u0 = u(n, k);
    const double utt = (u(n + s, k) - 2.0 * u0 + u(n - s, k)) / (st * st);
    const double lap_u = (u(n, k + s) + u(n, k - s) + u(n, k + ws) + u(n, k - ws) - 4.0 * u0) / (sh * sh);
    const double Lu = utt - c2[k] * lap_u;

    const double time_flux =
        (theta(n + s, k, s) * vt(n + s, k, s) - theta(n - s, k, s) * vt(n - s, k, s)) / (2.0 * st);
    const double div_theta =
        c2[k] * ((theta(n, k + s, s) * grad_v(n, k + s, s).x - theta(n, k - s, s) * grad_v(n, k - s, s).x) +
                 (theta(n, k + ws, s) * grad_v(n, k + ws, s).y - theta(n, k - ws, s) * grad_v(n, k - ws, s).y)) /
        (2.0 * sh);
    const double div_Y = c2[k] *
                         ((q(n, k + s, s) * grad_ell[k + s].x - q(n, k - s, s) * grad_ell[k - s].x) +
                          (q(n, k + ws, s) * grad_ell[k + ws].y - q(n, k - ws, s) * grad_ell[k - ws].y)) /
                         (2.0 * sh);
    const double lhs = 0.5 * e2 * Lu * Lu - time_flux + div_theta + div_Y;

    const double ut = (u(n + s, k) - u(n - s, k)) / (2.0 * st);
    const Vec2 gu{(u(n, k + s) - u(n, k - s)) / (2.0 * sh), (u(n, k + ws) - u(n, k - ws)) / (2.0 * sh)};
    const double gl2 = c2[k] * dot(grad_ell[k], grad_ell[k]);
    const double rhs = 0.5 * e2 * (rho * tau - 1.0) * (ut * ut + c2[k] * dot(gu, gu)) +
                       e2 * (2.0 * rho * gl2 * tau - C1) * tau * tau * u0 * u0;

    // Rounding in nested differences grows like |operands| / stride^2.
    const double vmax = std::max({std::abs(v(n, k)), std::abs(v(n + s, k)), std::abs(v(n - s, k))});
    const double th = std::abs(theta(n, k, s));
    const double qq = std::abs(q(n, k, s));
    const double scale = th * vmax * (1.0 / (st * st) + 2.0 * c2[k] / (sh * sh)) +
                         qq * std::sqrt(gl2) * std::sqrt(c2[k]) * 2.0 / sh +
                         e2 * std::abs(Lu) * std::abs(u0) * (4.0 / (st * st) + 8.0 * c2[k] / (sh * sh)) +
                         std::abs(rhs);
    return {lhs - rhs, 64.0 * DBL_EPSILON * scale};
  }
};

}  // namespace

CarlemanCheckSample pointwise_carleman_check(const SpaceTimeFunction& u, const ConvexWeight& ell, const SpeedField& c,
                                             const DomainMask& mask, double tau, double rho,
                                             const CarlemanCheckGrid& grid) {
  if (!(tau > 0.0)) throw HypothesisError("Carleman check: tau must be positive");
  if (!(rho > 0.0)) throw HypothesisError("Carleman check: rho must be positive");
  if (grid.n_steps < 8 || !(grid.duration > 0.0)) throw PreconditionError("Carleman check: degenerate time grid");
  if (!(c.grid() == mask.grid())) throw PreconditionError("Carleman check: speed and mask on different grids");
  const Grid2D& g = mask.grid();
  constexpr int kReach = 4;  // nested stride-2 differences
  const int margin = kReach + (ell.is_quadratic() ? 0 : 1);
  for (std::size_t k : mask.interior_nodes()) {
    const int i = g.col(k), j = g.row(k);
    if (i < margin || j < margin || i > g.nx() - margin || j > g.ny() - margin)
      throw GeometryError("Carleman check: M too close to the grid edge");
  }

  const double g_max = weighted_laplacian_gradient_max(ell, c, mask);
  const double C1 = rho * rho + g_max * g_max;

  const std::size_t n_nodes = g.size();
  std::vector<double> ell_v(n_nodes, 0.0), lap(n_nodes, 0.0), c2(n_nodes);
  std::vector<Vec2> grad(n_nodes);
  for (std::size_t k = 0; k < n_nodes; ++k) {
    c2[k] = c[k] * c[k];
    const int i = g.col(k), j = g.row(k);
    const int m = ell.is_quadratic() ? 0 : 1;
    if (i < m || j < m || i > g.nx() - m || j > g.ny() - m) continue;
    ell_v[k] = ell.value_at(g, k);
    grad[k] = ell.gradient_at(g, k);
    lap[k] = ell.laplacian_at(g, k);
  }

  const int N = grid.n_steps;
  const double dt = grid.duration / N;
  const int n_levels = N + 1 + 2 * kReach;
  std::vector<double> V(static_cast<std::size_t>(n_levels) * n_nodes, 0.0);
  for (int L = 0; L < n_levels; ++L) {
    const double t = (L - kReach) * dt;
    double* row = V.data() + static_cast<std::size_t>(L) * n_nodes;
    for (std::size_t k = 0; k < n_nodes; ++k) {
      const int i = g.col(k), j = g.row(k);
      if (i == 0 || j == 0 || i == g.nx() || j == g.ny()) continue;
      row[k] = std::exp(tau * ell_v[k]) * u(t, g.node(k));
    }
  }

  const CheckContext ctx{g,     static_cast<std::size_t>(g.width()), g.h(), dt, tau, rho, C1, kReach, V, ell_v,
                         grad,  lap,                                 c2};

  CarlemanCheckSample out{ScalarField(g), ScalarField(g), ScalarField(g)};
  out.C1 = C1;
  out.min_residual = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= N; ++n) {
    for (std::size_t k : mask.interior_nodes()) {
      const auto fine = ctx.residual(n, k, 1);
      const auto coarse = ctx.residual(n, k, 2);
      const double delta = 2.0 * std::abs(fine.residual - coarse.residual) / 3.0 + fine.floor + coarse.floor;
      out.min_residual = std::min(out.min_residual, fine.residual);
      out.max_delta = std::max(out.max_delta, delta);
      ++out.n_points;
      if (fine.residual < -delta) ++out.n_violations;
      if (n == N / 2) {
        out.residual[k] = fine.residual;
        out.theta[k] = ctx.theta(n, k, 1);
        out.Y_norm[k] = std::abs(ctx.q(n, k, 1)) * std::sqrt(c2[k] * dot(grad[k], grad[k]));
      }
    }
  }
  if (out.n_points == 0) out.min_residual = 0.0;
  out.violating_fraction = out.n_points ? double(out.n_violations) / double(out.n_points) : 0.0;
  return out;
}

}  // namespace patlab
