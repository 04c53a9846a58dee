#include "patlab/time_reversal.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>

#include "patlab/forward_solver.hpp"
#include "patlab/interpolation.hpp"

namespace patlab {

namespace {

// Periodic linear interpolation weights for angle theta on n samples.
struct AngleWeights {
  int k0 = 0;
  int k1 = 0;
  double w1 = 0.0;

  AngleWeights(double theta, int n) {
    double u = theta / (2.0 * kPi) * n;
    u -= n * std::floor(u / n);
    k0 = std::min(static_cast<int>(std::floor(u)), n - 1);
    w1 = u - k0;
    k1 = (k0 + 1) % n;
  }
  double apply(std::span<const double> v) const { return (1.0 - w1) * v[std::size_t(k0)] + w1 * v[std::size_t(k1)]; }
};

// Ghost value u_g = (1 + beta) u_b - beta u_probe along the normal through g,
// with the probe alpha h inside the circle.
struct Ghost {
  std::size_t node;
  AngleWeights angle;
  double beta;
  BilinearStencil probe;
};

std::vector<Ghost> build_ghosts(const DomainMask& mask) {
  const Grid2D& g = mask.grid();
  const double h = g.h();
  const int n = mask.n_theta();
  std::vector<Ghost> ghosts;
  for (std::size_t k : mask.near_boundary_nodes()) {
    const Vec2 p = g.node(k);
    const Vec2 d = p - mask.center();
    const double r = norm(d);
    const Vec2 normal = (1.0 / r) * d;
    const Vec2 b = mask.center() + mask.radius() * normal;
    bool placed = false;
    for (double alpha = 2.0; alpha <= 6.0 && !placed; alpha += 0.25) {
      const BilinearStencil s = bilinear_stencil(g, b - alpha * h * normal);
      const bool inside = std::all_of(s.nodes.begin(), s.nodes.end(), [&](std::size_t q) {
        return mask.node_class(q) == NodeClass::interior;
      });
      if (!inside) continue;
      ghosts.push_back({k, AngleWeights(mask.angle_of(p), n), (r - mask.radius()) / (alpha * h), s});
      placed = true;
    }
    if (!placed) throw GeometryError("no interior probe for a boundary node; the disk is under-resolved");
  }
  return ghosts;
}

void fill_ghosts(const std::vector<Ghost>& ghosts, std::span<const double> boundary, std::span<double> u) {
  for (const Ghost& q : ghosts) {
    const double ub = q.angle.apply(boundary);
    u[q.node] = (1.0 + q.beta) * ub - q.beta * q.probe.apply(u);
  }
}

// Shortley-Weller Laplace system on the interior nodes.
class LaplaceSystem {
 public:
  LaplaceSystem(const DomainMask& mask, const HarmonicOptions& options) : options_(options) {
    const Grid2D& g = mask.grid();
    const double R = mask.radius();
    const int n_theta = mask.n_theta();
    const auto& interior = mask.interior_nodes();
    if (interior.empty()) throw GeometryError("harmonic extension: the mask has no interior nodes");

    unknown_.assign(g.size(), -1);
    // Interior nodes on the circle to within round-off are pinned to the data.
    for (std::size_t k : interior) {
      const Vec2 p = g.node(k);
      if (R - mask.distance_from_center(p) < 1e-8 * g.h())
        pinned_.push_back({k, AngleWeights(mask.angle_of(p), n_theta)});
      else
        unknown_[k] = static_cast<int>(nodes_.size()), nodes_.push_back(k);
    }

    const int m = static_cast<int>(nodes_.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(std::size_t(m) * 5);
    const std::array<std::pair<int, int>, 4> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (int row = 0; row < m; ++row) {
      const std::size_t k = nodes_[std::size_t(row)];
      const int i = g.col(k);
      const int j = g.row(k);
      const Vec2 p = g.node(i, j) - mask.center();

      // Arm lengths (fractions of h) and where they end.
      std::array<double, 4> s{};
      std::array<long, 4> target{};
      std::array<AngleWeights, 4> bw{AngleWeights(0, n_theta), AngleWeights(0, n_theta),
                                     AngleWeights(0, n_theta), AngleWeights(0, n_theta)};
      for (int a = 0; a < 4; ++a) {
        const int ni = i + dirs[a].first;
        const int nj = j + dirs[a].second;
        const std::size_t nk = g.index(ni, nj);
        if (unknown_[nk] >= 0) {
          s[a] = 1.0;
          target[a] = unknown_[nk];
          continue;
        }
        if (mask.node_class(nk) == NodeClass::interior) {  // pinned neighbour
          s[a] = 1.0;
          target[a] = -1;
          bw[a] = AngleWeights(mask.angle_of(g.node(nk)), n_theta);
          continue;
        }
        // Crossing p + t e h with |.| = R, t in (0, 1].
        const Vec2 e{double(dirs[a].first), double(dirs[a].second)};
        const double pe = dot(p, e);
        const double t = (-pe + std::sqrt(pe * pe + R * R - dot(p, p))) / g.h();
        s[a] = std::clamp(t, 1e-12, 1.0);
        target[a] = -1;
        bw[a] = AngleWeights(mask.angle_of(mask.center() + p + t * g.h() * e), n_theta);
      }

      // Row scaled by h^2 / 2: sum over axes of u_+/(s+(s+ + s-)) + u_-/(s-(s+ + s-)) - u/(s+ s-).
      double diag = 0.0;
      std::vector<std::pair<AngleWeights, double>> rhs_terms;
      for (int axis = 0; axis < 2; ++axis) {
        const double sp = s[2 * axis];
        const double sm = s[2 * axis + 1];
        diag += 1.0 / (sp * sm);
        const double cp = 1.0 / (sp * (sp + sm));
        const double cm = 1.0 / (sm * (sp + sm));
        for (auto [a, coef] : {std::pair{2 * axis, cp}, std::pair{2 * axis + 1, cm}}) {
          if (target[a] >= 0)
            triplets.emplace_back(row, static_cast<int>(target[a]), -coef);
          else
            rhs_terms.emplace_back(bw[a], coef);
        }
      }
      triplets.emplace_back(row, row, diag);
      rhs_.push_back(std::move(rhs_terms));
    }
    A_.resize(m, m);
    A_.setFromTriplets(triplets.begin(), triplets.end());
    solver_.setTolerance(options_.tolerance);
    solver_.setMaxIterations(options_.max_iterations);
    solver_.compute(A_);
  }

  void solve(std::span<const double> boundary, std::span<double> out) const {
    const int m = static_cast<int>(nodes_.size());
    Eigen::VectorXd b(m);
    for (int row = 0; row < m; ++row) {
      double v = 0.0;
      for (const auto& [w, coef] : rhs_[std::size_t(row)]) v += coef * w.apply(boundary);
      b[row] = v;
    }
    for (const auto& [k, w] : pinned_) out[k] = w.apply(boundary);
    if (b.norm() == 0.0) {
      for (int row = 0; row < m; ++row) out[nodes_[std::size_t(row)]] = 0.0;
      return;
    }
    Eigen::VectorXd x = solver_.solve(b);
    if (solver_.info() != Eigen::Success || !x.allFinite())
      throw ConvergenceError("harmonic extension: iterative solve did not reach the residual target");
    for (int row = 0; row < m; ++row) out[nodes_[std::size_t(row)]] = x[row];
  }

 private:
  HarmonicOptions options_;
  std::vector<int> unknown_;
  std::vector<std::size_t> nodes_;
  std::vector<std::pair<std::size_t, AngleWeights>> pinned_;
  std::vector<std::vector<std::pair<AngleWeights, double>>> rhs_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> A_;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::DiagonalPreconditioner<double>> solver_;
};

void check_boundary_values(std::span<const double> boundary, const DomainMask& mask) {
  if (static_cast<int>(boundary.size()) != mask.n_theta())
    throw PreconditionError("harmonic extension: one boundary value per mask sample expected");
  for (double v : boundary)
    if (!std::isfinite(v)) throw PreconditionError("harmonic extension: non-finite boundary value");
}

}  // namespace

struct TimeReversal::Impl {
  DomainMask mask;
  SpeedField c0;
  TimeReversalOptions options;
  std::vector<Ghost> ghosts;
  LaplaceSystem laplace;
  std::vector<double> coef_h2;  // c0^2 / h^2 on interior nodes

  Impl(const SpeedField& c, const DomainMask& m, const TimeReversalOptions& o)
      : mask(m), c0(c), options(o), ghosts(build_ghosts(m)), laplace(m, o.harmonic) {
    const double h = m.grid().h();
    for (std::size_t k : m.interior_nodes()) coef_h2.push_back(c[k] * c[k] / (h * h));
  }

  ScalarField harmonic(std::span<const double> boundary) const {
    check_boundary_values(boundary, mask);
    ScalarField out(mask.grid());
    laplace.solve(boundary, out.values());
    fill_ghosts(ghosts, boundary, out.values());
    return out;
  }

  ScalarField apply(const BoundaryTrace& trace_in) const {
    if (trace_in.n_theta() != mask.n_theta() || std::abs(trace_in.radius() - mask.radius()) > 1e-12 * mask.radius())
      throw PreconditionError("time_reverse: trace does not match the boundary sampling of the mask");
    if (trace_in.n_times() < 2) throw PreconditionError("time_reverse: trace needs at least two time levels");
    if (!trace_in.all_finite()) throw PreconditionError("time_reverse: non-finite trace");

    const double T = trace_in.duration();
    const double dt_cfl = cfl_timestep(c0, mask.grid().h(), options.cfl_safety);
    const BoundaryTrace* trace = &trace_in;
    std::optional<BoundaryTrace> resampled;
    if (trace_in.dt() > dt_cfl * (1.0 + 1e-9)) {
      const int steps = static_cast<int>(std::ceil(T / dt_cfl - 1e-12));
      resampled.emplace(trace_in.resampled(steps + 1));
      trace = &*resampled;
    }
    const int N = trace->n_times() - 1;
    const double dt = trace->dt();
    if (dt > dt_cfl * (1.0 + 1e-9)) throw PreconditionError("time_reverse: CFL violated after resampling");

    const Grid2D& g = mask.grid();
    const auto w = static_cast<std::size_t>(g.width());
    const auto& interior = mask.interior_nodes();
    const double dt2 = dt * dt;

    ScalarField next(g), cur(g), prev(g);
    if (!options.zero_final_data) cur = harmonic(trace->row(N));
    else fill_ghosts(ghosts, trace->row(N), cur.values());

    for (int n = N; n > 0; --n) {
      const bool first = n == N;
      const double* u = cur.values().data();
      const double* p = prev.values().data();
      double* out = next.values().data();
      for (std::size_t q = 0; q < interior.size(); ++q) {
        const std::size_t k = interior[q];
        const double lap = u[k - 1] + u[k + 1] + u[k - w] + u[k + w] - 4.0 * u[k];
        const double a = dt2 * coef_h2[q];
        out[k] = first ? u[k] + 0.5 * a * lap : 2.0 * u[k] - p[k] + a * lap;
      }
      fill_ghosts(ghosts, trace->row(n - 1), next.values());
      std::swap(prev, cur);
      std::swap(cur, next);
    }
    return cur;
  }
};

TimeReversal::TimeReversal(const SpeedField& c0, const DomainMask& mask, const TimeReversalOptions& options) {
  if (!(c0.grid() == mask.grid())) throw PreconditionError("time reversal: speed and mask on different grids");
  impl_ = std::make_unique<Impl>(c0, mask, options);
}
TimeReversal::~TimeReversal() = default;
TimeReversal::TimeReversal(TimeReversal&&) noexcept = default;
TimeReversal& TimeReversal::operator=(TimeReversal&&) noexcept = default;

ScalarField TimeReversal::apply(const BoundaryTrace& h) const { return impl_->apply(h); }
ScalarField TimeReversal::harmonic(std::span<const double> boundary_values) const {
  return impl_->harmonic(boundary_values);
}
const DomainMask& TimeReversal::mask() const { return impl_->mask; }

ScalarField harmonic_extension(std::span<const double> boundary_values, const DomainMask& mask,
                               const HarmonicOptions& options) {
  const std::vector<Ghost> ghosts = build_ghosts(mask);
  const LaplaceSystem laplace(mask, options);
  check_boundary_values(boundary_values, mask);
  ScalarField out(mask.grid());
  laplace.solve(boundary_values, out.values());
  fill_ghosts(ghosts, boundary_values, out.values());
  return out;
}

ScalarField time_reverse(const BoundaryTrace& h, const SpeedField& c0, const DomainMask& mask,
                         const TimeReversalOptions& options) {
  return TimeReversal(c0, mask, options).apply(h);
}

}  // namespace patlab
